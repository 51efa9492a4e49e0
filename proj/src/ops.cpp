#include "wmhseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace wmhseg::ops {

namespace {

// Four fixed partial sums; the summation order is a function of n only.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) s0 += a[j] * b[j];
    return (s0 + s1) + (s2 + s3);
}

double sum(const double* a, std::size_t n) {
    double s0 = 0.0, s1 = 0.0;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        s0 += a[j];
        s1 += a[j + 1];
    }
    for (; j < n; ++j) s0 += a[j];
    return s0 + s1;
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* op) {
    if (!(a == b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
    }
}

// Valid output range for a tap offset d on an axis of length len.
struct Span1 {
    std::size_t lo;
    std::size_t hi;
};
Span1 valid_range(std::ptrdiff_t d, std::size_t len) {
    const auto n = static_cast<std::ptrdiff_t>(len);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -d);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - d);
    if (hi <= lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void check_conv_shapes(const Array4& x, const Array4& weight, const Array4& bias) {
    const Shape4& ws = weight.shape();
    if (ws.h != ws.w || (ws.h != 1 && ws.h != 3)) {
        throw std::invalid_argument("conv2d: unsupported kernel size " + std::to_string(ws.h) + "x" +
                                    std::to_string(ws.w));
    }
    if (x.shape().c != ws.c) {
        throw std::invalid_argument("conv2d: channel mismatch, input has " +
                                    std::to_string(x.shape().c) + " channels, kernel expects " +
                                    std::to_string(ws.c));
    }
    require(bias.size() == ws.n, "conv2d: bias length must equal output channels");
}

}  // namespace

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Array4 conv2d_direct(const Array4& x, const Array4& weight, const Array4& bias) {
    check_conv_shapes(x, weight, bias);
    const Shape4& xs = x.shape();
    const std::size_t out_c = weight.shape().n;
    const std::size_t k = weight.shape().h;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t H = xs.h, W = xs.w;
    Array4 out(xs.n, out_c, H, W);

    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            double* op = out.plane(n, o);
            std::fill(op, op + H * W, bias[o]);
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.plane(n, c);
                const double* wp = weight.plane(o, c);
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    const Span1 rows = valid_range(dy, H);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const double wv = wp[ky * k + kx];
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                        const Span1 cols = valid_range(dx, W);
                        for (std::size_t i = rows.lo; i < rows.hi; ++i) {
                            double* orow = op + i * W;
                            const double* xrow = xp + static_cast<std::ptrdiff_t>((i + dy) * W) + dx;
                            for (std::size_t j = cols.lo; j < cols.hi; ++j) orow[j] += wv * xrow[j];
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_backward_direct(const Array4& x, const Array4& weight, const Array4& dout,
                            Array4* dx, Array4& dweight, Array4& dbias) {
    check_conv_shapes(x, weight, dbias);
    const Shape4& xs = x.shape();
    const std::size_t out_c = weight.shape().n;
    const std::size_t k = weight.shape().h;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t H = xs.h, W = xs.w;
    require_same_shape(dout.shape(), Shape4{xs.n, out_c, H, W}, "conv2d_backward");
    require_same_shape(dweight.shape(), weight.shape(), "conv2d_backward");
    if (dx != nullptr) require_same_shape(dx->shape(), xs, "conv2d_backward");

    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            const double* gp = dout.plane(n, o);
            dbias[o] += sum(gp, H * W);
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.plane(n, c);
                double* dxp = dx != nullptr ? dx->plane(n, c) : nullptr;
                const double* wp = weight.plane(o, c);
                double* dwp = dweight.plane(o, c);
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    const Span1 rows = valid_range(dy, H);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pad;
                        const Span1 cols = valid_range(dxo, W);
                        const std::size_t len = cols.hi - cols.lo;
                        const double wv = wp[ky * k + kx];
                        double acc = 0.0;
                        for (std::size_t i = rows.lo; i < rows.hi; ++i) {
                            const double* grow = gp + i * W + cols.lo;
                            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>((i + dy) * W + cols.lo) + dxo;
                            acc += dot(grow, xp + src, len);
                            if (dxp != nullptr && wv != 0.0) {
                                double* drow = dxp + src;
                                for (std::size_t j = 0; j < len; ++j) drow[j] += wv * grow[j];
                            }
                        }
                        dwp[ky * k + kx] += acc;
                    }
                }
            }
        }
    }
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Unfolds one sample into a (inC*k*k) x (H*W) patch matrix with zero padding.
void im2col(const double* x, std::size_t channels, std::size_t H, std::size_t W, std::size_t k,
            RowMatrix& col) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    col.setZero(static_cast<Eigen::Index>(channels * k * k), static_cast<Eigen::Index>(H * W));
    for (std::size_t c = 0; c < channels; ++c) {
        const double* xp = x + c * H * W;
        for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const Span1 rows = valid_range(dy, H);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const Span1 cols = valid_range(dx, W);
                double* dst = col.row(static_cast<Eigen::Index>((c * k + ky) * k + kx)).data();
                for (std::size_t i = rows.lo; i < rows.hi; ++i) {
                    const double* src = xp + static_cast<std::ptrdiff_t>((i + dy) * W) + dx;
                    std::copy(src + cols.lo, src + cols.hi, dst + i * W + cols.lo);
                }
            }
        }
    }
}

// Scatter-adds a patch-matrix gradient back onto one sample's input gradient.
void col2im_add(const RowMatrix& col, std::size_t channels, std::size_t H, std::size_t W,
                std::size_t k, double* dx) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t c = 0; c < channels; ++c) {
        double* dp = dx + c * H * W;
        for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const Span1 rows = valid_range(dy, H);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pad;
                const Span1 cols = valid_range(dxo, W);
                const double* src = col.row(static_cast<Eigen::Index>((c * k + ky) * k + kx)).data();
                for (std::size_t i = rows.lo; i < rows.hi; ++i) {
                    double* d = dp + static_cast<std::ptrdiff_t>((i + dy) * W) + dxo;
                    for (std::size_t j = cols.lo; j < cols.hi; ++j) d[j] += src[i * W + j];
                }
            }
        }
    }
}

}  // namespace

Array4 conv2d(const Array4& x, const Array4& weight, const Array4& bias) {
    check_conv_shapes(x, weight, bias);
    const Shape4& xs = x.shape();
    const std::size_t out_c = weight.shape().n;
    const std::size_t k = weight.shape().h;
    const auto HW = static_cast<Eigen::Index>(xs.h * xs.w);
    const auto K = static_cast<Eigen::Index>(xs.c * k * k);
    Array4 out(xs.n, out_c, xs.h, xs.w);
    ConstMatMap wm(weight.values().data(), static_cast<Eigen::Index>(out_c), K);
    RowMatrix col;
    for (std::size_t n = 0; n < xs.n; ++n) {
        MatMap om(out.plane(n, 0), static_cast<Eigen::Index>(out_c), HW);
        if (k == 1) {
            om.noalias() = wm * ConstMatMap(x.plane(n, 0), K, HW);
        } else {
            im2col(x.plane(n, 0), xs.c, xs.h, xs.w, k, col);
            om.noalias() = wm * col;
        }
        for (std::size_t o = 0; o < out_c; ++o) om.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    }
    return out;
}

void conv2d_backward(const Array4& x, const Array4& weight, const Array4& dout, Array4* dx,
                     Array4& dweight, Array4& dbias) {
    check_conv_shapes(x, weight, dbias);
    const Shape4& xs = x.shape();
    const std::size_t out_c = weight.shape().n;
    const std::size_t k = weight.shape().h;
    require_same_shape(dout.shape(), Shape4{xs.n, out_c, xs.h, xs.w}, "conv2d_backward");
    require_same_shape(dweight.shape(), weight.shape(), "conv2d_backward");
    if (dx != nullptr) require_same_shape(dx->shape(), xs, "conv2d_backward");
    const auto HW = static_cast<Eigen::Index>(xs.h * xs.w);
    const auto K = static_cast<Eigen::Index>(xs.c * k * k);
    const auto OC = static_cast<Eigen::Index>(out_c);
    ConstMatMap wm(weight.values().data(), OC, K);
    MatMap dwm(dweight.values().data(), OC, K);
    RowMatrix col;
    RowMatrix dcol;
    for (std::size_t n = 0; n < xs.n; ++n) {
        ConstMatMap gm(dout.plane(n, 0), OC, HW);
        for (std::size_t o = 0; o < out_c; ++o) dbias[o] += sum(dout.plane(n, o), xs.h * xs.w);
        if (k == 1) {
            ConstMatMap xm(x.plane(n, 0), K, HW);
            dwm.noalias() += gm * xm.transpose();
            if (dx != nullptr) {
                MatMap dxm(dx->plane(n, 0), K, HW);
                dxm.noalias() += wm.transpose() * gm;
            }
        } else {
            im2col(x.plane(n, 0), xs.c, xs.h, xs.w, k, col);
            dwm.noalias() += gm * col.transpose();
            if (dx != nullptr) {
                dcol.noalias() = wm.transpose() * gm;
                col2im_add(dcol, xs.c, xs.h, xs.w, k, dx->plane(n, 0));
            }
        }
    }
}

Array4 relu(const Array4& x) {
    Array4 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

void relu_backward(const Array4& x, const Array4& dout, Array4& dx) {
    require_same_shape(x.shape(), dout.shape(), "relu_backward");
    require_same_shape(x.shape(), dx.shape(), "relu_backward");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) dx[i] += dout[i];
    }
}

PoolResult maxpool2(const Array4& x) {
    const Shape4& s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("maxpool2: odd spatial dims " + s.str());
    }
    const std::size_t oh = s.h / 2, ow = s.w / 2;
    PoolResult r{Array4(s.n, s.c, oh, ow), std::vector<std::uint32_t>(s.n * s.c * oh * ow)};
    std::size_t k = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const std::size_t base = x.offset(n, c);
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j, ++k) {
                    std::size_t best = base + (2 * i) * s.w + 2 * j;
                    const std::size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
                    for (std::size_t q : cand) {
                        if (x[q] > x[best]) best = q;
                    }
                    r.out[k] = x[best];
                    r.argmax[k] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return r;
}

void maxpool2_backward(const std::vector<std::uint32_t>& argmax, const Array4& dout, Array4& dx) {
    require(argmax.size() == dout.size(), "maxpool2_backward: argmax/gradient size mismatch");
    for (std::size_t k = 0; k < dout.size(); ++k) dx[argmax[k]] += dout[k];
}

Array4 upconv2(const Array4& x, const Array4& weight, const Array4& bias) {
    const Shape4& xs = x.shape();
    const Shape4& ws = weight.shape();
    if (ws.h != 2 || ws.w != 2) throw std::invalid_argument("upconv2: kernel must be 2x2");
    if (ws.n != xs.c) {
        throw std::invalid_argument("upconv2: channel mismatch, input has " + std::to_string(xs.c) +
                                    " channels, kernel expects " + std::to_string(ws.n));
    }
    require(bias.size() == ws.c, "upconv2: bias length must equal output channels");
    const std::size_t out_c = ws.c;
    const std::size_t H = xs.h, W = xs.w, OW = 2 * W;
    Array4 out(xs.n, out_c, 2 * H, 2 * W);
    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            double* op = out.plane(n, o);
            std::fill(op, op + 4 * H * W, bias[o]);
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.plane(n, c);
                const double* wp = weight.plane(c, o);
                for (std::size_t a = 0; a < 2; ++a) {
                    for (std::size_t i = 0; i < H; ++i) {
                        double* orow = op + (2 * i + a) * OW;
                        const double* xrow = xp + i * W;
                        const double w0 = wp[2 * a], w1 = wp[2 * a + 1];
                        for (std::size_t j = 0; j < W; ++j) {
                            orow[2 * j] += w0 * xrow[j];
                            orow[2 * j + 1] += w1 * xrow[j];
                        }
                    }
                }
            }
        }
    }
    return out;
}

void upconv2_backward(const Array4& x, const Array4& weight, const Array4& dout, Array4* dx,
                      Array4& dweight, Array4& dbias) {
    const Shape4& xs = x.shape();
    const std::size_t out_c = weight.shape().c;
    const std::size_t H = xs.h, W = xs.w, OW = 2 * W;
    require_same_shape(dout.shape(), Shape4{xs.n, out_c, 2 * H, 2 * W}, "upconv2_backward");
    require_same_shape(dweight.shape(), weight.shape(), "upconv2_backward");
    if (dx != nullptr) require_same_shape(dx->shape(), xs, "upconv2_backward");

    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            const double* gp = dout.plane(n, o);
            dbias[o] += sum(gp, 4 * H * W);
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.plane(n, c);
                double* dxp = dx != nullptr ? dx->plane(n, c) : nullptr;
                const double* wp = weight.plane(c, o);
                double* dwp = dweight.plane(c, o);
                for (std::size_t a = 0; a < 2; ++a) {
                    double acc0 = 0.0, acc1 = 0.0;
                    const double w0 = wp[2 * a], w1 = wp[2 * a + 1];
                    for (std::size_t i = 0; i < H; ++i) {
                        const double* grow = gp + (2 * i + a) * OW;
                        const double* xrow = xp + i * W;
                        for (std::size_t j = 0; j < W; ++j) {
                            acc0 += grow[2 * j] * xrow[j];
                            acc1 += grow[2 * j + 1] * xrow[j];
                        }
                        if (dxp != nullptr) {
                            double* drow = dxp + i * W;
                            for (std::size_t j = 0; j < W; ++j) {
                                drow[j] += w0 * grow[2 * j] + w1 * grow[2 * j + 1];
                            }
                        }
                    }
                    dwp[2 * a] += acc0;
                    dwp[2 * a + 1] += acc1;
                }
            }
        }
    }
}

Array4 concat(const Array4& a, const Array4& b) {
    const Shape4& as = a.shape();
    const Shape4& bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
        throw std::invalid_argument("concat: batch/spatial mismatch " + as.str() + " vs " + bs.str());
    }
    Array4 out(as.n, as.c + bs.c, as.h, as.w);
    const std::size_t P = as.plane();
    for (std::size_t n = 0; n < as.n; ++n) {
        std::copy_n(a.plane(n, 0), as.c * P, out.plane(n, 0));
        std::copy_n(b.plane(n, 0), bs.c * P, out.plane(n, as.c));
    }
    return out;
}

void concat_backward(const Array4& dout, Array4& da, Array4& db) {
    const Shape4& as = da.shape();
    const Shape4& bs = db.shape();
    require_same_shape(dout.shape(), Shape4{as.n, as.c + bs.c, as.h, as.w}, "concat_backward");
    const std::size_t P = as.plane();
    for (std::size_t n = 0; n < as.n; ++n) {
        const double* src = dout.plane(n, 0);
        double* d = da.plane(n, 0);
        for (std::size_t i = 0; i < as.c * P; ++i) d[i] += src[i];
        src = dout.plane(n, as.c);
        d = db.plane(n, 0);
        for (std::size_t i = 0; i < bs.c * P; ++i) d[i] += src[i];
    }
}

Array4 add(const Array4& a, const Array4& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Array4 out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Array4 sigmoid(const Array4& x) {
    Array4 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid_scalar(x[i]);
    return out;
}

void sigmoid_backward(const Array4& y, const Array4& dout, Array4& dx) {
    require_same_shape(y.shape(), dout.shape(), "sigmoid_backward");
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dout[i] * y[i] * (1.0 - y[i]);
}

}  // namespace wmhseg::ops
