#pragma once

// Forward and backward kernels for the fixed operator set. Backward functions
// accumulate (+=) into the gradient arrays they are handed, so callers can
// sum contributions from several consumers of the same tensor.

#include <cstdint>
#include <utility>
#include <vector>

#include "wmhseg/array4.hpp"

namespace wmhseg::ops {

/// Zero-padded "same" convolution, stride 1. weight is [outC, inC, k, k] with
/// k in {1, 3}; bias is [outC, 1, 1, 1].
Array4 conv2d(const Array4& x, const Array4& weight, const Array4& bias);
/// dx may be null when the input gradient is not needed.
void conv2d_backward(const Array4& x, const Array4& weight, const Array4& dout, Array4* dx,
                     Array4& dweight, Array4& dbias);

/// Direct-loop versions of the convolution kernels; slower, kept as an
/// independent reference for the GEMM-based path above.
Array4 conv2d_direct(const Array4& x, const Array4& weight, const Array4& bias);
void conv2d_backward_direct(const Array4& x, const Array4& weight, const Array4& dout,
                            Array4* dx, Array4& dweight, Array4& dbias);

Array4 relu(const Array4& x);
/// Passes dout where x > 0.
void relu_backward(const Array4& x, const Array4& dout, Array4& dx);

struct PoolResult {
    Array4 out;
    /// Flat input index of each output's winning element.
    std::vector<std::uint32_t> argmax;
};
/// 2x2 max pooling, stride 2. Ties go to the first element in row-major order.
PoolResult maxpool2(const Array4& x);
void maxpool2_backward(const std::vector<std::uint32_t>& argmax, const Array4& dout, Array4& dx);

/// Stride-2 transposed convolution with a 2x2 kernel. weight is
/// [inC, outC, 2, 2]; bias is [outC, 1, 1, 1].
Array4 upconv2(const Array4& x, const Array4& weight, const Array4& bias);
void upconv2_backward(const Array4& x, const Array4& weight, const Array4& dout, Array4* dx,
                      Array4& dweight, Array4& dbias);

/// Channel concatenation; a occupies the leading channels.
Array4 concat(const Array4& a, const Array4& b);
void concat_backward(const Array4& dout, Array4& da, Array4& db);

Array4 add(const Array4& a, const Array4& b);

Array4 sigmoid(const Array4& x);
/// Uses the forward output y: dx += dout * y * (1 - y).
void sigmoid_backward(const Array4& y, const Array4& dout, Array4& dx);

double sigmoid_scalar(double x);

}  // namespace wmhseg::ops
