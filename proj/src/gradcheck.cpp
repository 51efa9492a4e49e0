#include "wmhseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wmhseg/random.hpp"

namespace wmhseg {

bool GradCheckReport::pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const ParameterCheck& c) { return c.pass; });
}

GradCheckReport grad_check(std::span<Parameter* const> params, const LossFunction& loss,
                           const GradCheckOptions& options) {
    GradCheckReport report;
    if (params.empty()) return report;

    for (Parameter* p : params) p->zero_grad();
    loss(true);
    std::vector<Array4> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    Rng rng(options.seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        std::vector<std::size_t> indices(p.value.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (options.max_elements_per_parameter != 0 &&
            indices.size() > options.max_elements_per_parameter) {
            rng.shuffle(indices);
            indices.resize(options.max_elements_per_parameter);
            std::sort(indices.begin(), indices.end());
        }

        ParameterCheck check{p.id, indices.size(), 0.0, true};
        for (std::size_t idx : indices) {
            const double original = p.value[idx];
            p.value[idx] = original + options.step;
            const double up = loss(false);
            p.value[idx] = original - options.step;
            const double down = loss(false);
            p.value[idx] = original;

            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic[pi][idx];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
            const double rel = std::abs(a - numeric) / denom;
            check.max_rel_error = std::max(check.max_rel_error, rel);
        }
        check.pass = check.max_rel_error <= options.tolerance;
        report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
        report.entries.push_back(std::move(check));
    }
    return report;
}

double projection_loss(Graph& graph, NodeId head, const Array4& r, bool with_grad) {
    const Array4& out = graph.value(head);
    if (!(out.shape() == r.shape())) {
        throw std::invalid_argument("projection_loss: readout shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    if (with_grad) graph.backward(head, r);
    return s;
}

Array4 random_array(Shape4 shape, std::uint64_t seed, double scale) {
    Rng rng(seed);
    Array4 a(shape);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = scale * rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace wmhseg
