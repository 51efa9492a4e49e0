#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wmhseg/graph.hpp"
#include "wmhseg/parameter.hpp"

namespace wmhseg {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Relative errors use max(|analytic|, |numeric|, denominator_floor).
    double denominator_floor = 1e-6;
    /// Parameters with more elements than this are checked on a seeded random
    /// subsample of that size. 0 checks every element.
    std::size_t max_elements_per_parameter = 0;
    std::uint64_t seed = 0;
};

struct ParameterCheck {
    std::string id;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<ParameterCheck> entries;
    double max_rel_error = 0.0;
    bool pass() const;
};

/// Evaluates the scalar loss. When with_grad is true it must also run
/// backward, accumulating into the parameters' grad arrays (grad_check zeroes
/// them beforehand).
using LossFunction = std::function<double(bool with_grad)>;

/// Compares analytic gradients against central differences
/// (f(w+h) - f(w-h)) / 2h for each element of each parameter.
GradCheckReport grad_check(std::span<Parameter* const> params, const LossFunction& loss,
                           const GradCheckOptions& options = {});

/// Fixed linear readout sum(r * out) used as a scalar loss head. Seeds the
/// backward pass with r when with_grad is set.
double projection_loss(Graph& graph, NodeId head, const Array4& r, bool with_grad);

/// Deterministic uniform(-1, 1) filler for test tensors.
Array4 random_array(Shape4 shape, std::uint64_t seed, double scale = 1.0);

struct NamedGradCheck {
    std::string name;
    GradCheckReport report;
};

/// One check per operator kind (conv3x3, conv1x1, relu, maxpool2, upconv2,
/// concat, add, sigmoid) on shapes drawn from `seed`. Inputs are checked as
/// parameters alongside any weights.
std::vector<NamedGradCheck> operator_gradchecks(std::uint64_t seed, const GradCheckOptions& options = {});

class Network;
/// Checks every parameter of `net` under a random readout of its probability
/// map on a random (1, in_channels, h, w) input.
GradCheckReport network_gradcheck(Network& net, std::size_t h, std::size_t w, std::uint64_t seed,
                                  const GradCheckOptions& options = {});

}  // namespace wmhseg
