#include <cmath>

#include "wmhseg/gradcheck.hpp"
#include "wmhseg/network.hpp"
#include "wmhseg/random.hpp"

namespace wmhseg {

namespace {

Parameter random_parameter(const std::string& id, Shape4 shape, std::uint64_t seed) {
    Parameter p(id, shape);
    p.value = random_array(shape, seed);
    return p;
}

// Readout seeds come from a separate stream so they never coincide with inputs.
template <typename Build>
GradCheckReport check_graph(std::vector<Parameter*> params, Build build, std::uint64_t seed,
                            const GradCheckOptions& options) {
    Array4 readout;
    auto loss = [&](bool with_grad) {
        Graph g;
        const NodeId head = build(g);
        if (readout.size() == 0) readout = random_array(g.value(head).shape(), seed ^ 0x9e3779b97f4a7c15ULL);
        return projection_loss(g, head, readout, with_grad);
    };
    return grad_check(params, loss, options);
}

}  // namespace

std::vector<NamedGradCheck> operator_gradchecks(std::uint64_t seed, const GradCheckOptions& options) {
    Rng rng(seed);
    auto dim = [&rng](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
    const std::size_t n = dim(1, 2), c = dim(1, 3), o = dim(1, 3);
    const std::size_t h = 2 * dim(1, 3), w = 2 * dim(1, 3);
    const Shape4 xs{n, c, h, w};
    std::vector<NamedGradCheck> out;

    for (std::size_t k : {std::size_t{3}, std::size_t{1}}) {
        Parameter x = random_parameter("x", xs, rng.next());
        Parameter wt = random_parameter("w", {o, c, k, k}, rng.next());
        Parameter b = random_parameter("b", {o, 1, 1, 1}, rng.next());
        auto r = check_graph({&x, &wt, &b}, [&](Graph& g) { return g.conv(g.input(x), wt, b); }, rng.next(), options);
        out.push_back({k == 3 ? "conv3x3" : "conv1x1", std::move(r)});
    }
    {
        Parameter x = random_parameter("x", xs, rng.next());
        // Keep inputs clear of the kink at zero.
        for (double& v : x.value.values()) v = std::copysign(0.05 + std::abs(v), v);
        auto r = check_graph({&x}, [&](Graph& g) { return g.relu(g.input(x)); }, rng.next(), options);
        out.push_back({"relu", std::move(r)});
    }
    {
        Parameter x = random_parameter("x", xs, rng.next());
        auto r = check_graph({&x}, [&](Graph& g) { return g.maxpool2(g.input(x)); }, rng.next(), options);
        out.push_back({"maxpool2", std::move(r)});
    }
    {
        Parameter x = random_parameter("x", xs, rng.next());
        Parameter wt = random_parameter("w", {c, o, 2, 2}, rng.next());
        Parameter b = random_parameter("b", {o, 1, 1, 1}, rng.next());
        auto r = check_graph({&x, &wt, &b}, [&](Graph& g) { return g.upconv2(g.input(x), wt, b); }, rng.next(), options);
        out.push_back({"upconv2", std::move(r)});
    }
    {
        Parameter a = random_parameter("a", xs, rng.next());
        Parameter b = random_parameter("b", {n, o, h, w}, rng.next());
        auto r = check_graph({&a, &b}, [&](Graph& g) { return g.concat(g.input(a), g.input(b)); }, rng.next(), options);
        out.push_back({"concat", std::move(r)});
    }
    {
        Parameter a = random_parameter("a", xs, rng.next());
        Parameter b = random_parameter("b", xs, rng.next());
        auto r = check_graph({&a, &b}, [&](Graph& g) { return g.add(g.input(a), g.input(b)); }, rng.next(), options);
        out.push_back({"add", std::move(r)});
    }
    {
        Parameter x = random_parameter("x", xs, rng.next());
        for (double& v : x.value.values()) v *= 4.0;
        auto r = check_graph({&x}, [&](Graph& g) { return g.sigmoid(g.input(x)); }, rng.next(), options);
        out.push_back({"sigmoid", std::move(r)});
    }
    return out;
}

GradCheckReport network_gradcheck(Network& net, std::size_t h, std::size_t w, std::uint64_t seed,
                                  const GradCheckOptions& options) {
    const Array4 x = random_array({1, net.spec().in_channels, h, w}, seed);
    std::vector<Parameter*> params;
    for (auto& p : net.parameters()) params.push_back(&p);
    return check_graph(
        params,
        [&](Graph& g) { return net.forward(g, g.input(x)).probabilities; },
        seed + 1, options);
}

}  // namespace wmhseg
