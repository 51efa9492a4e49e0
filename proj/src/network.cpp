#include "wmhseg/network.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "wmhseg/ops.hpp"
#include "wmhseg/random.hpp"

namespace wmhseg {

const char* to_string(BlockKind kind) {
    return kind == BlockKind::Residual ? "residual" : "plain";
}

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "residual") return BlockKind::Residual;
    if (s == "plain") return BlockKind::Plain;
    throw std::invalid_argument("unknown block kind '" + s + "'");
}

void ResidualBlockSpec::validate() const {
    if (in_channels == 0 || out_channels == 0) {
        throw std::invalid_argument("block channel counts must be positive");
    }
    if (kind == BlockKind::Residual && !projection && in_channels != out_channels) {
        throw std::invalid_argument("identity skip requires in_channels == out_channels");
    }
}

BlockParameters add_block_parameters(ParameterSet& set, const std::string& prefix,
                                     const ResidualBlockSpec& spec) {
    spec.validate();
    const std::size_t in = spec.in_channels, out = spec.out_channels;
    set.add(prefix + ".conv1.w", {out, in, 3, 3});
    set.add(prefix + ".conv1.b", {out, 1, 1, 1});
    set.add(prefix + ".conv2.w", {out, out, 3, 3});
    set.add(prefix + ".conv2.b", {out, 1, 1, 1});
    const bool projection = spec.kind == BlockKind::Residual && spec.projection;
    if (projection) {
        set.add(prefix + ".proj.w", {out, in, 1, 1});
        set.add(prefix + ".proj.b", {out, 1, 1, 1});
    }
    // Resolve addresses only after every add, since adding may move elements.
    BlockParameters p;
    p.conv1_w = set.find(prefix + ".conv1.w");
    p.conv1_b = set.find(prefix + ".conv1.b");
    p.conv2_w = set.find(prefix + ".conv2.w");
    p.conv2_b = set.find(prefix + ".conv2.b");
    if (projection) {
        p.proj_w = set.find(prefix + ".proj.w");
        p.proj_b = set.find(prefix + ".proj.b");
    }
    return p;
}

namespace {

// The topology is written once against two executors: an eager one that
// evaluates immediately and a taped one that records for backward.
struct EagerExec {
    using Handle = Array4;
    Handle conv(const Handle& x, const Parameter& w, const Parameter& b) {
        return ops::conv2d(x, w.value, b.value);
    }
    Handle relu(const Handle& x) { return ops::relu(x); }
    Handle pool(const Handle& x) { return ops::maxpool2(x).out; }
    Handle upconv(const Handle& x, const Parameter& w, const Parameter& b) {
        return ops::upconv2(x, w.value, b.value);
    }
    Handle concat(const Handle& a, const Handle& b) { return ops::concat(a, b); }
    Handle add(const Handle& a, const Handle& b) { return ops::add(a, b); }
    Handle sigmoid(const Handle& x) { return ops::sigmoid(x); }
};

struct TapeExec {
    using Handle = NodeId;
    Graph& g;
    Handle conv(Handle x, Parameter& w, Parameter& b) { return g.conv(x, w, b); }
    Handle relu(Handle x) { return g.relu(x); }
    Handle pool(Handle x) { return g.maxpool2(x); }
    Handle upconv(Handle x, Parameter& w, Parameter& b) { return g.upconv2(x, w, b); }
    Handle concat(Handle a, Handle b) { return g.concat(a, b); }
    Handle add(Handle a, Handle b) { return g.add(a, b); }
    Handle sigmoid(Handle x) { return g.sigmoid(x); }
};

template <typename Exec>
typename Exec::Handle run_block(Exec& ex, const typename Exec::Handle& x,
                                const ResidualBlockSpec& spec, const BlockParameters& p) {
    auto h = ex.conv(x, *p.conv1_w, *p.conv1_b);
    h = ex.relu(h);
    h = ex.conv(h, *p.conv2_w, *p.conv2_b);
    if (spec.kind == BlockKind::Plain) return ex.relu(h);
    auto skip = spec.projection ? ex.conv(x, *p.proj_w, *p.proj_b) : x;
    auto sum = ex.add(skip, h);
    return spec.post_add_relu ? ex.relu(sum) : sum;
}

void check_block_input(const Shape4& s, const ResidualBlockSpec& spec) {
    if (s.c != spec.in_channels) {
        throw std::invalid_argument("residual block expects " + std::to_string(spec.in_channels) +
                                    " channels, got " + std::to_string(s.c));
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void he_fill(Array4& a, std::size_t fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std_dev * rng.normal();
}

// Reflect index into [0, n) with edge samples not repeated.
std::size_t reflect_index(std::size_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::size_t period = 2 * (n - 1);
    std::size_t r = i % period;
    return r < n ? r : period - r;
}

}  // namespace

Array4 residual_block_forward(const Array4& x, const ResidualBlockSpec& spec,
                              const BlockParameters& params) {
    spec.validate();
    check_block_input(x.shape(), spec);
    EagerExec ex;
    return run_block(ex, x, spec, params);
}

NodeId residual_block_forward(Graph& graph, NodeId x, const ResidualBlockSpec& spec,
                              const BlockParameters& params) {
    spec.validate();
    check_block_input(graph.value(x).shape(), spec);
    TapeExec ex{graph};
    return run_block(ex, x, spec, params);
}

void NetworkSpec::validate() const {
    if (in_channels == 0 || base_width == 0 || depth == 0 || out_channels == 0) {
        throw std::invalid_argument("network spec: in_channels, base_width, depth and "
                                    "out_channels must be >= 1");
    }
    if (depth > 12) throw std::invalid_argument("network spec: depth too large");
}

std::vector<std::size_t> NetworkSpec::stage_channels() const {
    std::vector<std::size_t> c(depth);
    for (std::size_t s = 0; s < depth; ++s) c[s] = base_width << s;
    return c;
}

std::size_t NetworkSpec::bottleneck_channels() const { return base_width << depth; }

ResidualBlockSpec NetworkSpec::encoder_block(std::size_t stage) const {
    const std::size_t in = stage == 0 ? in_channels : base_width << (stage - 1);
    const std::size_t out = base_width << stage;
    return ResidualBlockSpec{in, out, block, true, post_add_relu};
}

ResidualBlockSpec NetworkSpec::decoder_block(std::size_t stage) const {
    const std::size_t out = base_width << stage;
    return ResidualBlockSpec{2 * out, out, block, true, post_add_relu};
}

std::string NetworkSpec::to_json() const {
    nlohmann::json j{{"name", name},
                     {"in_channels", in_channels},
                     {"base_width", base_width},
                     {"depth", depth},
                     {"block", to_string(block)},
                     {"out_channels", out_channels},
                     {"post_add_relu", post_add_relu}};
    return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NetworkSpec s;
    s.name = j.at("name").get<std::string>();
    s.in_channels = j.at("in_channels").get<std::size_t>();
    s.base_width = j.at("base_width").get<std::size_t>();
    s.depth = j.at("depth").get<std::size_t>();
    s.block = block_kind_from_string(j.at("block").get<std::string>());
    s.out_channels = j.at("out_channels").get<std::size_t>();
    s.post_add_relu = j.at("post_add_relu").get<bool>();
    s.validate();
    return s;
}

NetworkSpec build_resunet(std::size_t in_channels, std::size_t base_width, std::size_t depth) {
    NetworkSpec s{"resunet", in_channels, base_width, depth, BlockKind::Residual, 1, true};
    s.validate();
    return s;
}

NetworkSpec build_plain_unet(std::size_t in_channels, std::size_t base_width, std::size_t depth) {
    NetworkSpec s{"unet", in_channels, base_width, depth, BlockKind::Plain, 1, true};
    s.validate();
    return s;
}

NetworkSpec build_trimmed_unet(std::size_t in_channels, std::size_t base_width, std::size_t depth) {
    NetworkSpec s{"trimmed_unet", in_channels, base_width, depth, BlockKind::Plain, 1, true};
    s.validate();
    return s;
}

Array4 reflect_pad(const Array4& x, std::size_t multiple) {
    const Shape4& s = x.shape();
    const std::size_t h = (s.h + multiple - 1) / multiple * multiple;
    const std::size_t w = (s.w + multiple - 1) / multiple * multiple;
    if (h == s.h && w == s.w) return x;
    Array4 out(s.n, s.c, h, w);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < h; ++i) {
                const std::size_t si = reflect_index(i, s.h);
                for (std::size_t j = 0; j < w; ++j) {
                    out.at(n, c, i, j) = x.at(n, c, si, reflect_index(j, s.w));
                }
            }
        }
    }
    return out;
}

Array4 crop(const Array4& x, std::size_t h, std::size_t w) {
    const Shape4& s = x.shape();
    if (h > s.h || w > s.w) throw std::invalid_argument("crop larger than input");
    if (h == s.h && w == s.w) return x;
    Array4 out(s.n, s.c, h, w);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) out.at(n, c, i, j) = x.at(n, c, i, j);
    return out;
}

Array4 embed(const Array4& x, std::size_t h, std::size_t w) {
    const Shape4& s = x.shape();
    if (h < s.h || w < s.w) throw std::invalid_argument("embed target smaller than input");
    if (h == s.h && w == s.w) return x;
    Array4 out(s.n, s.c, h, w);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < s.h; ++i)
                for (std::size_t j = 0; j < s.w; ++j) out.at(n, c, i, j) = x.at(n, c, i, j);
    return out;
}

Network::Network(NetworkSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t s = 0; s < spec_.depth; ++s) {
        add_block_parameters(params_, "enc" + std::to_string(s), spec_.encoder_block(s));
    }
    add_block_parameters(params_, "bottleneck", spec_.encoder_block(spec_.depth));
    for (std::size_t s = spec_.depth; s-- > 0;) {
        const std::size_t in = spec_.base_width << (s + 1);
        const std::size_t out = spec_.base_width << s;
        params_.add("up" + std::to_string(s) + ".w", {in, out, 2, 2});
        params_.add("up" + std::to_string(s) + ".b", {out, 1, 1, 1});
        add_block_parameters(params_, "dec" + std::to_string(s), spec_.decoder_block(s));
    }
    params_.add("head.w", {spec_.out_channels, spec_.base_width, 1, 1});
    params_.add("head.b", {spec_.out_channels, 1, 1, 1});

    Rng rng(init_seed);
    for (auto& p : params_) {
        const Shape4& sh = p.value.shape();
        const bool is_bias = p.id.size() >= 2 && p.id.compare(p.id.size() - 2, 2, ".b") == 0;
        if (is_bias) continue;
        const bool is_upconv = p.id.rfind("up", 0) == 0;
        // upconv weights are [in, out, 2, 2]; each output pixel sees in inputs.
        const std::size_t fan_in = is_upconv ? sh.n : sh.c * sh.h * sh.w;
        he_fill(p.value, fan_in, rng);
        // The two summands of a residual addition each get half the He
        // variance, so the sum keeps it and depth does not inflate activations.
        if (spec_.block == BlockKind::Residual && (ends_with(p.id, ".conv2.w") || ends_with(p.id, ".proj.w"))) {
            for (double& v : p.value.values()) v *= std::sqrt(0.5);
        }
    }
    bind();
}

Network::Network(NetworkSpec spec, ParameterSet params)
    : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    const Network reference(spec_, std::uint64_t{0});
    if (reference.params_.size() != params_.size()) {
        throw std::invalid_argument("parameter set does not match network spec (count)");
    }
    for (const auto& ref : reference.params_) {
        const Parameter* p = params_.find(ref.id);
        if (p == nullptr || !(p->value.shape() == ref.value.shape())) {
            throw std::invalid_argument("parameter set does not match network spec at " + ref.id);
        }
    }
    bind();
}

Network::Network(const Network& other) : spec_(other.spec_), params_(other.params_) { bind(); }

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        spec_ = other.spec_;
        params_ = other.params_;
        bind();
    }
    return *this;
}

void Network::bind() {
    auto get = [this](const std::string& id) -> Parameter* {
        Parameter* p = params_.find(id);
        if (p == nullptr) throw std::invalid_argument("missing parameter " + id);
        return p;
    };
    auto block = [&](const std::string& prefix, const ResidualBlockSpec& bs) {
        BlockParameters b;
        b.conv1_w = get(prefix + ".conv1.w");
        b.conv1_b = get(prefix + ".conv1.b");
        b.conv2_w = get(prefix + ".conv2.w");
        b.conv2_b = get(prefix + ".conv2.b");
        if (bs.kind == BlockKind::Residual && bs.projection) {
            b.proj_w = get(prefix + ".proj.w");
            b.proj_b = get(prefix + ".proj.b");
        }
        return b;
    };
    encoder_.clear();
    decoder_.assign(spec_.depth, {});
    upconv_.assign(spec_.depth, {nullptr, nullptr});
    for (std::size_t s = 0; s < spec_.depth; ++s) {
        encoder_.push_back(block("enc" + std::to_string(s), spec_.encoder_block(s)));
        decoder_[s] = block("dec" + std::to_string(s), spec_.decoder_block(s));
        upconv_[s] = {get("up" + std::to_string(s) + ".w"), get("up" + std::to_string(s) + ".b")};
    }
    bottleneck_ = block("bottleneck", spec_.encoder_block(spec_.depth));
    head_w_ = get("head.w");
    head_b_ = get("head.b");
}

namespace {

template <typename Exec, typename Net>
std::pair<typename Exec::Handle, typename Exec::Handle> run_network(
    Exec& ex, typename Exec::Handle x, const NetworkSpec& spec,
    const std::vector<BlockParameters>& encoder, const BlockParameters& bottleneck,
    const std::vector<BlockParameters>& decoder,
    const std::vector<std::pair<Parameter*, Parameter*>>& upconv, const Net& head) {
    std::vector<typename Exec::Handle> skips;
    skips.reserve(spec.depth);
    for (std::size_t s = 0; s < spec.depth; ++s) {
        x = run_block(ex, x, spec.encoder_block(s), encoder[s]);
        skips.push_back(x);
        x = ex.pool(x);
    }
    x = run_block(ex, x, spec.encoder_block(spec.depth), bottleneck);
    for (std::size_t s = spec.depth; s-- > 0;) {
        auto up = ex.upconv(x, *upconv[s].first, *upconv[s].second);
        x = ex.concat(skips[s], up);
        skips.pop_back();
        x = run_block(ex, x, spec.decoder_block(s), decoder[s]);
    }
    auto logits = ex.conv(x, *head.first, *head.second);
    auto probs = ex.sigmoid(logits);
    return {logits, probs};
}

void check_network_input(const Shape4& s, const NetworkSpec& spec, bool require_divisible) {
    if (s.c != spec.in_channels) {
        throw std::invalid_argument("network expects " + std::to_string(spec.in_channels) +
                                    " input channels, got " + std::to_string(s.c));
    }
    const std::size_t f = spec.downsampling_factor();
    if (require_divisible && (s.h % f != 0 || s.w % f != 0)) {
        throw std::invalid_argument("spatial dims " + s.str() + " not divisible by " +
                                    std::to_string(f));
    }
}

}  // namespace

Network::Outputs Network::forward(Graph& graph, NodeId input) {
    check_network_input(graph.value(input).shape(), spec_, true);
    TapeExec ex{graph};
    auto [logits, probs] = run_network(ex, input, spec_, encoder_, bottleneck_, decoder_, upconv_,
                                       std::pair<Parameter*, Parameter*>{head_w_, head_b_});
    return {logits, probs};
}

Array4 Network::predict(const Array4& batch) const {
    check_network_input(batch.shape(), spec_, false);
    const Shape4 s = batch.shape();
    EagerExec ex;
    auto padded = reflect_pad(batch, spec_.downsampling_factor());
    auto [logits, probs] = run_network(ex, std::move(padded), spec_, encoder_, bottleneck_,
                                       decoder_, upconv_,
                                       std::pair<Parameter*, Parameter*>{head_w_, head_b_});
    return crop(probs, s.h, s.w);
}

Array4 network_forward(const Network& net, const Array4& batch) { return net.predict(batch); }

}  // namespace wmhseg
