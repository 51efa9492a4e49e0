#include "wmhseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "wmhseg/graph.hpp"
#include "wmhseg/optimizer.hpp"
#include "wmhseg/random.hpp"

namespace wmhseg {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation_fraction must lie in (0, 1)");
    }
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (precision != "double") {
        throw std::invalid_argument("precision '" + precision + "' is not supported; use 'double'");
    }
    if (!(validation_threshold > 0.0 && validation_threshold < 1.0)) {
        throw std::invalid_argument("validation_threshold must lie in (0, 1)");
    }
}

std::string TrainHistory::loss_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < iteration_loss.size(); ++i) os << (i + 1) << ',' << iteration_loss[i] << '\n';
    return os.str();
}

std::string TrainHistory::summary_json() const {
    nlohmann::json j;
    j["iterations"] = iterations;
    j["beta"] = beta;
    j["mean_pixel_weight"] = mean_pixel_weight;
    j["final_loss"] = iteration_loss.empty() ? 0.0 : iteration_loss.back();
    j["epoch_validation_dice"] = epoch_validation_dice;
    j["train_cases"] = train_cases;
    j["validation_cases"] = validation_cases;
    return j.dump(2);
}

CaseSplit split_cases(std::size_t n_cases, double validation_fraction, std::uint64_t seed) {
    if (n_cases < 2) throw std::invalid_argument("need at least 2 cases for a train/validation split");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(n_cases);
    for (std::size_t i = 0; i < n_cases; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n_cases)));
    n_val = std::clamp<std::size_t>(n_val, 1, n_cases - 1);
    CaseSplit split;
    split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

Array4 make_batch(const std::vector<const SliceSample*>& samples) {
    if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
    const SliceSample& f = *samples.front();
    Array4 batch(samples.size(), f.channels, f.height, f.width);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const SliceSample& s = *samples[n];
        if (s.channels != f.channels || s.height != f.height || s.width != f.width) {
            throw std::invalid_argument("make_batch: samples differ in shape");
        }
        std::copy(s.image.begin(), s.image.end(), batch.plane(n, 0));
    }
    return batch;
}

double slice_dice(const Network& net, const std::vector<const SliceSample*>& slices, double threshold) {
    std::size_t inter = 0, pred = 0, truth = 0;
    for (const SliceSample* s : slices) {
        const Array4 probs = net.predict(make_batch({s}));
        for (std::size_t i = 0; i < s->label.size(); ++i) {
            const bool p = probs[i] > threshold;
            const bool t = s->label[i] != 0;
            inter += static_cast<std::size_t>(p && t);
            pred += static_cast<std::size_t>(p);
            truth += static_cast<std::size_t>(t);
        }
    }
    if (pred + truth == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(pred + truth);
}

TrainResult train(const NetworkSpec& spec, const std::vector<TrainingCase>& cases,
                  const TrainConfig& cfg, const LossConfig& loss_in) {
    cfg.validate();
    spec.validate();
    if (cases.empty()) throw std::invalid_argument("train: empty dataset");

    // Independent streams for the split, the initial weights and the slice order.
    Rng master(cfg.seed);
    const std::uint64_t split_seed = master.next();
    const std::uint64_t init_seed = master.next();
    const std::uint64_t order_seed = master.next();

    const CaseSplit split = split_cases(cases.size(), cfg.validation_fraction, split_seed);

    TrainHistory history;
    std::vector<const SliceSample*> train_slices, val_slices;
    for (std::size_t i : split.train) {
        history.train_cases.push_back(cases[i].id);
        for (const auto& s : cases[i].slices) train_slices.push_back(&s);
    }
    for (std::size_t i : split.validation) {
        history.validation_cases.push_back(cases[i].id);
        for (const auto& s : cases[i].slices) val_slices.push_back(&s);
    }
    if (train_slices.empty()) throw std::invalid_argument("train: training split has no slices");
    if (val_slices.empty()) throw std::invalid_argument("train: validation split has no slices");
    for (const SliceSample* s : train_slices) {
        if (s->channels != spec.in_channels) {
            throw std::invalid_argument("train: sample channels do not match network input");
        }
    }

    std::vector<std::vector<std::uint8_t>> labels;
    labels.reserve(train_slices.size());
    for (const SliceSample* s : train_slices) labels.push_back(s->label);
    const double background_fraction = compute_beta(labels);

    LossConfig loss = loss_in;
    if (cfg.auto_beta) loss.beta = background_fraction;
    loss.validate();
    history.beta = loss.beta;

    // Expected class weight of one training pixel. Dividing by this constant
    // (times the batch pixel count) keeps the step size independent of how
    // many foreground pixels a particular batch happens to hold.
    double mean_weight = loss.foreground_weight() * (1.0 - background_fraction) +
                         loss.background_weight() * background_fraction;
    if (!(mean_weight > 0.0)) mean_weight = 1.0;
    history.mean_pixel_weight = mean_weight;

    Network net(spec, init_seed);
    SgdMomentum opt(cfg.learning_rate, cfg.momentum);
    Rng order_rng(order_seed);
    const std::size_t factor = spec.downsampling_factor();

    std::vector<std::size_t> order(train_slices.size());
    bool done = false;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        if (cfg.max_iterations != 0 && history.iterations >= cfg.max_iterations) break;
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            if (cfg.max_iterations != 0 && history.iterations >= cfg.max_iterations) {
                done = true;
                break;
            }
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<SliceSample> batch_samples;
            batch_samples.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const SliceSample& s = *train_slices[order[k]];
                batch_samples.push_back(cfg.augmentation ? augment(s, order_rng) : s);
            }
            std::vector<const SliceSample*> ptrs;
            for (const auto& s : batch_samples) ptrs.push_back(&s);
            const Array4 x = make_batch(ptrs);
            const Shape4 xs = x.shape();

            Graph g;
            g.set_skip_constant_input_grads(true);
            const NodeId in = g.input(reflect_pad(x, factor));
            const auto out = net.forward(g, in);
            const Array4 probs = crop(g.value(out.probabilities), xs.h, xs.w);

            std::vector<std::uint8_t> batch_labels;
            batch_labels.reserve(probs.size());
            for (const auto& s : batch_samples) batch_labels.insert(batch_labels.end(), s.label.begin(), s.label.end());

            LossResult lr = weighted_bce(probs.values(), batch_labels, loss);
            const double norm = mean_weight * static_cast<double>(batch_labels.size());
            const double batch_loss = lr.loss / norm;
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: non-finite loss at iteration " +
                                         std::to_string(history.iterations + 1) + " (epoch " +
                                         std::to_string(epoch + 1) + ")");
            }
            for (double& v : lr.grad_logits) v /= norm;
            const Shape4 ps{xs.n, 1, xs.h, xs.w};
            const Array4 seed = embed(Array4(ps, std::move(lr.grad_logits)),
                                      g.value(out.logits).shape().h, g.value(out.logits).shape().w);
            g.backward(out.logits, seed);
            opt.step(net.parameters());

            history.iteration_loss.push_back(batch_loss);
            ++history.iterations;
        }
        history.epoch_validation_dice.push_back(slice_dice(net, val_slices, cfg.validation_threshold));
    }
    return TrainResult{std::move(net), std::move(history)};
}

}  // namespace wmhseg
