#include "wmhseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmhseg {

const char* to_string(WeightPlacement w) { return w == WeightPlacement::Paper ? "paper" : "swapped"; }

WeightPlacement weight_placement_from_string(const std::string& s) {
    if (s == "paper") return WeightPlacement::Paper;
    if (s == "swapped") return WeightPlacement::Swapped;
    throw std::invalid_argument("weight placement must be 'paper' or 'swapped', got '" + s + "'");
}

void LossConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 0.5)");
}

double compute_beta(std::span<const std::vector<std::uint8_t>> label_slices) {
    if (label_slices.empty()) throw std::invalid_argument("compute_beta: empty dataset");
    double total = 0.0;
    for (const auto& slice : label_slices) {
        if (slice.empty()) throw std::invalid_argument("compute_beta: empty slice");
        const auto background = std::count(slice.begin(), slice.end(), std::uint8_t{0});
        total += static_cast<double>(background) / static_cast<double>(slice.size());
    }
    return total / static_cast<double>(label_slices.size());
}

LossResult weighted_bce(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        const LossConfig& cfg) {
    cfg.validate();
    if (probabilities.size() != labels.size()) {
        throw std::invalid_argument("weighted_bce: prediction and label sizes differ");
    }
    const double w_fg = cfg.foreground_weight();
    const double w_bg = cfg.background_weight();
    LossResult r;
    r.grad_logits.resize(probabilities.size());
    double fg_sum = 0.0;
    double bg_sum = 0.0;
    for (std::size_t j = 0; j < probabilities.size(); ++j) {
        const double p = probabilities[j];
        const double pc = std::clamp(p, cfg.epsilon, 1.0 - cfg.epsilon);
        if (labels[j] != 0) {
            fg_sum += std::log(pc);
            r.grad_logits[j] = w_fg * (p - 1.0);
            r.weight_sum += w_fg;
        } else {
            bg_sum += std::log(1.0 - pc);
            r.grad_logits[j] = w_bg * p;
            r.weight_sum += w_bg;
        }
    }
    r.loss = -w_fg * fg_sum - w_bg * bg_sum;
    return r;
}

}  // namespace wmhseg
