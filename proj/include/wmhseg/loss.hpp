#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wmhseg {

/// Which class the global weight beta multiplies.
///   Paper:   -beta * sum_{y=1} log p  - (1 - beta) * sum_{y=0} log(1 - p)
///   Swapped: -(1 - beta) * sum_{y=1} log p  - beta * sum_{y=0} log(1 - p)
enum class WeightPlacement { Paper, Swapped };

const char* to_string(WeightPlacement w);
WeightPlacement weight_placement_from_string(const std::string& s);

struct LossConfig {
    double beta = 0.5;
    /// Probabilities are clamped to [epsilon, 1 - epsilon] before the logs.
    double epsilon = 1e-7;
    WeightPlacement placement = WeightPlacement::Paper;

    void validate() const;
    double foreground_weight() const { return placement == WeightPlacement::Paper ? beta : 1.0 - beta; }
    double background_weight() const { return placement == WeightPlacement::Paper ? 1.0 - beta : beta; }
};

/// Mean over slices of (background pixels / all pixels). Throws on an empty set.
double compute_beta(std::span<const std::vector<std::uint8_t>> label_slices);

struct LossResult {
    double loss = 0.0;
    /// d loss / d logit for every pixel, in closed form:
    /// foreground: w_fg * (p - 1); background: w_bg * p.
    std::vector<double> grad_logits;
    /// Sum of per-pixel class weights, used to normalize a batch.
    double weight_sum = 0.0;
};

/// Class-weighted binary cross-entropy summed over pixels. probabilities and
/// labels must have equal length; labels are 0/1.
LossResult weighted_bce(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        const LossConfig& cfg);

}  // namespace wmhseg
