#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmhseg/loss.hpp"
#include "wmhseg/network.hpp"
#include "wmhseg/preprocess.hpp"

namespace wmhseg {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t epochs = 4;
    std::uint64_t seed = 1;
    double validation_fraction = 0.15;
    bool augmentation = true;
    std::size_t batch_size = 4;
    /// Only "double" is implemented.
    std::string precision = "double";
    /// Hard cap on optimizer steps across all epochs; 0 means no cap.
    std::size_t max_iterations = 0;
    /// Recompute beta from the training split; otherwise LossConfig::beta is used.
    bool auto_beta = true;
    /// Probability threshold for the validation Dice.
    double validation_threshold = 0.5;

    void validate() const;
};

/// One subject's axial slices, all with identical dims.
struct TrainingCase {
    std::string id;
    std::vector<SliceSample> slices;
};

struct TrainHistory {
    std::vector<double> iteration_loss;
    std::vector<double> epoch_validation_dice;
    std::vector<std::string> train_cases;
    std::vector<std::string> validation_cases;
    double beta = 0.0;
    /// Expected class weight per training pixel; the batch loss normaliser.
    double mean_pixel_weight = 0.0;
    std::size_t iterations = 0;

    /// "iteration,loss" rows, 1-based iteration numbers.
    std::string loss_csv() const;
    std::string summary_json() const;
};

struct TrainResult {
    Network network;
    TrainHistory history;
};

/// Case-level split: a seeded permutation of case indices, the first
/// round(fraction * n) clamped to [1, n - 1] go to validation. Both halves
/// are returned in ascending order. Throws when n < 2.
struct CaseSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};
CaseSplit split_cases(std::size_t n_cases, double validation_fraction, std::uint64_t seed);

/// Pooled Dice over every pixel of the given slices after thresholding the
/// network output. Returns 1 when prediction and labels are both empty.
double slice_dice(const Network& net, const std::vector<const SliceSample*>& slices,
                  double threshold);

/// Stacks samples into an (n, c, h, w) batch. All samples must share dims.
Array4 make_batch(const std::vector<const SliceSample*>& samples);

/// SGD training over shuffled axial slices. The batch loss is the weighted
/// cross-entropy divided by (batch pixels * expected per-pixel class weight of
/// the training split). Throws
/// std::runtime_error on a non-finite loss.
TrainResult train(const NetworkSpec& spec, const std::vector<TrainingCase>& cases,
                  const TrainConfig& cfg, const LossConfig& loss);

}  // namespace wmhseg
