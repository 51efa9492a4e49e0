#pragma once

#include <string>
#include <vector>

#include "wmhseg/metrics.hpp"
#include "wmhseg/network.hpp"
#include "wmhseg/phantom.hpp"
#include "wmhseg/pipeline.hpp"
#include "wmhseg/training.hpp"

namespace wmhseg {

/// White-matter network: trimmed plain U-Net on T1.
NetworkSpec wm_network_spec(std::size_t base_width);
/// WMH network on T1 + FLAIR; Residual gives the ResU-Net, Plain the U-Net baseline.
NetworkSpec wmh_network_spec(std::size_t base_width, BlockKind block, std::size_t depth = 4);

TrainResult train_wm_stage(const std::vector<PhantomCase>& cases, const NetworkSpec& spec,
                           const TrainConfig& train, const LossConfig& loss);
TrainResult train_wmh_stage(const std::vector<PhantomCase>& cases, const NetworkSpec& spec,
                            const TrainConfig& train, const LossConfig& loss, const PipelineConfig& pipeline);

/// Cases whose id appears in `ids`, in the order of `cases`.
std::vector<const PhantomCase*> select_cases(const std::vector<PhantomCase>& cases,
                                             const std::vector<std::string>& ids);

/// Pooled Dice of a set of mask pairs (sums of overlaps and sizes).
double pooled_dice(const std::vector<BinaryMask3D>& pred, const std::vector<BinaryMask3D>& truth);

/// Settings for the plain-vs-residual comparison.
struct AblationConfig {
    TrainConfig train;
    LossConfig loss;
    PipelineConfig pipeline;
    std::size_t base_width = 4;
    std::size_t depth = 4;
};

struct AblationVariant {
    std::string name;
    NetworkSpec spec;
    TrainHistory history;
    /// Pooled Dice over the validation cases' volumes.
    double validation_dice = 0.0;
    std::vector<CaseMetrics> cases;
    TeamSummary summary;
    std::vector<std::uint8_t> checkpoint;
};

struct AblationReport {
    std::vector<std::string> validation_cases;
    std::vector<AblationVariant> variants;

    const AblationVariant& variant(const std::string& name) const;
    std::string to_json() const;
};

/// Trains the plain U-Net and the ResU-Net for the WMH stage with identical
/// seeds and settings, then segments the validation cases of the shared
/// split. The white-matter mask for confinement and normalisation is the
/// dilated truth, so the comparison isolates the WMH network.
AblationReport run_ablation(const std::vector<PhantomCase>& cases, const AblationConfig& cfg);

}  // namespace wmhseg
