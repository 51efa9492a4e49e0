#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmhseg/metrics.hpp"
#include "wmhseg/morphology.hpp"
#include "wmhseg/network.hpp"
#include "wmhseg/phantom.hpp"
#include "wmhseg/training.hpp"
#include "wmhseg/volume.hpp"

namespace wmhseg {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    double threshold = 0.5;
    std::size_t dilation_radius = 2;
    Connectivity wm_connectivity = Connectivity::C6;
    bool confinement = true;
    /// Used only for the lesion-wise scores in the report.
    Connectivity lesion_connectivity = Connectivity::C26;

    void validate() const;
};

struct CaseInput {
    std::string id;
    Volume3D t1;
    Volume3D flair;
    std::optional<BinaryMask3D> wmh_truth;

    void validate() const;
};

/// Network output for every axial slice, stacked back into a volume on the
/// grid of the first channel.
Volume3D predict_volume(const Network& net, const std::vector<const Volume3D*>& channels);

/// White-matter input: T1 rescaled to [0, 1] over the whole volume.
Volume3D white_matter_input(const Volume3D& t1);

/// Threshold, keep the largest component, dilate. Throws PipelineError when
/// nothing survives the threshold. `thresholded` receives the mask before
/// refinement when non-null.
BinaryMask3D segment_white_matter(const Volume3D& t1, const Network& wm_model, const PipelineConfig& cfg,
                                  BinaryMask3D* thresholded = nullptr);

/// T1 and FLAIR rescaled over the white-matter mask, as network channels.
std::pair<Volume3D, Volume3D> wmh_inputs(const Volume3D& t1, const Volume3D& flair, const BinaryMask3D& wm_mask);

/// Thresholded WMH prediction; with confinement on, voxels outside wm_mask
/// are cleared. `unconfined` receives the raw thresholded mask when non-null.
BinaryMask3D segment_wmh(const CaseInput& input, const BinaryMask3D& wm_mask, const Network& wmh_model,
                         const PipelineConfig& cfg, BinaryMask3D* unconfined = nullptr);

struct CaseReport {
    std::string case_id;
    std::size_t wm_voxels = 0;
    std::size_t wmh_voxels = 0;
    double wmh_volume_mm3 = 0.0;
    std::optional<CaseMetrics> metrics;

    std::string to_json(const PipelineConfig& cfg) const;
};

struct PipelineResult {
    BinaryMask3D wmh;
    BinaryMask3D wm;
    CaseReport report;
};

PipelineResult run_pipeline(const CaseInput& input, const Network& wm_model, const Network& wmh_model,
                            const PipelineConfig& cfg);

/// Training slices for the white-matter stage: white_matter_input(t1) against wm_truth.
TrainingCase wm_training_case(const PhantomCase& c);
/// Training slices for the WMH stage: wmh_inputs over the truth white matter
/// dilated like the inference mask, against wmh_truth.
TrainingCase wmh_training_case(const PhantomCase& c, const PipelineConfig& cfg);

}  // namespace wmhseg
