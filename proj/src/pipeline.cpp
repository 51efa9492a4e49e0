#include "wmhseg/pipeline.hpp"

#include "json.hpp"
#include "wmhseg/preprocess.hpp"

namespace wmhseg {

void PipelineConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
}

void CaseInput::validate() const {
    if (!(t1.grid() == flair.grid())) throw PipelineError("case " + id + ": T1 and FLAIR grids differ");
    if (wmh_truth && !wmh_truth->grid().same_dims(t1.grid())) {
        throw PipelineError("case " + id + ": ground truth grid differs from the images");
    }
}

Volume3D predict_volume(const Network& net, const std::vector<const Volume3D*>& channels) {
    if (channels.empty()) throw std::invalid_argument("predict_volume: no channels");
    const Grid& g = channels.front()->grid();
    const BinaryMask3D dummy(g);
    const auto slices = make_slice_samples(channels, dummy);
    Volume3D out(g);
    const std::size_t plane = g.dims[0] * g.dims[1];
    for (std::size_t z = 0; z < slices.size(); ++z) {
        const Array4 probs = net.predict(make_batch({&slices[z]}));
        for (std::size_t i = 0; i < plane; ++i) out[z * plane + i] = static_cast<float>(probs[i]);
    }
    return out;
}

Volume3D white_matter_input(const Volume3D& t1) { return normalize_min_max(t1); }

BinaryMask3D segment_white_matter(const Volume3D& t1, const Network& wm_model, const PipelineConfig& cfg,
                                  BinaryMask3D* thresholded) {
    cfg.validate();
    if (wm_model.spec().in_channels != 1) throw PipelineError("white matter model must take 1 input channel");
    const Volume3D input = white_matter_input(t1);
    const BinaryMask3D raw = threshold(predict_volume(wm_model, {&input}), cfg.threshold);
    if (thresholded) *thresholded = raw;
    if (raw.count() == 0) throw PipelineError("white matter stage: empty mask after threshold");
    return dilate(largest_component(raw, cfg.wm_connectivity), cfg.dilation_radius, cfg.wm_connectivity);
}

std::pair<Volume3D, Volume3D> wmh_inputs(const Volume3D& t1, const Volume3D& flair, const BinaryMask3D& wm_mask) {
    return {normalize_to_mask(t1, wm_mask), normalize_to_mask(flair, wm_mask)};
}

BinaryMask3D segment_wmh(const CaseInput& input, const BinaryMask3D& wm_mask, const Network& wmh_model,
                         const PipelineConfig& cfg, BinaryMask3D* unconfined) {
    cfg.validate();
    input.validate();
    if (wmh_model.spec().in_channels != 2) throw PipelineError("WMH model must take 2 input channels");
    if (!wm_mask.grid().same_dims(input.t1.grid())) throw PipelineError("white matter mask grid differs from images");
    if (wm_mask.count() == 0) throw PipelineError("white matter mask is empty");
    const auto [t1n, flairn] = wmh_inputs(input.t1, input.flair, wm_mask);
    BinaryMask3D raw = threshold(predict_volume(wmh_model, {&t1n, &flairn}), cfg.threshold);
    raw.set_spacing(input.t1.spacing());
    if (unconfined) *unconfined = raw;
    return cfg.confinement ? mask_and(raw, wm_mask) : raw;
}

std::string CaseReport::to_json(const PipelineConfig& cfg) const {
    nlohmann::json j{{"case_id", case_id},
                     {"wm_voxels", wm_voxels},
                     {"wmh_voxels", wmh_voxels},
                     {"wmh_volume_mm3", wmh_volume_mm3},
                     {"config",
                      {{"threshold", cfg.threshold},
                       {"dilation_radius", cfg.dilation_radius},
                       {"wm_connectivity", to_int(cfg.wm_connectivity)},
                       {"confinement", cfg.confinement},
                       {"lesion_connectivity", to_int(cfg.lesion_connectivity)}}}};
    if (metrics) {
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
        j["metrics"] = {{"dice", metrics->dice},
                        {"h95_mm", opt(metrics->h95_mm)},
                        {"avd_percent", opt(metrics->avd_percent)},
                        {"lesion_recall", metrics->lesion_recall},
                        {"lesion_f1", metrics->lesion_f1}};
    }
    return j.dump(2);
}

PipelineResult run_pipeline(const CaseInput& input, const Network& wm_model, const Network& wmh_model,
                            const PipelineConfig& cfg) {
    input.validate();
    PipelineResult r;
    r.wm = segment_white_matter(input.t1, wm_model, cfg);
    r.wm.set_spacing(input.t1.spacing());
    r.wmh = segment_wmh(input, r.wm, wmh_model, cfg);
    r.report.case_id = input.id;
    r.report.wm_voxels = r.wm.count();
    r.report.wmh_voxels = r.wmh.count();
    r.report.wmh_volume_mm3 = static_cast<double>(r.report.wmh_voxels) * input.t1.grid().voxel_volume_mm3();
    if (input.wmh_truth) {
        r.report.metrics = evaluate_case(r.wmh, *input.wmh_truth, input.t1.spacing(), cfg.lesion_connectivity, input.id);
    }
    return r;
}

TrainingCase wm_training_case(const PhantomCase& c) {
    const Volume3D input = white_matter_input(c.t1);
    return TrainingCase{c.id, make_slice_samples({&input}, c.wm_truth)};
}

TrainingCase wmh_training_case(const PhantomCase& c, const PipelineConfig& cfg) {
    const BinaryMask3D mask = dilate(c.wm_truth, cfg.dilation_radius, cfg.wm_connectivity);
    const auto [t1n, flairn] = wmh_inputs(c.t1, c.flair, mask);
    return TrainingCase{c.id, make_slice_samples({&t1n, &flairn}, c.wmh_truth)};
}

}  // namespace wmhseg
