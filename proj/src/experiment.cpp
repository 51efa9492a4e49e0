#include "wmhseg/experiment.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"
#include "wmhseg/checkpoint.hpp"

namespace wmhseg {

NetworkSpec wm_network_spec(std::size_t base_width) { return build_trimmed_unet(1, base_width, 3); }

NetworkSpec wmh_network_spec(std::size_t base_width, BlockKind block, std::size_t depth) {
    return block == BlockKind::Residual ? build_resunet(2, base_width, depth) : build_plain_unet(2, base_width, depth);
}

TrainResult train_wm_stage(const std::vector<PhantomCase>& cases, const NetworkSpec& spec,
                           const TrainConfig& train_cfg, const LossConfig& loss) {
    std::vector<TrainingCase> tc;
    tc.reserve(cases.size());
    for (const auto& c : cases) tc.push_back(wm_training_case(c));
    return train(spec, tc, train_cfg, loss);
}

TrainResult train_wmh_stage(const std::vector<PhantomCase>& cases, const NetworkSpec& spec,
                            const TrainConfig& train_cfg, const LossConfig& loss, const PipelineConfig& pipeline) {
    std::vector<TrainingCase> tc;
    tc.reserve(cases.size());
    for (const auto& c : cases) tc.push_back(wmh_training_case(c, pipeline));
    return train(spec, tc, train_cfg, loss);
}

std::vector<const PhantomCase*> select_cases(const std::vector<PhantomCase>& cases,
                                             const std::vector<std::string>& ids) {
    std::vector<const PhantomCase*> out;
    for (const auto& c : cases) {
        if (std::find(ids.begin(), ids.end(), c.id) != ids.end()) out.push_back(&c);
    }
    return out;
}

double pooled_dice(const std::vector<BinaryMask3D>& pred, const std::vector<BinaryMask3D>& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("pooled_dice: list sizes differ");
    std::size_t inter = 0, total = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (!pred[k].grid().same_dims(truth[k].grid())) throw std::invalid_argument("pooled_dice: grid mismatch");
        for (std::size_t i = 0; i < pred[k].size(); ++i) {
            inter += static_cast<std::size_t>(pred[k][i] & truth[k][i]);
            total += static_cast<std::size_t>(pred[k][i]) + truth[k][i];
        }
    }
    return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

const AblationVariant& AblationReport::variant(const std::string& name) const {
    for (const auto& v : variants) {
        if (v.name == name) return v;
    }
    throw std::out_of_range("no ablation variant named '" + name + "'");
}

std::string AblationReport::to_json() const {
    using nlohmann::json;
    json vs = json::array();
    for (const auto& v : variants) {
        json cases = json::array();
        for (const auto& c : v.cases) {
            cases.push_back({{"case_id", c.case_id},
                             {"dice", c.dice},
                             {"h95_mm", c.h95_mm ? json(*c.h95_mm) : json(nullptr)},
                             {"avd_percent", c.avd_percent ? json(*c.avd_percent) : json(nullptr)},
                             {"lesion_recall", c.lesion_recall},
                             {"lesion_f1", c.lesion_f1}});
        }
        vs.push_back({{"name", v.name},
                      {"network", json::parse(v.spec.to_json())},
                      {"iterations", v.history.iterations},
                      {"beta", v.history.beta},
                      {"final_loss", v.history.iteration_loss.empty() ? 0.0 : v.history.iteration_loss.back()},
                      {"epoch_validation_dice", v.history.epoch_validation_dice},
                      {"validation_dice", v.validation_dice},
                      {"mean_dice", v.summary.dice},
                      {"mean_h95_mm", v.summary.h95_cases ? json(v.summary.h95_mm) : json(nullptr)},
                      {"mean_avd_percent", v.summary.avd_cases ? json(v.summary.avd_percent) : json(nullptr)},
                      {"mean_lesion_recall", v.summary.lesion_recall},
                      {"mean_lesion_f1", v.summary.lesion_f1},
                      {"cases", cases}});
    }
    return json{{"validation_cases", validation_cases}, {"variants", vs}}.dump(2);
}

AblationReport run_ablation(const std::vector<PhantomCase>& cases, const AblationConfig& cfg) {
    AblationReport report;
    for (BlockKind kind : {BlockKind::Plain, BlockKind::Residual}) {
        AblationVariant v;
        v.name = kind == BlockKind::Plain ? "unet" : "resunet";
        v.spec = wmh_network_spec(cfg.base_width, kind, cfg.depth);
        TrainResult r = train_wmh_stage(cases, v.spec, cfg.train, cfg.loss, cfg.pipeline);
        v.history = r.history;
        if (report.validation_cases.empty()) report.validation_cases = r.history.validation_cases;

        std::vector<BinaryMask3D> preds, truths;
        for (const PhantomCase* c : select_cases(cases, r.history.validation_cases)) {
            const BinaryMask3D wm = dilate(c->wm_truth, cfg.pipeline.dilation_radius, cfg.pipeline.wm_connectivity);
            const CaseInput input{c->id, c->t1, c->flair, c->wmh_truth};
            BinaryMask3D pred = segment_wmh(input, wm, r.network, cfg.pipeline);
            v.cases.push_back(
                evaluate_case(pred, c->wmh_truth, c->t1.spacing(), cfg.pipeline.lesion_connectivity, c->id));
            preds.push_back(std::move(pred));
            truths.push_back(c->wmh_truth);
        }
        v.validation_dice = pooled_dice(preds, truths);
        v.summary = summarize_cases(v.name, v.cases);
        v.checkpoint = encode_checkpoint(r.network);
        report.variants.push_back(std::move(v));
    }
    return report;
}

}  // namespace wmhseg
