#include "wmhseg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmhseg/checkpoint.hpp"
#include "wmhseg/experiment.hpp"
#include "wmhseg/gradcheck.hpp"
#include "wmhseg/metrics.hpp"
#include "wmhseg/nifti.hpp"
#include "wmhseg/phantom.hpp"
#include "wmhseg/pipeline.hpp"
#include "wmhseg/raw_volume.hpp"
#include "wmhseg/training.hpp"

namespace wmhseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kReportSchemaVersion = 1;

/// A runtime failure tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

void log(const std::string& message) { std::cerr << "[wmhseg] " << message << '\n'; }

template <class F>
auto in_stage(const std::string& stage, F&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

/// Runs fn(0..n-1) on up to `threads` workers. Results must be written to
/// index-addressed slots so the outcome does not depend on scheduling. The
/// lowest-index failure is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

bool has_extension(const fs::path& p, const std::string& ext) { return p.extension() == ext; }

BinaryMask3D read_mask(const fs::path& path) {
    if (has_extension(path, ".vol")) {
        const Volume3D v = read_vol(path);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] != 0.0 && v[i] != 1.0) throw std::runtime_error(path.string() + ": mask voxels must be 0 or 1");
        }
        return threshold(v, 0.5);
    }
    return read_nifti_mask(path);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json case_metrics_json(const CaseMetrics& m) {
    return {{"case_id", m.case_id},
            {"dice", m.dice},
            {"h95_mm", optional_json(m.h95_mm)},
            {"avd_percent", optional_json(m.avd_percent)},
            {"lesion_recall", m.lesion_recall},
            {"lesion_f1", m.lesion_f1}};
}

json summary_json(const TeamSummary& s) {
    return {{"team", s.team},
            {"cases", s.cases},
            {"dice", s.dice},
            {"h95_mm", s.h95_cases ? json(s.h95_mm) : json(nullptr)},
            {"h95_cases", s.h95_cases},
            {"avd_percent", s.avd_cases ? json(s.avd_percent) : json(nullptr)},
            {"avd_cases", s.avd_cases},
            {"lesion_recall", s.lesion_recall},
            {"lesion_f1", s.lesion_f1}};
}

// ---- shared option groups -------------------------------------------------

struct TrainOptions {
    TrainConfig train;
    LossConfig loss;
    std::string placement = "paper";
    std::size_t base_width = 4;
};

void add_train_options(CLI::App* sub, TrainOptions& o) {
    sub->add_option("--learning_rate", o.train.learning_rate, "SGD step size");
    sub->add_option("--momentum", o.train.momentum, "SGD momentum");
    sub->add_option("--epochs", o.train.epochs, "passes over the training slices");
    sub->add_option("--seed", o.train.seed, "master seed for split, init and shuffling");
    sub->add_option("--validation_fraction", o.train.validation_fraction, "fraction of cases held out");
    sub->add_option("--augmentation", o.train.augmentation, "random dihedral transforms (true/false)");
    sub->add_option("--batch_size", o.train.batch_size, "slices per step");
    sub->add_option("--precision", o.train.precision, "floating-point type (double)");
    sub->add_option("--max_iterations", o.train.max_iterations, "cap on optimizer steps, 0 for none");
    sub->add_option("--auto_beta", o.train.auto_beta, "derive beta from the training split (true/false)");
    sub->add_option("--validation_threshold", o.train.validation_threshold, "threshold for validation Dice");
    sub->add_option("--beta", o.loss.beta, "class weight used when auto_beta is false");
    sub->add_option("--epsilon", o.loss.epsilon, "probability clamp in the log terms");
    sub->add_option("--placement", o.placement, "which class receives beta")
        ->check(CLI::IsMember({"paper", "swapped"}));
    sub->add_option("--base_width", o.base_width, "channels of the first encoder stage");
}

void finish_train_options(TrainOptions& o) {
    o.loss.placement = weight_placement_from_string(o.placement);
    o.train.validate();
}

struct PipelineOptions {
    PipelineConfig cfg;
    int wm_connectivity = 6;
    int lesion_connectivity = 26;
};

void add_pipeline_options(CLI::App* sub, PipelineOptions& o, bool inference) {
    sub->add_option("--dilation_radius", o.cfg.dilation_radius, "white-matter dilation radius in voxels");
    sub->add_option("--wm_connectivity", o.wm_connectivity, "connectivity for WM refinement")
        ->check(CLI::IsMember({6, 18, 26}));
    if (inference) {
        sub->add_option("--threshold", o.cfg.threshold, "probability threshold for both stages");
        sub->add_option("--confinement", o.cfg.confinement, "clear WMH voxels outside white matter (true/false)");
        sub->add_option("--lesion_connectivity", o.lesion_connectivity, "connectivity for lesion counts")
            ->check(CLI::IsMember({6, 18, 26}));
    }
}

void finish_pipeline_options(PipelineOptions& o) {
    o.cfg.wm_connectivity = connectivity_from_int(o.wm_connectivity);
    o.cfg.lesion_connectivity = connectivity_from_int(o.lesion_connectivity);
    o.cfg.validate();
}

std::vector<PhantomCase> load_dataset(const std::string& dir) {
    return in_stage("load-data", [&] {
        auto cases = read_dataset(dir);
        log("loaded " + std::to_string(cases.size()) + " cases from " + dir);
        return cases;
    });
}

json history_json(const TrainHistory& h) { return json::parse(h.summary_json()); }

void save_training_outputs(const Network& net, const TrainHistory& h, const std::string& out,
                           const std::string& history) {
    in_stage("save-checkpoint", [&] {
        const fs::path p(out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        save_checkpoint(net, p);
        if (!history.empty()) write_text(history, h.loss_csv());
    });
}

// ---- sub-commands ---------------------------------------------------------

struct Context {
    json results = json::object();
    json outputs = json::array();
};

struct PhantomArgs {
    PhantomConfig cfg;
    std::size_t cases = 10;
    std::uint64_t seed = 7;
    std::string out;
    std::string phantom_config;
};

void add_phantom(CLI::App* sub, PhantomArgs& a) {
    sub->add_option("--cases", a.cases, "number of cases");
    sub->add_option("--seed", a.seed, "dataset seed");
    sub->add_option("--out", a.out, "output directory")->required();
    sub->add_option("--phantom_config", a.phantom_config, "JSON file with a full phantom configuration");
    sub->add_option("--noise_std", a.cfg.noise_std, "Gaussian noise level");
    sub->add_option("--min_lesions", a.cfg.min_lesions, "fewest lesions per case");
    sub->add_option("--max_lesions", a.cfg.max_lesions, "most lesions per case");
    sub->add_option("--min_lesion_radius", a.cfg.min_lesion_radius, "smallest lesion radius in voxels");
    sub->add_option("--max_lesion_radius", a.cfg.max_lesion_radius, "largest lesion radius in voxels");
    sub->add_option("--confounders", a.cfg.confounders, "add gray-matter confounders (true/false)");
}

void run_phantom(PhantomArgs& a, Context& ctx) {
    if (!a.phantom_config.empty()) {
        a.cfg = in_stage("load-config", [&] { return PhantomConfig::from_json(read_text(a.phantom_config)); });
    }
    auto cases = in_stage("generate", [&] {
        a.cfg.validate();
        return generate_dataset(a.cfg, a.cases, a.seed);
    });
    in_stage("write", [&] { write_dataset(a.out, cases, a.cfg, a.seed); });
    log("wrote " + std::to_string(cases.size()) + " cases to " + a.out);
    json list = json::array();
    for (const auto& c : cases) {
        list.push_back({{"id", c.id},
                        {"seed", c.seed},
                        {"lesions", c.lesion_count},
                        {"confounders", c.confounder_count},
                        {"wmh_voxels", c.wmh_truth.count()}});
    }
    ctx.results["cases"] = list;
    ctx.results["dataset_hash"] = dataset_hash(cases);
    ctx.results["phantom_config"] = json::parse(a.cfg.to_json());
    ctx.outputs.push_back(a.out);
}

struct TrainArgs {
    TrainOptions opts;
    PipelineOptions pipe;
    std::string data;
    std::string out;
    std::string history;
    std::string architecture = "resunet";
    std::size_t depth = 4;
};

void add_train_common(CLI::App* sub, TrainArgs& a) {
    sub->add_option("--data", a.data, "phantom dataset directory")->required();
    sub->add_option("--out", a.out, "checkpoint path")->required();
    sub->add_option("--history", a.history, "per-iteration loss CSV path");
    add_train_options(sub, a.opts);
}

void report_training(const TrainResult& r, const TrainArgs& a, Context& ctx) {
    ctx.results["history"] = history_json(r.history);
    ctx.results["network"] = json::parse(r.network.spec().to_json());
    ctx.results["final_validation_dice"] =
        r.history.epoch_validation_dice.empty() ? json(nullptr) : json(r.history.epoch_validation_dice.back());
    ctx.outputs.push_back(a.out);
    if (!a.history.empty()) ctx.outputs.push_back(a.history);
    if (!r.history.epoch_validation_dice.empty()) {
        log("final validation dice " + std::to_string(r.history.epoch_validation_dice.back()));
    }
}

void run_train_wm(TrainArgs& a, Context& ctx) {
    in_stage("configure", [&] { finish_train_options(a.opts); });
    auto cases = load_dataset(a.data);
    TrainResult r = in_stage("train", [&] {
        return train_wm_stage(cases, wm_network_spec(a.opts.base_width), a.opts.train, a.opts.loss);
    });
    save_training_outputs(r.network, r.history, a.out, a.history);
    report_training(r, a, ctx);
}

void run_train_wmh(TrainArgs& a, Context& ctx) {
    in_stage("configure", [&] {
        finish_train_options(a.opts);
        finish_pipeline_options(a.pipe);
    });
    auto cases = load_dataset(a.data);
    TrainResult r = in_stage("train", [&] {
        const NetworkSpec spec = wmh_network_spec(a.opts.base_width, a.architecture == "unet" ? BlockKind::Plain : BlockKind::Residual, a.depth);
        return train_wmh_stage(cases, spec, a.opts.train, a.opts.loss, a.pipe.cfg);
    });
    save_training_outputs(r.network, r.history, a.out, a.history);
    report_training(r, a, ctx);
}

struct PredictArgs {
    PipelineOptions pipe;
    std::string data;
    std::vector<std::string> case_ids;
    std::string wm_model;
    std::string wmh_model;
    std::string out;
    std::size_t threads = 1;
};

void run_predict(PredictArgs& a, Context& ctx) {
    in_stage("configure", [&] { finish_pipeline_options(a.pipe); });
    auto all = load_dataset(a.data);
    std::vector<const PhantomCase*> cases;
    if (a.case_ids.empty()) {
        for (const auto& c : all) cases.push_back(&c);
    } else {
        cases = select_cases(all, a.case_ids);
        if (cases.size() != a.case_ids.size()) throw StageError("load-data", "unknown case id requested");
    }
    const Network wm = in_stage("load-model", [&] { return load_checkpoint(a.wm_model); });
    const Network wmh = in_stage("load-model", [&] { return load_checkpoint(a.wmh_model); });
    in_stage("write", [&] { fs::create_directories(a.out); });

    std::vector<PipelineResult> results(cases.size());
    in_stage("predict", [&] {
        parallel_for(cases.size(), a.threads, [&](std::size_t i) {
            const PhantomCase& c = *cases[i];
            std::optional<BinaryMask3D> truth;
            if (c.wmh_truth.size() > 0) truth = c.wmh_truth;
            results[i] = run_pipeline(CaseInput{c.id, c.t1, c.flair, truth}, wm, wmh, a.pipe.cfg);
        });
    });
    json list = json::array();
    std::vector<BinaryMask3D> preds, truths;
    in_stage("write", [&] {
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const auto& r = results[i];
            const fs::path dir(a.out);
            write_nifti(r.wmh, dir / (r.report.case_id + "_wmh_pred.nii"));
            write_nifti(r.wm, dir / (r.report.case_id + "_wm_pred.nii"));
            const std::string report = r.report.to_json(a.pipe.cfg);
            write_text(dir / (r.report.case_id + "_report.json"), report);
            list.push_back(json::parse(report));
            if (r.report.metrics) {
                preds.push_back(r.wmh);
                truths.push_back(cases[i]->wmh_truth);
            }
        }
    });
    ctx.results["cases"] = list;
    if (!truths.empty()) ctx.results["pooled_dice"] = pooled_dice(preds, truths);
    ctx.outputs.push_back(a.out);
    log("segmented " + std::to_string(cases.size()) + " cases into " + a.out);
}

struct EvaluateArgs {
    std::vector<std::string> pred;
    std::vector<std::string> gt;
    std::string team = "team";
    int connectivity = 26;
    std::string out;
    std::string summary_out;
    std::size_t threads = 1;
};

void run_evaluate(EvaluateArgs& a, Context& ctx) {
    if (a.pred.size() != a.gt.size()) throw StageError("configure", "--pred and --gt must be given the same number of times");
    const Connectivity conn = in_stage("configure", [&] { return connectivity_from_int(a.connectivity); });
    std::vector<CaseMetrics> metrics(a.pred.size());
    in_stage("evaluate", [&] {
        parallel_for(a.pred.size(), a.threads, [&](std::size_t i) {
            const BinaryMask3D p = read_mask(a.pred[i]);
            const BinaryMask3D g = read_mask(a.gt[i]);
            if (!p.grid().same_dims(g.grid())) throw std::runtime_error("grid mismatch between " + a.pred[i] + " and " + a.gt[i]);
            metrics[i] = evaluate_case(p, g, g.spacing(), conn, fs::path(a.pred[i]).stem().string());
        });
    });
    const TeamSummary summary = summarize_cases(a.team, metrics);
    if (!a.out.empty()) {
        in_stage("write", [&] { write_text(a.out, case_metrics_csv(metrics)); });
        ctx.outputs.push_back(a.out);
    }
    if (!a.summary_out.empty()) {
        in_stage("write", [&] { write_text(a.summary_out, team_summaries_csv({summary})); });
        ctx.outputs.push_back(a.summary_out);
    }
    json list = json::array();
    for (const auto& m : metrics) list.push_back(case_metrics_json(m));
    ctx.results["cases"] = list;
    ctx.results["summary"] = summary_json(summary);
    log("evaluated " + std::to_string(metrics.size()) + " pairs, mean dice " + std::to_string(summary.dice));
}

struct RankArgs {
    std::vector<std::string> summaries;
    std::string out;
};

void run_rank(RankArgs& a, Context& ctx) {
    const auto teams = in_stage("load-data", [&] {
        std::vector<TeamSummary> all;
        for (const auto& path : a.summaries) {
            const auto rows = parse_team_summaries_csv(read_text(path));
            all.insert(all.end(), rows.begin(), rows.end());
        }
        return all;
    });
    const RankTable table = in_stage("rank", [&] { return rank_teams(teams); });
    if (!a.out.empty()) {
        in_stage("write", [&] { write_text(a.out, table.to_csv()); });
        ctx.outputs.push_back(a.out);
    }
    ctx.results["ranking"] = json::parse(table.to_json());
    log("ranked " + std::to_string(teams.size()) + " teams");
}

struct GradcheckArgs {
    std::uint64_t seed = 1;
    double tolerance = 1e-4;
    std::size_t base_width = 2;
    std::size_t depth = 2;
    std::size_t size = 8;
};

bool run_gradcheck(GradcheckArgs& a, Context& ctx) {
    GradCheckOptions opts;
    opts.tolerance = a.tolerance;
    json list = json::array();
    bool pass = true;
    auto record = [&](const std::string& name, const GradCheckReport& r) {
        list.push_back({{"name", name}, {"max_rel_error", r.max_rel_error}, {"pass", r.pass()}});
        log(name + ": max relative error " + std::to_string(r.max_rel_error) + (r.pass() ? " pass" : " FAIL"));
        pass = pass && r.pass();
    };
    in_stage("gradcheck", [&] {
        for (const auto& c : operator_gradchecks(a.seed, opts)) record(c.name, c.report);
        for (BlockKind kind : {BlockKind::Residual, BlockKind::Plain}) {
            Network net(wmh_network_spec(a.base_width, kind, a.depth), a.seed);
            record(std::string("network_") + to_string(kind), network_gradcheck(net, a.size, a.size, a.seed, opts));
        }
    });
    ctx.results["checks"] = list;
    ctx.results["pass"] = pass;
    return pass;
}

struct AblationArgs {
    TrainOptions opts;
    PipelineOptions pipe;
    std::string data;
    std::string out;
    std::size_t depth = 4;
};

void run_ablation_command(AblationArgs& a, Context& ctx) {
    in_stage("configure", [&] {
        finish_train_options(a.opts);
        finish_pipeline_options(a.pipe);
    });
    auto cases = load_dataset(a.data);
    AblationConfig cfg{a.opts.train, a.opts.loss, a.pipe.cfg, a.opts.base_width, a.depth};
    const AblationReport report = in_stage("train", [&] { return run_ablation(cases, cfg); });
    const std::string text = report.to_json();
    if (!a.out.empty()) {
        in_stage("write", [&] { write_text(a.out, text); });
        ctx.outputs.push_back(a.out);
    }
    ctx.results["ablation"] = json::parse(text);
    for (const auto& v : report.variants) {
        log(v.name + ": validation dice " + std::to_string(v.validation_dice) + ", lesion F1 " +
            std::to_string(v.summary.lesion_f1));
    }
}

// ---- report and dispatch --------------------------------------------------

json option_echo(const CLI::App& sub) {
    json echo = json::object();
    for (const CLI::Option* o : sub.get_options()) {
        const std::string name = o->get_single_name();
        if (name.empty() || name == "help" || name == "report" || name == "config") continue;
        const auto res = o->reduced_results();
        if (o->count() == 0) {
            echo[name] = o->get_default_str();
        } else if (res.size() == 1 && o->get_expected_max() <= 1) {
            echo[name] = res.front();
        } else {
            echo[name] = res;
        }
    }
    return echo;
}

void write_report(const std::string& path, const json& report) {
    if (path.empty()) return;
    try {
        write_text(path, report.dump(2) + "\n");
    } catch (const std::exception& e) {
        log(std::string("could not write run report: ") + e.what());
    }
}

/// Applies the policy that makes a repeated scalar flag keep its last value,
/// so command-line flags override config-file entries injected before them.
void last_value_wins(CLI::App* sub) {
    for (CLI::Option* o : sub->get_options()) {
        if (o->get_expected_max() == 1) o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

/// Expands "--config FILE" in place into the file's "--key value" pairs,
/// placed right after the sub-command name so later flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> head, tail;
    std::vector<std::string> injected;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        std::string file;
        if (a == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file path");
            file = args[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            file = a.substr(9);
        } else {
            (head.empty() ? head : tail).push_back(a);
            continue;
        }
        auto extra = config_file_arguments(read_text(file));
        injected.insert(injected.end(), extra.begin(), extra.end());
    }
    std::vector<std::string> out{args.empty() ? std::string("wmhseg") : args.front()};
    out.insert(out.end(), head.begin(), head.end());
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

}  // namespace

std::vector<std::string> config_file_arguments(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        out.push_back("--" + key);
        out.push_back(value);
    }
    return out;
}

int run_cli(const std::vector<std::string>& raw_args) {
    CLI::App app{"Two-stage white-matter hyperintensity segmentation", "wmhseg"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::string report_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--report", report_path, "JSON run report path");
        sub->add_option("--config", "key = value file; flags given on the command line win");
        return sub;
    };

    PhantomArgs phantom;
    auto* s_phantom = add_common(app.add_subcommand("phantom", "generate a synthetic dataset"));
    add_phantom(s_phantom, phantom);

    TrainArgs train_wm;
    train_wm.opts.train.epochs = 30;
    auto* s_train_wm = add_common(app.add_subcommand("train-wm", "train the white-matter network"));
    add_train_common(s_train_wm, train_wm);

    TrainArgs train_wmh;
    train_wmh.opts.train.epochs = 30;
    auto* s_train_wmh = add_common(app.add_subcommand("train-wmh", "train the WMH network"));
    add_train_common(s_train_wmh, train_wmh);
    s_train_wmh->add_option("--architecture", train_wmh.architecture, "resunet or unet")->check(CLI::IsMember({"resunet", "unet"}));
    s_train_wmh->add_option("--depth", train_wmh.depth, "number of downsampling stages");
    add_pipeline_options(s_train_wmh, train_wmh.pipe, false);

    PredictArgs predict;
    auto* s_predict = add_common(app.add_subcommand("predict", "run both stages on a dataset"));
    s_predict->add_option("--data", predict.data, "dataset directory")->required();
    s_predict->add_option("--case", predict.case_ids, "restrict to these case ids");
    s_predict->add_option("--wm_model", predict.wm_model, "white-matter checkpoint")->required();
    s_predict->add_option("--wmh_model", predict.wmh_model, "WMH checkpoint")->required();
    s_predict->add_option("--out", predict.out, "output directory")->required();
    s_predict->add_option("--threads", predict.threads, "parallel cases")->check(CLI::PositiveNumber);
    add_pipeline_options(s_predict, predict.pipe, true);

    EvaluateArgs evaluate;
    auto* s_evaluate = add_common(app.add_subcommand("evaluate", "score predicted masks against truth"));
    s_evaluate->add_option("--pred", evaluate.pred, "predicted mask (.nii or .vol), repeatable")->required();
    s_evaluate->add_option("--gt", evaluate.gt, "truth mask (.nii or .vol), repeatable")->required();
    s_evaluate->add_option("--team", evaluate.team, "name for the summary row");
    s_evaluate->add_option("--connectivity", evaluate.connectivity, "lesion connectivity")
        ->check(CLI::IsMember({6, 18, 26}));
    s_evaluate->add_option("--out", evaluate.out, "per-case metrics CSV path");
    s_evaluate->add_option("--summary_out", evaluate.summary_out, "one-row team summary CSV, input for rank");
    s_evaluate->add_option("--threads", evaluate.threads, "parallel cases")->check(CLI::PositiveNumber);

    RankArgs rank;
    auto* s_rank = add_common(app.add_subcommand("rank", "rank teams from metric summaries"));
    s_rank->add_option("--summaries", rank.summaries, "team summary CSV, repeatable; rows are concatenated")->required();
    s_rank->add_option("--out", rank.out, "ranking CSV path");

    GradcheckArgs gradcheck;
    auto* s_gradcheck = add_common(app.add_subcommand("gradcheck", "compare analytic and numeric gradients"));
    s_gradcheck->add_option("--seed", gradcheck.seed, "seed for shapes, inputs and weights");
    s_gradcheck->add_option("--tolerance", gradcheck.tolerance, "maximum relative error");
    s_gradcheck->add_option("--base_width", gradcheck.base_width, "network width for the full-network check");
    s_gradcheck->add_option("--depth", gradcheck.depth, "network depth for the full-network check");
    s_gradcheck->add_option("--size", gradcheck.size, "input height and width");

    AblationArgs ablation;
    ablation.opts.train.epochs = 30;
    auto* s_ablation = add_common(app.add_subcommand("ablation", "train U-Net and ResU-Net side by side"));
    s_ablation->add_option("--data", ablation.data, "phantom dataset directory")->required();
    s_ablation->add_option("--out", ablation.out, "comparison report path");
    s_ablation->add_option("--depth", ablation.depth, "number of downsampling stages");
    add_train_options(s_ablation, ablation.opts);
    add_pipeline_options(s_ablation, ablation.pipe, false);

    for (CLI::App* sub : app.get_subcommands({})) last_value_wins(sub);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsageError;
    } catch (const std::exception& e) {
        log(std::string("usage error: ") + e.what());
        return kExitUsageError;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    json report{{"schema", "wmhseg-run-report"},
                {"schema_version", kReportSchemaVersion},
                {"command", command},
                {"config", option_echo(*sub)}};
    Context ctx;
    const auto start = std::chrono::steady_clock::now();
    int status = kExitOk;
    try {
        if (command == "phantom") {
            run_phantom(phantom, ctx);
        } else if (command == "train-wm") {
            run_train_wm(train_wm, ctx);
        } else if (command == "train-wmh") {
            run_train_wmh(train_wmh, ctx);
        } else if (command == "predict") {
            run_predict(predict, ctx);
        } else if (command == "evaluate") {
            run_evaluate(evaluate, ctx);
        } else if (command == "rank") {
            run_rank(rank, ctx);
        } else if (command == "gradcheck") {
            if (!run_gradcheck(gradcheck, ctx)) {
                throw StageError("gradcheck", "analytic and numeric gradients disagree");
            }
        } else if (command == "ablation") {
            run_ablation_command(ablation, ctx);
        }
        report["status"] = "ok";
    } catch (const StageError& e) {
        report["status"] = "error";
        report["error"] = {{"stage", e.stage()}, {"message", e.what()}};
        log("error in stage " + e.stage() + ": " + e.what());
        status = kExitRuntimeError;
    } catch (const std::exception& e) {
        report["status"] = "error";
        report["error"] = {{"stage", command}, {"message", e.what()}};
        log("error in stage " + command + ": " + e.what());
        status = kExitRuntimeError;
    }
    report["results"] = ctx.results;
    report["outputs"] = ctx.outputs;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log(command + " finished in " + std::to_string(seconds) + " s");
    write_report(report_path, report);
    return status;
}

}  // namespace wmhseg
