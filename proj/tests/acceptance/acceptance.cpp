// Release acceptance suite: one verdict line per criterion, optional JSON report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "support/nifti_fuzz.hpp"
#include "support/oracles.hpp"
#include "wmhseg/cli.hpp"
#include "wmhseg/experiment.hpp"
#include "wmhseg/gradcheck.hpp"
#include "wmhseg/loss.hpp"
#include "wmhseg/metrics.hpp"
#include "wmhseg/network.hpp"
#include "wmhseg/nifti.hpp"
#include "wmhseg/ops.hpp"
#include "wmhseg/phantom.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wmhseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    double measured = 0.0;
    std::string tolerance;
    std::string detail;
};

struct Criterion {
    int id;
    std::string group;
    std::string title;
    std::function<Outcome()> run;
};

struct Result {
    const Criterion* criterion = nullptr;
    std::string status;  // pass, fail, error or skipped
    Outcome outcome;
    std::string error;
    double runtime_s = 0.0;
};

std::string fmt(double v, int digits = 6) {
    std::ostringstream ss;
    ss.precision(digits);
    ss << v;
    return ss.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- fast criteria

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    GradCheckOptions opts;
    opts.tolerance = 1e-4;
    double worst = 0.0;
    bool pass = true;
    std::set<std::string> covered;
    std::string detail;
    for (const auto& c : operator_gradchecks(1, opts)) {
        covered.insert(c.name);
        worst = std::max(worst, c.report.max_rel_error);
        pass = pass && c.report.pass();
    }
    for (const char* op : {"conv3x3", "conv1x1", "relu", "maxpool2", "upconv2", "concat", "add", "sigmoid"}) {
        if (!covered.count(op)) {
            pass = false;
            detail += std::string("missing operator ") + op + "; ";
        }
    }
    Network net(wmh_network_spec(2, BlockKind::Residual, 2), 1);
    const GradCheckReport full = network_gradcheck(net, 16, 16, 1, opts);
    worst = std::max(worst, full.max_rel_error);
    pass = pass && full.pass();
    const double elapsed = seconds_since(t0);
    pass = pass && elapsed <= 60.0;
    detail += std::to_string(covered.size()) + " operators and ResU-Net(2, 2) on 16x16; network max " +
              fmt(full.max_rel_error, 3) + "; " + fmt(elapsed, 3) + " s of 60 s";
    return {pass, worst, "max relative error <= 1e-4, runtime <= 60 s", detail};
}

Outcome residual_identity() {
    bool exact = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ParameterSet set;
        const ResidualBlockSpec spec{3, 3, BlockKind::Residual, false, false};
        const BlockParameters bp = add_block_parameters(set, "b", spec);
        const Array4 x = random_array({2, 3, 7, 5}, seed);
        exact = exact && residual_block_forward(x, spec, bp) == x;
    }
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ParameterSet set;
        const ResidualBlockSpec spec{2, 5, BlockKind::Residual, true, false};
        const BlockParameters bp = add_block_parameters(set, "b", spec);
        bp.proj_w->value = random_array(bp.proj_w->value.shape(), 100 + seed);
        bp.proj_b->value = random_array(bp.proj_b->value.shape(), 200 + seed);
        const Array4 x = random_array({1, 2, 6, 9}, 300 + seed);
        const Array4 y = residual_block_forward(x, spec, bp);
        const Array4 ref = ops::conv2d_direct(x, bp.proj_w->value, bp.proj_b->value);
        for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref[i]));
    }
    return {exact && worst <= 1e-12, worst, "identity bit-exact; projection within 1e-12",
            std::string("identity skip ") + (exact ? "bit-exact" : "NOT bit-exact") + " on 10 inputs"};
}

Outcome loss_correctness() {
    Rng rng(2718);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(1024);
        std::vector<double> p(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng.uniform();
            y[i] = rng.below(5) == 0 ? 1 : 0;
        }
        LossConfig cfg;
        cfg.beta = rng.uniform();
        const double ref = oracle::weighted_bce(p, y, cfg.foreground_weight(), cfg.background_weight(), cfg.epsilon);
        worst = std::max(worst, std::abs(weighted_bce(p, y, cfg).loss - ref));
    }
    LossConfig single;
    single.beta = 0.9;
    const double one = weighted_bce(std::vector<double>{0.5}, std::vector<std::uint8_t>{1}, single).loss;
    const double one_err = std::abs(one - (-0.9 * std::log(0.5)));
    std::vector<std::uint8_t> slice(1000, 0);
    std::fill(slice.begin(), slice.begin() + 25, 1);
    const double beta = compute_beta(std::vector<std::vector<std::uint8_t>>{slice});
    const bool pass = worst <= 1e-10 && one_err <= 1e-12 && beta == 0.975;
    return {pass, worst, "random <= 1e-10; single pixel <= 1e-12; beta == 0.975",
            "single pixel error " + fmt(one_err, 3) + "; beta " + fmt(beta, 17)};
}

Outcome metric_oracles() {
    const auto t0 = Clock::now();
    const Grid grid{{16, 16, 16}, {0.9, 1.0, 3.0}};
    Rng rng(31337);
    const int pairs = 120;
    int mismatches = 0;
    double worst_h95 = 0.0;
    std::size_t voxels = 0;
    for (int trial = 0; trial < pairs; ++trial) {
        const BinaryMask3D p = oracle::random_blobs(grid, rng, static_cast<int>(rng.below(10)), 8);
        const BinaryMask3D t = oracle::random_blobs(grid, rng, static_cast<int>(rng.below(10)), 8);
        voxels += p.count() + t.count();
        if (dice(p, t) != oracle::dice(p, t)) ++mismatches;
        const auto a = avd_percent(p, t);
        const double ref_a = oracle::avd(p, t);
        if (a.has_value() != (ref_a >= 0.0) || (a && *a != ref_a)) ++mismatches;
        const auto h = h95(p, t, grid.spacing);
        const double ref_h = oracle::h95(p, t, grid.spacing);
        if (h.has_value() != (ref_h >= 0.0)) ++mismatches;
        if (h && ref_h >= 0.0) worst_h95 = std::max(worst_h95, std::abs(*h - ref_h));
        if (lesion_recall(p, t) != oracle::lesion_recall(p, t, 26)) ++mismatches;
        if (lesion_f1(p, t) != oracle::lesion_f1(p, t, 26)) ++mismatches;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = mismatches == 0 && worst_h95 <= 1e-9 && elapsed <= 120.0;
    return {pass, worst_h95, "exact dice/avd/recall/F1; h95 <= 1e-9 mm; runtime <= 120 s",
            std::to_string(pairs) + " pairs of 16^3 masks, " + std::to_string(mismatches) + " exact mismatches, mean mask " +
                fmt(static_cast<double>(voxels) / (2.0 * pairs), 4) + " voxels, " +
                fmt(elapsed, 3) + " s"};
}

Outcome rank_formula() {
    const std::vector<TeamSummary> all_scanners{{"sysu_media", 0.80, 6.3, 21.9, 0.84, 0.76},
                                          {"cain", 0.78, 6.8, 21.7, 0.83, 0.70},
                                          {"nlp_logix", 0.77, 7.2, 18.4, 0.73, 0.78},
                                          {"nih_cidi_2", 0.75, 7.35, 27.26, 0.81, 0.69},
                                          {"nic-vicorob", 0.77, 8.3, 28.5, 0.75, 0.71}};
    const std::vector<TeamSummary> unseen_scanners{{"sysu_media", 0.74, 11.0, 26.2, 0.87, 0.72},
                                          {"nih_cidi_2", 0.70, 9.7, 21.9, 0.79, 0.68},
                                          {"cain", 0.74, 14.1, 28.4, 0.82, 0.66},
                                          {"nic-vicorob", 0.71, 13.5, 56.3, 0.81, 0.62},
                                          {"nlp_logix", 0.68, 13.0, 27.9, 0.66, 0.73}};
    const RankTable r1 = rank_teams(all_scanners);
    const RankTable r2 = rank_teams(unseen_scanners);
    const double errors[] = {std::abs(r1.find("sysu_media").dice - 0.0), std::abs(r1.find("nih_cidi_2").dice - 1.0),
                             std::abs(r2.find("nih_cidi_2").h95 - 0.0), std::abs(r2.find("nih_cidi_2").avd - 0.0)};
    const double worst = *std::max_element(std::begin(errors), std::end(errors));
    return {worst <= 1e-12, worst, "rank deviation <= 1e-12",
            "all-scanner dice ranks sysu_media " + fmt(r1.find("sysu_media").dice) + ", nih_cidi_2 " +
                fmt(r1.find("nih_cidi_2").dice) + "; unseen-scanner nih_cidi_2 h95 " + fmt(r2.find("nih_cidi_2").h95) +
                ", avd " + fmt(r2.find("nih_cidi_2").avd)};
}

Outcome nifti_io(const fs::path& work) {
    fs::create_directories(work);
    Rng rng(4242);
    int mismatched = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Grid g{{3 + rng.below(10), 3 + rng.below(10), 1 + rng.below(6)}, {0.5, 1.25, 3.0}};
        std::vector<float> data(g.voxel_count());
        for (auto& v : data) v = static_cast<float>(rng.normal() * 100.0);
        const Volume3D v(g, data);
        const fs::path path = work / "roundtrip.nii";
        write_nifti(v, path);
        const Volume3D back = read_nifti(path);
        bool same = back.grid() == v.grid() && back.size() == v.size();
        for (std::size_t i = 0; same && i < v.size(); ++i) {
            same = std::memcmp(&back[i], &v[i], sizeof(float)) == 0;
        }
        if (!same) ++mismatched;
    }
    const Volume3D base(Grid{{4, 4, 4}, {1, 1, 3}}, std::vector<float>(64, 0.25f));
    const auto cases = fuzz::malformed_cases(encode_nifti(base, NiftiDatatype::Float32));
    int rejected = 0;
    std::string wrong;
    for (const auto& c : cases) {
        try {
            (void)decode_nifti(c.bytes);
            wrong += c.name + " accepted; ";
        } catch (const NiftiError& e) {
            if (e.code() == c.expected) {
                ++rejected;
            } else {
                wrong += c.name + " gave " + to_string(e.code()) + "; ";
            }
        } catch (const std::exception& e) {
            wrong += c.name + " threw an untyped error; ";
        }
    }
    const bool pass = mismatched == 0 && rejected == static_cast<int>(cases.size()) && cases.size() >= 20;
    return {pass, static_cast<double>(rejected), "10/10 bit-exact round trips; all of >= 20 fuzz cases typed",
            std::to_string(10 - mismatched) + "/10 round trips bit-exact; " + std::to_string(rejected) + "/" +
                std::to_string(cases.size()) + " malformed headers rejected with the expected code" +
                (wrong.empty() ? "" : "; " + wrong)};
}

// ---------------------------------------------------------------- phantom runs

const std::vector<std::string> kTrainFlags{"--learning_rate", "0.03", "--momentum",       "0.9",
                                           "--batch_size",    "4",    "--epochs",         "30",
                                           "--max_iterations", "500", "--base_width",     "4",
                                           "--seed",          "11"};

// Runs every CLI stage of the acceptance workflow inside one root directory.
// All paths handed to the CLI are relative, so reports from two roots can be
// compared byte for byte. Stages run on first demand and are cached.
class PhantomRun {
public:
    explicit PhantomRun(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    void ensure_pipeline() {
        if (pipeline_done_) return;
        const auto t0 = Clock::now();
        cli({"phantom", "--cases", "10", "--seed", "7", "--out", "data", "--report", "phantom.json"});
        cli(with_train({"train-wm", "--data", "data", "--out", "wm.ckpt", "--history", "wm_history.csv",
                        "--report", "train_wm.json"}));
        cli(with_train({"train-wmh", "--data", "data", "--out", "wmh.ckpt", "--history", "wmh_history.csv",
                        "--report", "train_wmh.json"}));
        std::vector<std::string> predict{"predict", "--data",   "data", "--wm_model", "wm.ckpt", "--wmh_model",
                                         "wmh.ckpt", "--out", "pred", "--report",   "predict.json"};
        for (const auto& id : validation_cases()) {
            predict.push_back("--case");
            predict.push_back(id);
        }
        cli(predict);
        pipeline_seconds_ = seconds_since(t0);
        pipeline_done_ = true;
    }

    void ensure_heldout() {
        if (heldout_done_) return;
        ensure_pipeline();
        cli({"phantom", "--cases", "6", "--seed", "8", "--confounders", "true", "--out", "heldout", "--report",
             "heldout.json"});
        for (const char* mode : {"true", "false"}) {
            const std::string tag = std::string("confine_") + (mode[0] == 't' ? "on" : "off");
            cli({"predict", "--data", "heldout", "--wm_model", "wm.ckpt", "--wmh_model", "wmh.ckpt", "--confinement",
                 mode, "--out", tag, "--report", tag + ".json"});
        }
        heldout_done_ = true;
    }

    void ensure_ablation() {
        if (ablation_done_) return;
        if (!fs::exists(root_ / "data")) {
            cli({"phantom", "--cases", "10", "--seed", "7", "--out", "data", "--report", "phantom.json"});
        }
        cli(with_train({"ablation", "--data", "data", "--out", "ablation.json", "--report", "ablation_run.json"}));
        ablation_done_ = true;
    }

    void ensure_all() {
        ensure_pipeline();
        ensure_heldout();
        ensure_ablation();
    }

    json read_json(const std::string& rel) const { return json::parse(slurp(root_ / rel)); }

    std::vector<std::string> validation_cases() const {
        return read_json("train_wmh.json").at("results").at("history").at("validation_cases");
    }

    double pipeline_seconds() const { return pipeline_seconds_; }

private:
    static std::vector<std::string> with_train(std::vector<std::string> args) {
        args.insert(args.end(), kTrainFlags.begin(), kTrainFlags.end());
        return args;
    }

    void cli(const std::vector<std::string>& args) {
        fs::create_directories(root_);
        const fs::path previous = fs::current_path();
        fs::current_path(root_);
        std::vector<std::string> argv{"wmhseg"};
        argv.insert(argv.end(), args.begin(), args.end());
        int code = 0;
        try {
            code = run_cli(argv);
        } catch (...) {
            fs::current_path(previous);
            throw;
        }
        fs::current_path(previous);
        if (code != kExitOk) throw std::runtime_error("wmhseg " + args.front() + " exited with " + std::to_string(code));
    }

    fs::path root_;
    bool pipeline_done_ = false;
    bool heldout_done_ = false;
    bool ablation_done_ = false;
    double pipeline_seconds_ = 0.0;
};

Outcome end_to_end(PhantomRun& run) {
    run.ensure_pipeline();
    const json wm = run.read_json("train_wm.json").at("results");
    const json wmh = run.read_json("train_wmh.json").at("results");
    const json pred = run.read_json("predict.json").at("results");
    const double wm_dice = wm.at("final_validation_dice");
    const double wmh_dice = pred.at("pooled_dice");
    const std::size_t wm_iters = wm.at("history").at("iterations");
    const std::size_t wmh_iters = wmh.at("history").at("iterations");
    const double seconds = run.pipeline_seconds();
    const bool pass = wm_dice >= 0.85 && wmh_dice >= 0.85 && wm_iters <= 500 && wmh_iters <= 500 && seconds <= 600.0;
    return {pass, std::min(wm_dice, wmh_dice), "both Dice >= 0.85; <= 500 iterations each; <= 600 s",
            "WM validation Dice " + fmt(wm_dice) + ", WMH validation Dice " + fmt(wmh_dice) + " (network " +
                fmt(wmh.at("final_validation_dice").get<double>()) + "); iterations " + std::to_string(wm_iters) +
                "/" + std::to_string(wmh_iters) + "; " + fmt(seconds, 4) + " s"};
}

Outcome confinement(PhantomRun& run) {
    run.ensure_heldout();
    std::size_t fp_on = 0, fp_off = 0;
    const json cases = run.read_json("heldout.json").at("results").at("cases");
    for (const auto& c : cases) {
        const std::string id = c.at("id");
        const BinaryMask3D truth = read_nifti_mask(run.root() / "heldout" / (id + "_wmh.nii"));
        const BinaryMask3D on = read_nifti_mask(run.root() / "confine_on" / (id + "_wmh_pred.nii"));
        const BinaryMask3D off = read_nifti_mask(run.root() / "confine_off" / (id + "_wmh_pred.nii"));
        fp_on += lesion_counts(on, truth, Connectivity::C26).false_positive_components();
        fp_off += lesion_counts(off, truth, Connectivity::C26).false_positive_components();
    }
    return {fp_on < fp_off, static_cast<double>(fp_on), "on < off (" + std::to_string(fp_off) + ")",
            "false-positive lesion components over " + std::to_string(cases.size()) +
                " held-out cases: confinement on " + std::to_string(fp_on) + ", off " + std::to_string(fp_off)};
}

Outcome ablation(PhantomRun& run) {
    run.ensure_ablation();
    const json report = run.read_json("ablation.json");
    std::map<std::string, double> dice_of;
    std::string detail;
    bool complete = true;
    for (const auto& v : report.at("variants")) {
        const std::string name = v.at("name");
        dice_of[name] = v.at("validation_dice");
        complete = complete && v.contains("mean_lesion_f1") && v.at("mean_lesion_f1").is_number();
        detail += name + " Dice " + fmt(dice_of[name]) + ", lesion F1 " + fmt(v.at("mean_lesion_f1").get<double>()) +
                  "; ";
    }
    const bool paired = dice_of.size() == 2 && dice_of.count("unet") && dice_of.count("resunet");
    double worst = 1.0;
    for (const auto& [name, d] : dice_of) worst = std::min(worst, d);
    return {paired && complete && worst >= 0.85, worst, "both variants Dice >= 0.85", detail};
}

// Lists files under `root` by relative path.
std::map<std::string, fs::path> tree(const fs::path& root) {
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = e.path();
    }
    return out;
}

Outcome determinism(PhantomRun& first, const fs::path& second_root) {
    first.ensure_all();
    if (fs::exists(second_root)) fs::remove_all(second_root);
    PhantomRun second(second_root);
    second.ensure_all();
    const auto a = tree(first.root()), b = tree(second.root());
    std::size_t differing = 0, checkpoints = 0;
    std::string detail;
    for (const auto& [rel, path] : a) {
        const auto it = b.find(rel);
        if (it == b.end() || slurp(path) != slurp(it->second)) {
            ++differing;
            if (differing <= 5) detail += rel + " differs; ";
        }
        if (path.extension() == ".ckpt") ++checkpoints;
    }
    for (const auto& [rel, path] : b) {
        if (!a.count(rel)) {
            ++differing;
            detail += rel + " only in the rerun; ";
        }
    }
    detail += std::to_string(a.size()) + " files compared, " + std::to_string(checkpoints) + " checkpoints";
    return {differing == 0 && checkpoints >= 2, static_cast<double>(differing), "0 differing files", detail};
}

// ---------------------------------------------------------------- driver

std::set<int> select(const std::vector<Criterion>& all, const std::string& selector) {
    static const std::map<std::string, std::vector<int>> aliases{
        {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
        {"fast", {1, 2, 3, 4, 5, 10}},
        {"training", {6, 7, 8, 9}},
    };
    std::set<int> chosen;
    std::stringstream ss(selector);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        if (const auto it = aliases.find(token); it != aliases.end()) {
            chosen.insert(it->second.begin(), it->second.end());
            continue;
        }
        bool matched = false;
        for (const auto& c : all) {
            if (c.group == token || std::to_string(c.id) == token) {
                chosen.insert(c.id);
                matched = true;
            }
        }
        if (!matched) throw std::invalid_argument("unknown selector '" + token + "'");
    }
    return chosen;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite for the WMH segmentation pipeline", "wmhseg_acceptance"};
    std::string selector = "all";
    std::string json_path;
    std::string work_dir;
    bool keep = false;
    bool list = false;
    app.add_option("--select", selector,
                   "comma-separated criterion ids or groups: all, fast, training, gradient, residual, loss, "
                   "metrics, rank, pipeline, confinement, ablation, determinism, io");
    app.add_option("--json", json_path, "write the report as JSON to this path");
    app.add_option("--work", work_dir, "scratch directory for phantom runs");
    app.add_flag("--keep", keep, "keep the scratch directory");
    app.add_flag("--list", list, "list criteria and exit");
    CLI11_PARSE(app, argc, argv);

    const fs::path work = work_dir.empty()
                              ? fs::temp_directory_path() / ("wmhseg_acceptance_" + std::to_string(::getpid()))
                              : fs::path(work_dir);
    fs::create_directories(work);
    PhantomRun run(fs::absolute(work) / "run_a");

    const std::vector<Criterion> criteria{
        {1, "gradient", "analytic gradients match central differences", gradient_correctness},
        {2, "residual", "zeroed residual path reduces to the skip connection", residual_identity},
        {3, "loss", "weighted cross-entropy and beta", loss_correctness},
        {4, "metrics", "metrics agree with brute-force oracles", metric_oracles},
        {5, "rank", "rank formula on the published challenge tables", rank_formula},
        {6, "pipeline", "phantom train-wm, train-wmh, predict", [&] { return end_to_end(run); }},
        {7, "confinement", "white-matter confinement removes false-positive lesions",
         [&] { return confinement(run); }},
        {8, "ablation", "plain U-Net and ResU-Net under identical seeds", [&] { return ablation(run); }},
        {9, "determinism", "rerun with identical seeds is bit-identical",
         [&] { return determinism(run, fs::absolute(work) / "run_b"); }},
        {10, "io", "NIfTI round trip and malformed headers", [&] { return nifti_io(work / "io"); }},
    };

    if (list) {
        for (const auto& c : criteria) std::cout << c.id << '\t' << c.group << '\t' << c.title << '\n';
        return 0;
    }

    std::set<int> chosen;
    try {
        chosen = select(criteria, selector);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    std::vector<Result> results;
    bool all_pass = true;
    for (const auto& c : criteria) {
        Result r;
        r.criterion = &c;
        if (!chosen.count(c.id)) {
            r.status = "skipped";
        } else {
            const auto t0 = Clock::now();
            try {
                r.outcome = c.run();
                r.status = r.outcome.pass ? "pass" : "fail";
            } catch (const std::exception& e) {
                r.status = "error";
                r.error = e.what();
            }
            r.runtime_s = seconds_since(t0);
            all_pass = all_pass && r.status == "pass";
        }
        if (r.status != "skipped") {
            std::string verdict = r.status;
            std::transform(verdict.begin(), verdict.end(), verdict.begin(), ::toupper);
            std::cout << "criterion " << c.id << " [" << c.group << "] " << verdict;
            if (r.status == "error") {
                std::cout << " error=\"" << r.error << "\"";
            } else {
                std::cout << " measured=" << fmt(r.outcome.measured) << " tolerance=\"" << r.outcome.tolerance
                          << "\"";
            }
            std::cout << " runtime=" << fmt(r.runtime_s, 4) << "s | " << c.title;
            if (!r.outcome.detail.empty()) std::cout << " | " << r.outcome.detail;
            std::cout << std::endl;
        }
        results.push_back(std::move(r));
    }

    std::size_t ran = 0, passed = 0;
    for (const auto& r : results) {
        if (r.status == "skipped") continue;
        ++ran;
        if (r.status == "pass") ++passed;
    }
    std::cout << "acceptance: " << passed << "/" << ran << " selected criteria passed" << std::endl;

    if (!json_path.empty()) {
        json arr = json::array();
        for (const auto& r : results) {
            json j{{"id", r.criterion->id},
                   {"group", r.criterion->group},
                   {"title", r.criterion->title},
                   {"status", r.status},
                   {"runtime_s", r.runtime_s}};
            if (r.status == "pass" || r.status == "fail") {
                j["pass"] = r.outcome.pass;
                j["measured"] = r.outcome.measured;
                j["tolerance"] = r.outcome.tolerance;
                j["detail"] = r.outcome.detail;
            }
            if (r.status == "error") j["error"] = r.error;
            arr.push_back(j);
        }
        std::ofstream(json_path) << json{{"schema", "wmhseg-acceptance-report"},
                                         {"schema_version", 1},
                                         {"selector", selector},
                                         {"pass", all_pass},
                                         {"criteria", arr}}
                                        .dump(2)
                                 << '\n';
    }

    if (!keep && work_dir.empty()) fs::remove_all(work);
    return all_pass ? 0 : 1;
}
