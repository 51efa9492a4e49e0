#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support/temp_dir.hpp"
#include "wmhseg/cli.hpp"
#include "wmhseg/phantom.hpp"

using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

// Runs the real executable so exit codes and stream handling are observed
// exactly as a shell sees them.
Run run(const testutil::TempDir& dir, const std::vector<std::string>& args) {
    std::string cmd = quote(WMHSEG_CLI_PATH);
    for (const auto& a : args) cmd += ' ' + quote(a);
    cmd += " >" + quote((dir / "stdout.txt").string()) + " 2>" + quote((dir / "stderr.txt").string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

json report(const std::filesystem::path& p) { return json::parse(slurp(p)); }

std::string small_phantom_json() {
    wmhseg::PhantomConfig c;
    c.dims = {32, 32, 3};
    c.brain_radii = {14.0, 12.0, 2.5};
    c.wm_radii = {10.0, 8.0, 2.0};
    c.center_jitter = 1.0;
    c.min_lesions = 1;
    c.max_lesions = 2;
    c.min_lesion_radius = 2.0;
    c.max_lesion_radius = 2.5;
    c.min_confounders = 0;
    c.max_confounders = 1;
    c.min_confounder_radius = 1.0;
    c.max_confounder_radius = 1.0;
    c.confounder_margin = 1;
    return c.to_json();
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("config text expands to flags") {
        CHECK(wmhseg::config_file_arguments("# comment\nepochs = 3\n\n  learning_rate=0.5   # trailing\n") ==
              std::vector<std::string>{"--epochs", "3", "--learning_rate", "0.5"});
        CHECK(wmhseg::config_file_arguments("").empty());
        CHECK_THROWS(wmhseg::config_file_arguments("epochs 3\n"));
        CHECK_THROWS(wmhseg::config_file_arguments(" = 3\n"));
    }

    TEST_CASE("a missing config file is a usage error") {
        const testutil::TempDir dir("cli_cfg");
        CHECK(run(dir, {"phantom", "--config", (dir / "missing.cfg").string(), "--out", (dir / "d").string()}).code ==
              wmhseg::kExitUsageError);
    }

    TEST_CASE("usage errors exit with 2") {
        const testutil::TempDir dir("cli_usage");
        CHECK(run(dir, {}).code == wmhseg::kExitUsageError);
        CHECK(run(dir, {"no-such-command"}).code == wmhseg::kExitUsageError);
        CHECK(run(dir, {"phantom"}).code == wmhseg::kExitUsageError);
        CHECK(run(dir, {"phantom", "--out", (dir / "d").string(), "--cases", "many"}).code ==
              wmhseg::kExitUsageError);
        CHECK(run(dir, {"evaluate", "--pred", "a.nii", "--gt", "b.nii", "--connectivity", "5"}).code ==
              wmhseg::kExitUsageError);
        CHECK(run(dir, {"--help"}).code == wmhseg::kExitOk);
    }

    TEST_CASE("runtime errors exit with 1 and name the failing stage") {
        const testutil::TempDir dir("cli_runtime");
        const Run r = run(dir, {"evaluate", "--pred", (dir / "nope.nii").string(), "--gt",
                                (dir / "nope.nii").string(), "--report", (dir / "r.json").string()});
        CHECK(r.code == wmhseg::kExitRuntimeError);
        const json j = report(dir / "r.json");
        CHECK(j.at("status") == "error");
        CHECK(j.at("error").at("stage").get<std::string>().size() > 0);
        CHECK(r.err.find(j.at("error").at("stage").get<std::string>()) != std::string::npos);
    }

    TEST_CASE("phantom twice with the same seed is byte identical") {
        const testutil::TempDir dir("cli_phantom");
        std::ofstream(dir / "ph.json") << small_phantom_json();
        for (const char* name : {"a", "b"}) {
            const Run r = run(dir, {"phantom", "--cases", "3", "--seed", "4", "--phantom_config",
                                    (dir / "ph.json").string(), "--out", (dir / name).string(), "--report",
                                    (dir / (std::string(name) + ".json")).string()});
            REQUIRE(r.code == 0);
        }
        for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
            CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
        }
        const json a = report(dir / "a.json"), b = report(dir / "b.json");
        CHECK(a.at("schema") == "wmhseg-run-report");
        CHECK(a.at("schema_version") == 1);
        CHECK(a.at("status") == "ok");
        CHECK(a.at("results").at("dataset_hash") == b.at("results").at("dataset_hash"));
        CHECK(a.at("config").at("seed") == "4");
    }

    TEST_CASE("evaluate on identical masks gives dice 1") {
        const testutil::TempDir dir("cli_eval");
        std::ofstream(dir / "ph.json") << small_phantom_json();
        REQUIRE(run(dir, {"phantom", "--cases", "1", "--phantom_config", (dir / "ph.json").string(), "--out",
                          (dir / "d").string()})
                    .code == 0);
        const std::string m = (dir / "d" / "case_000_wmh.nii").string();
        const Run r = run(dir, {"evaluate", "--pred", m, "--gt", m, "--out", (dir / "m.csv").string(), "--report",
                                (dir / "r.json").string()});
        REQUIRE(r.code == 0);
        const json j = report(dir / "r.json");
        CHECK(j.at("results").at("summary").at("dice") == 1.0);
        CHECK(j.at("results").at("summary").at("h95_mm") == 0.0);
        CHECK(slurp(dir / "m.csv").rfind("case_id,dice", 0) == 0);
    }

    TEST_CASE("rank on the unseen-scanner table puts nih_cidi_2 first on H95") {
        const testutil::TempDir dir("cli_rank");
        std::ofstream(dir / "t2.csv") << "team,dice,h95_mm,avd_percent,lesion_recall,lesion_f1\n"
                                         "sysu_media,0.74,11.0,26.2,0.87,0.72\n"
                                         "nih_cidi_2,0.70,9.7,21.9,0.79,0.68\n"
                                         "cain,0.74,14.1,28.4,0.82,0.66\n"
                                         "nic-vicorob,0.71,13.5,56.3,0.81,0.62\n"
                                         "nlp_logix,0.68,13.0,27.9,0.66,0.73\n";
        const Run r = run(dir, {"rank", "--summaries", (dir / "t2.csv").string(), "--out",
                                (dir / "rank.csv").string(), "--report", (dir / "r.json").string()});
        REQUIRE(r.code == 0);
        bool found = false;
        const json j = report(dir / "r.json");
        for (const auto& t : j.at("results").at("ranking").at("teams")) {
            if (t.at("team") == "nih_cidi_2") {
                found = true;
                CHECK(t.at("h95_rank") == 0.0);
                CHECK(t.at("avd_rank") == 0.0);
            }
        }
        CHECK(found);
        CHECK(slurp(dir / "rank.csv").find("nih_cidi_2,") != std::string::npos);
    }

    TEST_CASE("evaluate summaries from two teams feed rank") {
        const testutil::TempDir dir("cli_eval_rank");
        std::ofstream(dir / "ph.json") << small_phantom_json();
        REQUIRE(run(dir, {"phantom", "--cases", "2", "--phantom_config", (dir / "ph.json").string(), "--out",
                          (dir / "d").string()})
                    .code == 0);
        const std::string gt = (dir / "d" / "case_000_wmh.nii").string();
        const std::string other = (dir / "d" / "case_001_wmh.nii").string();
        REQUIRE(run(dir, {"evaluate", "--pred", gt, "--gt", gt, "--team", "exact", "--summary_out",
                          (dir / "a.csv").string()})
                    .code == 0);
        // A prediction taken from another case overlaps poorly but stays defined.
        REQUIRE(run(dir, {"evaluate", "--pred", other, "--gt", gt, "--team", "shifted", "--summary_out",
                          (dir / "b.csv").string()})
                    .code == 0);
        REQUIRE(run(dir, {"rank", "--summaries", (dir / "a.csv").string(), "--summaries", (dir / "b.csv").string(),
                          "--report", (dir / "r.json").string()})
                    .code == 0);
        const json j = report(dir / "r.json");
        const auto& teams = j.at("results").at("ranking").at("teams");
        REQUIRE(teams.size() == 2);
        for (const auto& t : teams) {
            if (t.at("team") == "exact") CHECK(t.at("overall_rank") == 0.0);
            if (t.at("team") == "shifted") CHECK(t.at("dice_rank") == 1.0);
        }
    }

    TEST_CASE("command-line flags override config-file values") {
        const testutil::TempDir dir("cli_override");
        std::ofstream(dir / "ph.json") << small_phantom_json();
        std::ofstream(dir / "run.cfg") << "cases = 2\nseed = 9\n";
        REQUIRE(run(dir, {"phantom", "--config", (dir / "run.cfg").string(), "--cases", "1", "--phantom_config",
                          (dir / "ph.json").string(), "--out", (dir / "d").string(), "--report",
                          (dir / "r.json").string()})
                    .code == 0);
        const json j = report(dir / "r.json");
        CHECK(j.at("results").at("cases").size() == 1);
        CHECK(j.at("config").at("seed") == "9");
        CHECK(j.at("config").at("cases") == "1");
    }

    TEST_CASE("gradcheck command passes") {
        const testutil::TempDir dir("cli_grad");
        const Run r = run(dir, {"gradcheck", "--report", (dir / "r.json").string()});
        CHECK(r.code == 0);
        CHECK(report(dir / "r.json").at("results").at("pass") == true);
    }

    TEST_CASE("train, predict and evaluate chain end to end") {
        const testutil::TempDir dir("cli_chain");
        std::ofstream(dir / "ph.json") << small_phantom_json();
        const std::string data = (dir / "d").string();
        REQUIRE(run(dir, {"phantom", "--cases", "3", "--phantom_config", (dir / "ph.json").string(), "--out", data})
                    .code == 0);
        const std::vector<std::string> quick{"--epochs", "1", "--max_iterations", "2", "--base_width", "2",
                                             "--batch_size", "2"};
        std::vector<std::string> wm{"train-wm", "--data", data, "--out", (dir / "wm.ckpt").string()};
        wm.insert(wm.end(), quick.begin(), quick.end());
        REQUIRE(run(dir, wm).code == 0);
        std::vector<std::string> wmh{"train-wmh", "--data", data, "--out", (dir / "wmh.ckpt").string(), "--depth",
                                     "2", "--history", (dir / "h.csv").string()};
        wmh.insert(wmh.end(), quick.begin(), quick.end());
        REQUIRE(run(dir, wmh).code == 0);
        CHECK(slurp(dir / "h.csv").size() > 0);

        auto predict = [&](const std::string& out, const std::string& threads) {
            return run(dir, {"predict", "--data", data, "--wm_model", (dir / "wm.ckpt").string(), "--wmh_model",
                             (dir / "wmh.ckpt").string(), "--out", out, "--threads", threads, "--threshold", "0.5",
                             "--report", (dir / "p.json").string()});
        };
        REQUIRE(predict((dir / "p1").string(), "1").code == 0);
        CHECK(report(dir / "p.json").at("results").contains("pooled_dice"));
        REQUIRE(predict((dir / "p3").string(), "3").code == 0);
        for (const char* id : {"case_000", "case_001", "case_002"}) {
            const std::string f = std::string(id) + "_wmh_pred.nii";
            CHECK(slurp(dir / "p1" / f) == slurp(dir / "p3" / f));
            CHECK(std::filesystem::exists(dir / "p1" / (std::string(id) + "_report.json")));
        }
        const Run e = run(dir, {"evaluate", "--pred", (dir / "p1" / "case_000_wmh_pred.nii").string(), "--gt",
                                data + "/case_000_wmh.nii"});
        CHECK(e.code == 0);
    }
}
