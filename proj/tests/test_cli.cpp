#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
    const auto dir = testutil::fresh_dir("cli_out");
    const fs::path capture = dir / "capture.txt";
    const std::string cmd =
        std::string(BDLAB_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WEXITSTATUS(rc);
    std::ifstream in(capture);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_small_config(const fs::path& dir) {
    const fs::path cfg = dir / "small.ini";
    std::ofstream out(cfg);
    out << "[model]\nhidden_dim = 6\ntrunk_layers = 2\ntext_vocab = 12\ncode_vocab = 16\n"
           "adapter_rank = 2\ngen_tokens = 8\nseed = 7\n"
           "[data]\nunderstanding_pairs = 6\ngeneration_pairs = 5\ncontext_length = 4\n"
           "text_len_min = 5\ntext_len_max = 8\nseed = 11\n"
           "[train]\nsteps = 6\neval_pairs = 4\nseeds = 1,2\n"
           "[diagnostics]\nn_batches = 5\n";
    return cfg;
}

}  // namespace

TEST_CASE("gen-data writes identical bytes for identical seeds", "[cli]") {
    const auto dir = testutil::fresh_dir("cli_gen");
    const auto cfg = write_small_config(dir);
    const auto out1 = dir / "a.jsonl";
    const auto out2 = dir / "b.jsonl";

    CmdResult r1 = run_cli("gen-data --config " + cfg.string() + " --out " + out1.string());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r1.output.find("6 understanding + 5 generation") != std::string::npos);
    CmdResult r2 = run_cli("gen-data --config " + cfg.string() + " --out " + out2.string());
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(out1) == slurp(out2));
}

TEST_CASE("invalid informativeness exits nonzero naming the field", "[cli]") {
    const auto dir = testutil::fresh_dir("cli_badkappa");
    const fs::path cfg = dir / "bad.ini";
    std::ofstream(cfg) << "[data]\ninformativeness_understanding = 2\n";
    const CmdResult r = run_cli("gen-data --config " + cfg.string() + " --out " +
                                (dir / "x.jsonl").string());
    REQUIRE(r.exit_code != 0);
    REQUIRE(r.output.find("informativeness") != std::string::npos);
}

TEST_CASE("diagnose in synthetic-vector mode emits analytic columns", "[cli]") {
    const auto dir = testutil::fresh_dir("cli_diag");
    const CmdResult r = run_cli("diagnose --synthetic-vectors --rho 0.1 --cos 0 --dim 64 "
                                "--n-batches 5 --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "diagnostics.csv");
    REQUIRE(csv.find("batch,cos_ug,norm_u,norm_g,rho,exact_rel_increase,quad_approx,angle_rad") == 0);
    REQUIRE(csv.find("0.0049875") != std::string::npos);   // sqrt(1.01) - 1
    REQUIRE(csv.find("0.0996686") != std::string::npos);   // atan(0.1)
    REQUIRE(fs::exists(dir / "diagnostics.json"));
}

TEST_CASE("train and plot produce a complete run directory", "[cli]") {
    const auto dir = testutil::fresh_dir("cli_train");
    const auto cfg = write_small_config(dir);
    const CmdResult r = run_cli("train --config " + cfg.string() + " --strategy naive_joint " +
                                "--seed 1 --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    const fs::path run_dir = dir / "runs" / "naive_joint_seed1";
    REQUIRE(fs::exists(run_dir / "trajectory.csv"));
    REQUIRE(fs::exists(run_dir / "cosine.svg"));

    const std::string svg_before = slurp(run_dir / "cosine.svg");
    const CmdResult p = run_cli("plot --run " + run_dir.string());
    REQUIRE(p.exit_code == 0);
    REQUIRE(slurp(run_dir / "cosine.svg") == svg_before);  // re-render is byte-stable
}

TEST_CASE("report on an empty directory fails with a clear message", "[cli]") {
    const auto dir = testutil::fresh_dir("cli_report_empty");
    fs::create_directories(dir / "runs");
    const CmdResult r = run_cli("report --runs " + (dir / "runs").string() + " --out " +
                                dir.string());
    REQUIRE(r.exit_code != 0);
    REQUIRE(r.output.find("no runs found") != std::string::npos);
}

TEST_CASE("sweep produces one manifest per strategy-seed cell", "[cli][slow]") {
    const auto dir = testutil::fresh_dir("cli_sweep");
    const auto cfg = write_small_config(dir);
    const CmdResult r =
        run_cli("sweep --config " + cfg.string() +
                " --strategy understanding_only,generation_only --jobs 2 --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(dir / "runs"))
        if (fs::exists(e.path() / "manifest.json")) ++manifests;
    REQUIRE(manifests == 4);  // 2 strategies x 2 seeds

    // report over the sweep emits both method rows and the post-hoc rows
    const CmdResult rep = run_cli("report --runs " + (dir / "runs").string() + " --out " +
                                  dir.string());
    REQUIRE(rep.exit_code == 0);
    const std::string text = slurp(dir / "report.txt");
    REQUIRE(text.find("understanding_only") != std::string::npos);
    REQUIRE(text.find("separate_adapter") != std::string::npos);
    REQUIRE(text.find("non-deployable") != std::string::npos);
    REQUIRE(fs::exists(dir / "report.json"));
}
