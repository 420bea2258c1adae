// bdlab command-line entry point: data generation, gradient diagnostics,
// training, sweeps, calibration, reporting, and SVG trajectory plots.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bdlab/bundle.hpp"
#include "bdlab/checkpoint.hpp"
#include "bdlab/data.hpp"
#include "bdlab/diagnostics.hpp"
#include "bdlab/report.hpp"
#include "bdlab/runner.hpp"

namespace fs = std::filesystem;
using namespace bdlab;

namespace {

std::string default_out_root() {
    if (const char* env = std::getenv("BDLAB_OUT"); env != nullptr && *env != '\0') return env;
    return "bdlab_out";
}

struct CommonFlags {
    std::string config_path;
    std::string out;
    long seed = -1;  // -1: keep config value
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "configuration file (key = value with [sections])")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out, "output path (BDLAB_OUT overrides the default root)");
    cmd->add_option("--seed", flags.seed, "seed override");
}

json dataset_header(const ConfigBundle& b) {
    return json{{"model", b.model},
                {"data_understanding", b.data_understanding},
                {"data_generation", b.data_generation}};
}

int cmd_gen_data(const CommonFlags& flags) {
    ConfigBundle bundle = load_bundle(flags.config_path);
    if (flags.seed >= 0) {
        bundle.data_understanding.seed = static_cast<std::uint64_t>(flags.seed);
        bundle.data_generation.seed = derive_seed(static_cast<std::uint64_t>(flags.seed), 0x9);
    }
    bundle.validate();
    const fs::path out = flags.out.empty()
                             ? fs::path(default_out_root()) / "datasets" / "pairs.jsonl"
                             : fs::path(flags.out);
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());

    auto und = generate_understanding_pairs(bundle.data_understanding, bundle.model);
    auto gen = generate_generation_pairs(bundle.data_generation, bundle.model);
    std::vector<PreferencePair> all = und;
    all.insert(all.end(), gen.begin(), gen.end());
    write_pairs_jsonl(out.string(), all, dataset_header(bundle));
    std::cout << "wrote " << und.size() << " understanding + " << gen.size()
              << " generation pairs to " << out.string() << "\n";
    return 0;
}

struct DiagnoseFlags {
    int n_batches = -1;
    bool synthetic = false;
    double rho = 0.1;
    double cos = 0.0;
    int dim = 4096;
    bool include_heads = false;
    std::string data_path;
};

int cmd_diagnose(const CommonFlags& flags, const DiagnoseFlags& dflags, bool calibrate_mode) {
    ConfigBundle bundle = load_bundle(flags.config_path);
    if (flags.seed >= 0) bundle.diagnostics.seed = static_cast<std::uint64_t>(flags.seed);
    if (dflags.n_batches >= 0) bundle.diagnostics.n_batches = dflags.n_batches;
    bundle.diagnostics.include_heads = dflags.include_heads || bundle.diagnostics.include_heads;
    bundle.validate();

    const fs::path out_dir =
        flags.out.empty() ? fs::path(default_out_root()) / "diagnostics" : fs::path(flags.out);
    fs::create_directories(out_dir);

    DiagnosticsRun run;
    if (dflags.synthetic) {
        run = synthetic_diagnostics(bundle.diagnostics.n_batches, dflags.dim, dflags.rho,
                                    dflags.cos, bundle.diagnostics.seed);
    } else {
        ModelState st = init_model(bundle.model);
        Datasets data;
        if (!dflags.data_path.empty()) {
            DatasetFile file = read_pairs_jsonl(dflags.data_path);
            data.understanding = file.task_pairs(Task::understanding);
            data.generation = file.task_pairs(Task::generation);
        } else {
            data = make_train_datasets(bundle);
        }
        run = collect_batch_diagnostics(st, data.understanding, data.generation,
                                        bundle.diagnostics.n_batches, bundle.train.dpo,
                                        bundle.diagnostics);
    }

    const fs::path csv = out_dir / "diagnostics.csv";
    const fs::path js = out_dir / (calibrate_mode ? "calibration.json" : "diagnostics.json");
    write_diagnostics_csv(run, csv.string());
    json summary = diagnostics_summary_json(run);
    if (calibrate_mode && !summary.contains("calibration"))
        throw DomainError("calibration requires at least 3 batches");
    std::ofstream out(js, std::ios::binary);
    if (!out) throw IoError("cannot open " + js.string() + " for writing");
    out << summary.dump(2) << "\n";
    std::cout << "wrote " << run.records.size() << " diagnostic rows to " << csv.string()
              << " and summary to " << js.string() << "\n";
    return 0;
}

struct TrainFlags {
    std::string strategy;
    double beta = -1.0;
};

int cmd_train(const CommonFlags& flags, const TrainFlags& tflags) {
    ConfigBundle bundle = load_bundle(flags.config_path);
    if (!tflags.strategy.empty())
        bundle.train.balancing.strategy = strategy_from_string(tflags.strategy);
    if (tflags.beta > 0.0) bundle.train.dpo.beta = tflags.beta;
    bundle.validate();

    const std::uint64_t seed =
        flags.seed >= 0 ? static_cast<std::uint64_t>(flags.seed) : bundle.train.seeds.front();
    const fs::path out_root =
        flags.out.empty() ? fs::path(default_out_root()) : fs::path(flags.out);

    RunSpec spec;
    spec.strategy = bundle.train.balancing.strategy;
    spec.seed = seed;
    spec.beta = bundle.train.dpo.beta;
    spec.bundle = bundle;
    spec.run_id = std::string(to_string(spec.strategy)) + "_seed" + std::to_string(seed);

    fs::create_directories(out_root / "datasets");
    const Datasets data = make_train_datasets(bundle);
    const EvalSets eval = make_eval_sets(bundle);
    const RunManifest m = run_training(spec, data, eval, out_root / "runs" / spec.run_id);
    std::cout << "run " << m.run_id << " complete; artifacts under "
              << (out_root / "runs" / spec.run_id).string() << "\n";
    return 0;
}

struct SweepFlags {
    std::vector<std::string> strategies;
    std::vector<double> betas;
    int jobs = 1;
};

int cmd_sweep(const CommonFlags& flags, const SweepFlags& sflags) {
    ConfigBundle bundle = load_bundle(flags.config_path);
    if (flags.seed >= 0) {
        // Seed override shifts the whole seed list deterministically.
        bundle.train.seeds.clear();
        for (std::uint64_t i = 0; i < 3; ++i)
            bundle.train.seeds.push_back(static_cast<std::uint64_t>(flags.seed) + i);
    }
    bundle.validate();
    SweepOptions opts;
    if (!sflags.strategies.empty()) {
        opts.strategies.clear();
        for (const std::string& s : sflags.strategies)
            opts.strategies.push_back(strategy_from_string(s));
    }
    opts.betas = sflags.betas;
    opts.jobs = sflags.jobs;

    const fs::path out_root =
        flags.out.empty() ? fs::path(default_out_root()) : fs::path(flags.out);
    const auto manifests = run_sweep(bundle, opts, out_root);
    std::cout << "sweep complete: " << manifests.size() << " runs under "
              << (out_root / "runs").string() << "\n";
    return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& runs_dir_flag) {
    const fs::path out_root =
        flags.out.empty() ? fs::path(default_out_root()) : fs::path(flags.out);
    const fs::path runs_dir =
        runs_dir_flag.empty() ? out_root / "runs" : fs::path(runs_dir_flag);
    ConfigBundle bundle = load_bundle(flags.config_path);
    const ReportDocument doc = report_from_runs(runs_dir, bundle.soup_lambdas);
    write_report(doc, out_root);
    std::cout << doc.text;
    std::cout << "wrote report.json and report.txt under " << out_root.string() << "\n";
    return 0;
}

int cmd_plot(const CommonFlags& flags, const std::string& runs_dir_flag,
             const std::string& run_dir_flag) {
    std::vector<fs::path> run_dirs;
    if (!run_dir_flag.empty()) {
        run_dirs.push_back(run_dir_flag);
    } else {
        const fs::path runs_dir = runs_dir_flag.empty()
                                      ? fs::path(flags.out.empty() ? default_out_root() : flags.out) / "runs"
                                      : fs::path(runs_dir_flag);
        if (!fs::exists(runs_dir)) throw DomainError("no runs found in " + runs_dir.string());
        for (const auto& entry : fs::directory_iterator(runs_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "trajectory.csv"))
                run_dirs.push_back(entry.path());
        std::sort(run_dirs.begin(), run_dirs.end());
        if (run_dirs.empty()) throw DomainError("no runs found in " + runs_dir.string());
    }
    for (const fs::path& dir : run_dirs) {
        const auto traj = read_trajectory_csv((dir / "trajectory.csv").string());
        plot_trajectory(traj, dir);
        std::cout << "plotted " << dir.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale multi-task preference-optimization laboratory"};
    app.require_subcommand(1);

    CommonFlags gen_flags, diag_flags_c, cal_flags_c, train_flags_c, sweep_flags_c, report_flags_c,
        plot_flags_c;
    DiagnoseFlags dflags, cflags;
    TrainFlags tflags;
    SweepFlags sflags;
    std::string report_runs_dir, plot_runs_dir, plot_run_dir;

    CLI::App* gen = app.add_subcommand("gen-data", "generate preference-pair datasets (JSONL)");
    add_common(gen, gen_flags);

    auto add_diag_opts = [](CLI::App* cmd, DiagnoseFlags& f) {
        cmd->add_option("--n-batches", f.n_batches, "number of single-pair batches");
        cmd->add_flag("--synthetic-vectors", f.synthetic,
                      "bypass the model; constructed vectors with known cosine/ratio");
        cmd->add_option("--rho", f.rho, "synthetic magnitude ratio");
        cmd->add_option("--cos", f.cos, "synthetic cosine");
        cmd->add_option("--dim", f.dim, "synthetic vector dimension");
        cmd->add_flag("--include-heads", f.include_heads,
                      "include the generation head in the measured view");
        cmd->add_option("--data", f.data_path, "reuse an existing pairs.jsonl")
            ->check(CLI::ExistingFile);
    };

    CLI::App* diag = app.add_subcommand("diagnose", "per-batch gradient interference records");
    add_common(diag, diag_flags_c);
    add_diag_opts(diag, dflags);

    CLI::App* cal = app.add_subcommand("calibrate", "null-hypothesis calibration of cosines");
    add_common(cal, cal_flags_c);
    add_diag_opts(cal, cflags);

    CLI::App* train_cmd = app.add_subcommand("train", "one training run");
    add_common(train_cmd, train_flags_c);
    train_cmd->add_option("--strategy", tflags.strategy, "balancing strategy");
    train_cmd->add_option("--beta", tflags.beta, "DPO temperature override");

    CLI::App* sweep = app.add_subcommand("sweep", "strategies x betas x seeds");
    add_common(sweep, sweep_flags_c);
    sweep->add_option("--strategy", sflags.strategies, "subset of strategies")->delimiter(',');
    sweep->add_option("--beta", sflags.betas, "beta values")->delimiter(',');
    sweep->add_option("--jobs", sflags.jobs, "parallel runs");

    CLI::App* report = app.add_subcommand("report", "method-comparison tables from run outputs");
    add_common(report, report_flags_c);
    report->add_option("--runs", report_runs_dir, "runs directory");

    CLI::App* plot = app.add_subcommand("plot", "re-render trajectory SVG charts");
    add_common(plot, plot_flags_c);
    plot->add_option("--runs", plot_runs_dir, "runs directory");
    plot->add_option("--run", plot_run_dir, "single run directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_flags);
        if (diag->parsed()) return cmd_diagnose(diag_flags_c, dflags, false);
        if (cal->parsed()) return cmd_diagnose(cal_flags_c, cflags, true);
        if (train_cmd->parsed()) return cmd_train(train_flags_c, tflags);
        if (sweep->parsed()) return cmd_sweep(sweep_flags_c, sflags);
        if (report->parsed()) return cmd_report(report_flags_c, report_runs_dir);
        if (plot->parsed()) return cmd_plot(plot_flags_c, plot_runs_dir, plot_run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
