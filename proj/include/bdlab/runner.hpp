#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bdlab/bundle.hpp"
#include "bdlab/checkpoint.hpp"
#include "bdlab/data.hpp"
#include "bdlab/svg.hpp"
#include "bdlab/trainer.hpp"

namespace bdlab {

inline constexpr const char* kToolVersion = "bdlab 1.0.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string run_id;
    std::string status = "incomplete";
    std::string strategy;
    std::uint64_t seed = 0;
    double beta = 0.1;
    json config;
    json artifacts;  // name -> relative path (or list for plots)
    std::string tool_version = kToolVersion;
    std::string timestamp;
};

inline std::string now_timestamp() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline json manifest_to_json(const RunManifest& m) {
    return json{{"run_id", m.run_id},     {"status", m.status},
                {"strategy", m.strategy}, {"seed", m.seed},
                {"beta", m.beta},         {"config", m.config},
                {"artifacts", m.artifacts}, {"tool_version", m.tool_version},
                {"timestamp", m.timestamp}};
}

inline void write_manifest(const RunManifest& m, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << manifest_to_json(m).dump(2) << "\n";
    if (!out) throw IoError("failed while writing " + path.string());
}

inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    j.at("run_id").get_to(m.run_id);
    j.at("status").get_to(m.status);
    j.at("strategy").get_to(m.strategy);
    j.at("seed").get_to(m.seed);
    j.at("beta").get_to(m.beta);
    m.config = j.at("config");
    m.artifacts = j.at("artifacts");
    j.at("tool_version").get_to(m.tool_version);
    j.at("timestamp").get_to(m.timestamp);
    return m;
}

inline RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    in >> j;
    return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

inline std::vector<std::string> plot_trajectory(const std::vector<TrajectoryPoint>& traj,
                                                const fs::path& dir) {
    auto steps_of = [&](auto get) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(traj.size());
        for (const TrajectoryPoint& p : traj)
            pts.emplace_back(static_cast<double>(p.step), get(p));
        return pts;
    };
    const std::string blue = "#1f77b4", orange = "#ff7f0e", green = "#2ca02c", red = "#d62728";

    write_svg(render_line_chart("Gradient cosine similarity", "step", "cos(g_U, g_G)",
                                {{"cos(g_U,g_G)", blue,
                                  steps_of([](const TrajectoryPoint& p) { return p.cos_ug; })}}),
              (dir / "cosine.svg").string());
    write_svg(render_line_chart("Task weights", "step", "weight",
                                {{"w_U", blue,
                                  steps_of([](const TrajectoryPoint& p) { return p.w_u; })},
                                 {"w_G", orange,
                                  steps_of([](const TrajectoryPoint& p) { return p.w_g; })}}),
              (dir / "weights.svg").string());
    write_svg(render_line_chart("Task losses", "step", "loss (nats)",
                                {{"loss_U", green,
                                  steps_of([](const TrajectoryPoint& p) { return p.loss_u; })},
                                 {"loss_G", red,
                                  steps_of([](const TrajectoryPoint& p) { return p.loss_g; })}}),
              (dir / "task_losses.svg").string());
    write_svg(render_line_chart("Combined loss", "step", "loss (nats)",
                                {{"combined", blue,
                                  steps_of([](const TrajectoryPoint& p) { return p.loss_combined; })}}),
              (dir / "combined_loss.svg").string());
    return {"cosine.svg", "weights.svg", "task_losses.svg", "combined_loss.svg"};
}

// ---------------------------------------------------------------------------
// Evaluation sets shared across runs: held-out pairs drawn with seeds derived
// from the dataset seeds.
// ---------------------------------------------------------------------------

struct EvalSets {
    std::vector<PreferencePair> understanding;
    std::vector<PreferencePair> generation;
};

inline EvalSets make_eval_sets(const ConfigBundle& bundle) {
    DataConfig du = bundle.data_understanding;
    du.pair_count = bundle.train.eval_pairs;
    du.seed = derive_seed(du.seed, 0xe7a1);
    DataConfig dg = bundle.data_generation;
    dg.pair_count = bundle.train.eval_pairs;
    dg.seed = derive_seed(dg.seed, 0xe7a2);
    EvalSets ev;
    ev.understanding = generate_understanding_pairs(du, bundle.model);
    ev.generation = generate_generation_pairs(dg, bundle.model);
    return ev;
}

inline Datasets make_train_datasets(const ConfigBundle& bundle) {
    Datasets d;
    d.understanding = generate_understanding_pairs(bundle.data_understanding, bundle.model);
    d.generation = generate_generation_pairs(bundle.data_generation, bundle.model);
    return d;
}

// ---------------------------------------------------------------------------
// One end-to-end run
// ---------------------------------------------------------------------------

struct RunSpec {
    std::string run_id;
    Strategy strategy = Strategy::naive_joint;
    std::uint64_t seed = 1;
    double beta = 0.1;
    ConfigBundle bundle;  // strategy/beta already applied to bundle.train
};

inline json task_eval_to_json(const TaskEval& ev) {
    return json{{"mean_margin", ev.mean_margin},
                {"mean_loss", ev.mean_loss},
                {"preference_accuracy", ev.preference_accuracy},
                {"margins", ev.margins}};
}

inline json kl_to_json(const KlEstimate& kl) {
    return json{{"per_sequence", kl.per_sequence},
                {"per_sequence_se", kl.per_sequence_se},
                {"per_token", kl.per_token},
                {"mean_length", kl.mean_length},
                {"n_samples", kl.n_samples}};
}

inline double tail_mean(const std::vector<TrajectoryPoint>& traj, int window,
                        double TrajectoryPoint::* field) {
    if (traj.empty()) return 0.0;
    const std::size_t n = traj.size();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), n);
    double acc = 0.0;
    for (std::size_t i = n - w; i < n; ++i) acc += traj[i].*field;
    return acc / static_cast<double>(w);
}

// Train one configuration, then write checkpoint, trajectory, summary, plots,
// and the manifest (incomplete first, completed last).
inline RunManifest run_training(const RunSpec& spec, const Datasets& data, const EvalSets& eval,
                                const fs::path& run_dir) {
    fs::create_directories(run_dir);
    const fs::path manifest_path = run_dir / "manifest.json";
    if (fs::exists(manifest_path))
        throw IoError("run id already exists in output directory: " + spec.run_id);

    RunManifest m;
    m.run_id = spec.run_id;
    m.strategy = to_string(spec.strategy);
    m.seed = spec.seed;
    m.beta = spec.beta;
    m.config = bundle_to_json(spec.bundle);
    m.timestamp = now_timestamp();
    m.artifacts = json::object();
    write_manifest(m, manifest_path);  // status: incomplete until the run lands

    ModelConfig mc = spec.bundle.model;
    mc.seed = spec.seed;
    ModelState st = init_model(mc);

    const std::vector<double> reference_before = st.reference;
    TrainResult result = train(st, data, spec.bundle.train, spec.seed);
    if (st.reference != reference_before)
        throw StateError("reference snapshot mutated during training");

    save_checkpoint(st, (run_dir / "checkpoint.json").string());
    write_trajectory_csv(result.trajectory, (run_dir / "trajectory.csv").string());
    const auto plots = plot_trajectory(result.trajectory, run_dir);

    const DpoConfig& dpo = spec.bundle.train.dpo;
    const TaskEval eval_u = evaluate_task(st, eval.understanding, dpo);
    const TaskEval eval_g = evaluate_task(st, eval.generation, dpo);
    const KlEstimate kl_u =
        kl_to_reference(st, eval.understanding, Task::understanding, derive_seed(spec.seed, 0x6b1),
                        spec.bundle.train.kl_samples_per_context);
    const KlEstimate kl_g =
        kl_to_reference(st, eval.generation, Task::generation, derive_seed(spec.seed, 0x6b2),
                        spec.bundle.train.kl_samples_per_context);

    json summary{{"run_id", spec.run_id},
                 {"strategy", to_string(spec.strategy)},
                 {"seed", spec.seed},
                 {"beta", spec.beta},
                 {"config", m.config},
                 {"final",
                  {{"loss_u_last100", tail_mean(result.trajectory, 100, &TrajectoryPoint::loss_u)},
                   {"loss_g_last100", tail_mean(result.trajectory, 100, &TrajectoryPoint::loss_g)},
                   {"loss_combined_last100",
                    tail_mean(result.trajectory, 100, &TrajectoryPoint::loss_combined)},
                   {"w_u", result.final_weights.w_u},
                   {"w_g", result.final_weights.w_g}}},
                 {"eval",
                  {{"understanding", task_eval_to_json(eval_u)},
                   {"generation", task_eval_to_json(eval_g)}}},
                 {"kl",
                  {{"understanding", kl_to_json(kl_u)}, {"generation", kl_to_json(kl_g)}}}};
    {
        std::ofstream out(run_dir / "summary.json", std::ios::binary);
        if (!out) throw IoError("cannot open summary.json for writing");
        out << summary.dump(2) << "\n";
        if (!out) throw IoError("failed while writing summary.json");
    }

    m.artifacts = json{{"checkpoint", "checkpoint.json"},
                       {"trajectory", "trajectory.csv"},
                       {"summary", "summary.json"},
                       {"plots", plots}};
    m.status = "complete";
    m.timestamp = now_timestamp();
    write_manifest(m, manifest_path);
    return m;
}

// ---------------------------------------------------------------------------
// Sweep: strategies x betas x seeds, fanned out over a bounded worker pool.
// Each run is isolated in its own subdirectory; datasets are shared read-only.
// ---------------------------------------------------------------------------

struct SweepOptions {
    std::vector<Strategy> strategies = all_strategies();
    std::vector<double> betas;  // empty: use the bundle's beta
    int jobs = 1;
};

inline std::string format_beta_tag(double beta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", beta);
    std::string s = buf;
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

inline std::vector<RunSpec> enumerate_runs(const ConfigBundle& bundle, const SweepOptions& opts) {
    std::vector<double> betas = opts.betas;
    const bool tag_beta = !betas.empty() && betas.size() > 1;
    if (betas.empty()) betas.push_back(bundle.train.dpo.beta);
    std::vector<RunSpec> specs;
    for (Strategy strat : opts.strategies) {
        for (double beta : betas) {
            for (std::uint64_t seed : bundle.train.seeds) {
                RunSpec spec;
                spec.strategy = strat;
                spec.seed = seed;
                spec.beta = beta;
                spec.bundle = bundle;
                spec.bundle.train.balancing.strategy = strat;
                spec.bundle.train.dpo.beta = beta;
                spec.run_id = std::string(to_string(strat)) +
                              (tag_beta ? "_beta" + format_beta_tag(beta) : "") + "_seed" +
                              std::to_string(seed);
                specs.push_back(std::move(spec));
            }
        }
    }
    return specs;
}

inline std::vector<RunManifest> run_sweep(const ConfigBundle& bundle, const SweepOptions& opts,
                                          const fs::path& out_root) {
    bundle.validate();
    fs::create_directories(out_root / "datasets");
    fs::create_directories(out_root / "runs");

    const Datasets data = make_train_datasets(bundle);
    const EvalSets eval = make_eval_sets(bundle);
    {
        std::vector<PreferencePair> all = data.understanding;
        all.insert(all.end(), data.generation.begin(), data.generation.end());
        write_pairs_jsonl((out_root / "datasets" / "pairs.jsonl").string(), all,
                          json{{"model", bundle.model},
                               {"data_understanding", bundle.data_understanding},
                               {"data_generation", bundle.data_generation}});
        std::vector<PreferencePair> all_eval = eval.understanding;
        all_eval.insert(all_eval.end(), eval.generation.begin(), eval.generation.end());
        write_pairs_jsonl((out_root / "datasets" / "eval_pairs.jsonl").string(), all_eval,
                          json{{"model", bundle.model},
                               {"eval_pairs", bundle.train.eval_pairs},
                               {"role", "held-out evaluation"}});
    }

    const std::vector<RunSpec> specs = enumerate_runs(bundle, opts);
    std::vector<RunManifest> manifests(specs.size());
    std::vector<std::string> errors;
    std::mutex mu;
    std::size_t next = 0;

    auto worker = [&]() {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= specs.size()) return;
                i = next++;
            }
            try {
                manifests[i] =
                    run_training(specs[i], data, eval, out_root / "runs" / specs[i].run_id);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                errors.push_back(specs[i].run_id + ": " + e.what());
            }
        }
    };

    const int jobs = std::max(1, opts.jobs);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    if (!errors.empty()) {
        std::string msg = "sweep failed for " + std::to_string(errors.size()) + " run(s):";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw StateError(msg);
    }
    return manifests;
}

}  // namespace bdlab
