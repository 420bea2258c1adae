// Acceptance suite: one pass/fail line per criterion, every tolerance pinned
// in code. Training-dependent criteria reuse one default-configuration sweep
// (7 strategies x 3 seeds); determinism is checked by rerunning the sweep and
// comparing bytes. Exit code is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bdlab/bundle.hpp"
#include "bdlab/checkpoint.hpp"
#include "bdlab/data.hpp"
#include "bdlab/diagnostics.hpp"
#include "bdlab/report.hpp"
#include "bdlab/runner.hpp"

namespace fs = std::filesystem;
using namespace bdlab;

namespace {

constexpr double kLn2 = 0.6931471805599453;

struct Criterion {
    int number;
    std::string name;
    std::function<bool(std::string&)> run;
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ModelConfig small_model(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.hidden_dim = 6;
    cfg.trunk_layers = 2;
    cfg.text_vocab = 12;
    cfg.code_vocab = 16;
    cfg.adapter_rank = 2;
    cfg.gen_tokens = 8;
    cfg.seed = seed;
    return cfg;
}

void kick_trainable(ModelState& st, std::uint64_t seed) {
    Rng rng(seed);
    const auto& segs = st.layout.trainable_map->segments();
    for (std::size_t si = 0; si < segs.size(); ++si) {
        double* p = st.params.data() + st.layout.trainable_param_offsets[si];
        for (std::size_t k = 0; k < segs[si].size(); ++k) p[k] += rng.next_normal(0.0, 0.1);
    }
}

PreferencePair random_pair(const ModelConfig& cfg, Task task, int len, Rng& rng) {
    PreferencePair p;
    p.task = task;
    p.context.modality = Modality::text;
    for (int i = 0; i < 4; ++i)
        p.context.tokens.push_back(static_cast<int>(rng.next_int(0, cfg.text_vocab - 1)));
    const Modality mod = response_modality(task);
    const int vocab = cfg.vocab(mod);
    p.chosen.modality = mod;
    p.rejected.modality = mod;
    for (int i = 0; i < len; ++i) {
        p.chosen.tokens.push_back(static_cast<int>(rng.next_int(0, vocab - 1)));
        p.rejected.tokens.push_back(static_cast<int>(rng.next_int(0, vocab - 1)));
    }
    return p;
}

std::size_t param_index_of(const ModelState& st, std::size_t grad_index) {
    const auto& segs = st.layout.trainable_map->segments();
    for (std::size_t si = 0; si < segs.size(); ++si)
        if (grad_index >= segs[si].begin && grad_index < segs[si].end)
            return st.layout.trainable_param_offsets[si] + (grad_index - segs[si].begin);
    throw std::out_of_range("grad index");
}

// Shared state across criteria: the default-configuration sweep artifacts.
struct SweepArtifacts {
    fs::path root_a;
    fs::path root_b;
    ConfigBundle bundle;
    double mean_text_len = 0.0;
};

SweepArtifacts g_sweep;

void run_default_sweep() {
    const fs::path base = fs::current_path() / "acceptance_out";
    fs::remove_all(base);
    g_sweep.root_a = base / "sweep_a";
    g_sweep.root_b = base / "sweep_b";
    g_sweep.bundle = default_bundle();
    g_sweep.bundle.validate();

    SweepOptions opts;
    opts.jobs = std::max(1u, std::thread::hardware_concurrency());

    std::cout << "running default sweep (7 strategies x 3 seeds, twice, jobs="
              << opts.jobs << ") ..." << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    run_sweep(g_sweep.bundle, opts, g_sweep.root_a);
    run_sweep(g_sweep.bundle, opts, g_sweep.root_b);
    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::steady_clock::now() - t0);
    std::cout << "sweeps finished in " << dt.count() << " s" << std::endl;

    const DatasetFile data = read_pairs_jsonl((g_sweep.root_a / "datasets" / "pairs.jsonl").string());
    double total = 0.0;
    int n = 0;
    for (const PreferencePair& p : data.pairs)
        if (p.task == Task::understanding) {
            total += static_cast<double>(p.chosen.size());
            ++n;
        }
    g_sweep.mean_text_len = total / n;

    write_report(report_from_runs(g_sweep.root_a / "runs", g_sweep.bundle.soup_lambdas),
                 g_sweep.root_a);
    write_report(report_from_runs(g_sweep.root_b / "runs", g_sweep.bundle.soup_lambdas),
                 g_sweep.root_b);
}

json load_summary(const fs::path& root, const std::string& run_id) {
    json j;
    std::ifstream in(root / "runs" / run_id / "summary.json");
    if (!in) throw IoError("missing summary for " + run_id);
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

bool c1_gradient_correctness(std::string& detail) {
    const double step = 1e-4;
    double max_rel = 0.0;
    Rng rng(1001);
    for (int trial = 0; trial < 50; ++trial) {
        ModelState st = init_model(small_model(500 + static_cast<std::uint64_t>(trial)));
        kick_trainable(st, 900 + static_cast<std::uint64_t>(trial));
        const Task task = trial % 2 == 0 ? Task::understanding : Task::generation;
        const PreferencePair pair = random_pair(st.config, task, 5, rng);
        DpoConfig dpo;
        dpo.beta = trial % 4 == 0 ? 0.5 : 0.1;

        const bool plain = trial % 3 == 0;
        GradientVector analytic;
        if (plain) {
            analytic = backward(st, sequence_forward(st, pair.context, pair.chosen), 1.0);
        } else {
            analytic = dpo_gradient(st, pair, dpo).grad;
        }
        auto loss_at = [&]() {
            return plain ? sequence_logprob(st, pair.context, pair.chosen)
                         : dpo_loss(st, pair, dpo);
        };
        for (std::size_t gi = 0; gi < analytic.size(); ++gi) {
            const std::size_t pi = param_index_of(st, gi);
            const double saved = st.params[pi];
            st.params[pi] = saved + step;
            const double up = loss_at();
            st.params[pi] = saved - step;
            const double down = loss_at();
            st.params[pi] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double ga = analytic[gi];
            if (std::abs(ga) <= 1e-8 && std::abs(fd) <= 1e-8) continue;
            max_rel = std::max(max_rel, std::abs(ga - fd) / std::max(std::abs(ga), std::abs(fd)));
        }
    }
    detail = "max relative error " + std::to_string(max_rel) + " over 50 cases (tol 1e-4)";
    return max_rel <= 1e-4;
}

bool c2_loss_floor(std::string& detail) {
    bool ok = true;
    std::ostringstream d;

    ModelState st = init_model(small_model(77));
    kick_trainable(st, 78);
    Rng rng(79);
    PreferencePair pair = random_pair(st.config, Task::understanding, 7, rng);
    pair.rejected = pair.chosen;
    for (double beta : {0.05, 0.1, 0.5}) {
        DpoConfig dpo;
        dpo.beta = beta;
        const DpoBatchResult r = dpo_gradient(st, pair, dpo);
        if (std::abs(r.loss - kLn2) > 1e-12 || r.grad.norm() != 0.0) ok = false;
    }
    d << "identical-pair loss at ln2 (1e-12) with zero gradient";

    // step-0 losses, every strategy, default-size model on small datasets
    ConfigBundle b = default_bundle();
    b.data_understanding.pair_count = 4;
    b.data_understanding.seed = 404;
    b.data_generation.pair_count = 4;
    b.data_generation.seed = 405;
    const Datasets data = make_train_datasets(b);
    for (Strategy strat : all_strategies()) {
        ModelState m = init_model(b.model);
        TrainConfig tc = b.train;
        tc.steps = 1;
        tc.balancing.strategy = strat;
        const TrainResult tr = train(m, data, tc, 9);
        const TrajectoryPoint& p = tr.trajectory.front();
        const bool u_ok = !strategy_needs_understanding(strat) || p.loss_u == kLn2;
        const bool g_ok = !strategy_needs_generation(strat) || p.loss_g == kLn2;
        if (!u_ok || !g_ok || p.loss_combined != kLn2) {
            ok = false;
            d << "; step-0 loss deviates under " << to_string(strat);
        }
    }
    d << "; step-0 losses exactly ln2 for all 7 strategies";
    detail = d.str();
    return ok;
}

bool c3_eq7_bound(std::string& detail) {
    bool ok = true;
    std::ostringstream d;
    for (double rho : {0.05, 0.073, 0.1}) {
        const DiagnosticsRun run = synthetic_diagnostics(50, 512, rho, 0.0, 33);
        for (const DiagnosticsRecord& rec : run.records) {
            if (rec.cos_ug != 0.0) ok = false;
            const NormInteraction ni = combined_norm_check(rec.rho, rec.cos_ug);
            if (std::abs(ni.exact_relative_increase - 0.5 * rho * rho) > std::pow(rho, 4))
                ok = false;
        }
    }
    const NormInteraction at01 = combined_norm_check(0.1, 0.0);
    const double deg = at01.angle_rad * 180.0 / M_PI;
    if (std::abs(deg - 5.71) > 0.01) ok = false;
    d << "sqrt bound within rho^4 at rho in {0.05, 0.073, 0.1}; angle(0.1) = " << deg
      << " deg (5.71 +- 0.01)";
    detail = d.str();
    return ok;
}

bool c4_weight_arithmetic(std::string& detail) {
    bool ok = true;
    const auto [wu, wg] = dynamic_weights(1.0, 13.7);
    if (std::abs(wu - 0.93197) > 1e-5 || std::abs(wg - 0.06803) > 1e-5) ok = false;
    const auto [lu, lg] = length_normalized_weights(576, 50);
    if (std::abs(lu - 0.9201) > 1e-4) ok = false;

    auto map = std::make_shared<SegmentMap>(std::vector<Segment>{{"v", 0, 1}});
    GradientVector gu(map), gg(map);
    gu.mutable_values()[0] = 1.0;
    gg.mutable_values()[0] = 1.0;
    BalancingConfig cfg;
    cfg.strategy = Strategy::fixed_weight;
    cfg.fixed_w_u = 0.93;
    cfg.fixed_w_g = 0.07;
    const CombineResult r = combine(cfg, WeightState{}, 0, &gu, &gg, 1.0, 1.0);
    if (r.weights.w_u != 0.93 || r.weights.w_g != 0.07) ok = false;

    std::ostringstream d;
    d << "dynamic(1, 13.7) = (" << wu << ", " << wg << "); length(576, 50) = " << lu
      << "; fixed echo (0.93, 0.07)";
    detail = d.str();
    return ok;
}

bool c5_pcgrad(std::string& detail) {
    bool ok = true;
    Rng rng(55);
    auto map = std::make_shared<SegmentMap>(std::vector<Segment>{{"v", 0, 64}});
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        GradientVector gu(map), gg(map);
        auto vu = gu.mutable_values();
        auto vg = gg.mutable_values();
        for (std::size_t i = 0; i < 32; ++i) vu[i] = rng.next_normal(0.0, 0.1);
        for (std::size_t i = 32; i < 64; ++i) vg[i] = rng.next_normal(0.0, 1.0);
        const GradientVector sum = linear_combination(1.0, gu, 1.0, gg);
        const GradientVector pc = pcgrad_combine(gu, gg);
        double dev = 0.0;
        for (std::size_t i = 0; i < 64; ++i) dev += (pc[i] - sum[i]) * (pc[i] - sum[i]);
        worst = std::max(worst, std::sqrt(dev) / sum.norm());
    }
    if (worst > 1e-10) ok = false;

    // Hand projection per the projection equations: g_U = (1,0), g_G = (-1,1)
    // gives g~_U = (0.5, 0.5), g~_G = (0, 1), sum (0.5, 1.5). (The (0,1) sum
    // quoted in the criterion text does not follow from those equations; see
    // the decisions ledger.)
    auto map2 = std::make_shared<SegmentMap>(std::vector<Segment>{{"v", 0, 2}});
    GradientVector a(map2), b(map2);
    a.mutable_values()[0] = 1.0;
    b.mutable_values()[0] = -1.0;
    b.mutable_values()[1] = 1.0;
    const GradientVector s = pcgrad_combine(a, b);
    if (std::abs(s[0] - 0.5) > 1e-15 || std::abs(s[1] - 1.5) > 1e-15) ok = false;

    std::ostringstream d;
    d << "orthogonal no-op deviation " << worst << " (tol 1e-10); conflict case sum = (" << s[0]
      << ", " << s[1] << ")";
    detail = d.str();
    return ok;
}

bool c6_loss_replication(std::string& detail) {
    bool ok = true;
    std::ostringstream d;
    auto tail100 = [](const std::vector<TrajectoryPoint>& traj, double TrajectoryPoint::* f) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t i = traj.size() >= 100 ? traj.size() - 100 : 0; i < traj.size(); ++i) {
            acc += traj[i].*f;
            ++n;
        }
        return acc / static_cast<double>(n);
    };
    for (std::uint64_t seed : g_sweep.bundle.train.seeds) {
        const auto und = read_trajectory_csv(
            (g_sweep.root_a / "runs" / ("understanding_only_seed" + std::to_string(seed)) /
             "trajectory.csv").string());
        const auto gen = read_trajectory_csv(
            (g_sweep.root_a / "runs" / ("generation_only_seed" + std::to_string(seed)) /
             "trajectory.csv").string());
        const auto naive = read_trajectory_csv(
            (g_sweep.root_a / "runs" / ("naive_joint_seed" + std::to_string(seed)) /
             "trajectory.csv").string());
        const double lu = tail100(und, &TrajectoryPoint::loss_u);
        const double lg = tail100(gen, &TrajectoryPoint::loss_g);
        const double lc = tail100(naive, &TrajectoryPoint::loss_combined);
        const bool u_ok = lu < 0.4;
        const bool g_ok = std::abs(lg - kLn2) <= 0.02;
        const bool n_ok = std::abs(lc - kLn2) <= 0.03;
        if (!(u_ok && g_ok && n_ok)) ok = false;
        d << "seed" << seed << ": und " << lu << (u_ok ? " (<0.4 ok)" : " (FAIL <0.4)") << ", gen "
          << lg << (g_ok ? " (ln2+-0.02 ok)" : " (FAIL ln2+-0.02)") << ", naive " << lc
          << (n_ok ? " (ln2+-0.03 ok)" : " (FAIL ln2+-0.03)") << "; ";
    }
    detail = d.str();
    return ok;
}

bool c7_weight_trajectory(std::string& detail) {
    bool ok = true;
    std::ostringstream d;
    const double target =
        576.0 / (576.0 + g_sweep.mean_text_len);  // N / (N + T_bar), T_bar measured
    for (std::uint64_t seed : g_sweep.bundle.train.seeds) {
        const auto traj = read_trajectory_csv(
            (g_sweep.root_a / "runs" / ("grad_weighted_seed" + std::to_string(seed)) /
             "trajectory.csv").string());
        bool flat = true;
        for (const TrajectoryPoint& p : traj)
            if (p.step < 50 && p.w_u != 0.5) flat = false;
        const bool jumped = traj.size() > 50 && traj[50].w_u != 0.5;
        std::vector<double> post;
        for (const TrajectoryPoint& p : traj)
            if (p.step >= 200) post.push_back(p.w_u);
        const SampleSummary s = summarize(post);
        const bool std_ok = s.stddev < 0.02;
        const bool mean_ok = std::abs(s.mean - target) <= 0.03;
        if (!(flat && jumped && std_ok && mean_ok)) ok = false;
        d << "seed" << seed << ": flat@0.5 " << (flat ? "ok" : "FAIL") << ", jump@50 "
          << (jumped ? "ok" : "FAIL") << ", post-200 std " << s.stddev
          << (std_ok ? " (ok)" : " (FAIL <0.02)") << ", mean " << s.mean << " vs " << target
          << (mean_ok ? " (ok)" : " (FAIL +-0.03)") << "; ";
    }
    detail = d.str();
    return ok;
}

bool c8_token_count_monotonicity(std::string& detail) {
    std::vector<double> inv_rho;
    std::ostringstream d;
    for (int n : {144, 288, 576}) {
        ConfigBundle b = default_bundle();
        b.model.gen_tokens = n;
        b.data_understanding.text_len_min = 64;
        b.data_understanding.text_len_max = 64;
        b.data_understanding.pair_count = 200;
        b.data_generation.pair_count = 200;
        const ModelState st = init_model(b.model);
        const Datasets data = make_train_datasets(b);
        DiagnosticsConfig diag;
        diag.seed = 8;
        const DiagnosticsRun run = collect_batch_diagnostics(
            st, data.understanding, data.generation, 200, b.train.dpo, diag);
        double mean_inv = 0.0;
        for (const DiagnosticsRecord& rec : run.records) mean_inv += rec.norm_g / rec.norm_u;
        mean_inv /= static_cast<double>(run.records.size());
        inv_rho.push_back(mean_inv);
        d << "N=" << n << ": 1/rho " << mean_inv << "; ";
    }
    const bool ok = inv_rho[0] < inv_rho[1] && inv_rho[1] < inv_rho[2];
    d << (ok ? "strictly increasing" : "NOT strictly increasing");
    detail = d.str();
    return ok;
}

bool c9_null_calibration(std::string& detail) {
    std::ostringstream d;
    ConfigBundle b = default_bundle();
    const ModelState st = init_model(b.model);
    const Datasets data = make_train_datasets(b);
    DiagnosticsConfig diag;
    diag.seed = 9;
    const DiagnosticsRun run =
        collect_batch_diagnostics(st, data.understanding, data.generation, 200, b.train.dpo, diag);
    const CalibrationReport cal = null_calibration(run);
    const bool order_ok = cal.intra_understanding.mean > cal.inter.mean &&
                          cal.intra_u_vs_inter.p < 0.05;
    d << "model mode: intra-U " << cal.intra_understanding.mean << " vs inter " << cal.inter.mean
      << ", Welch p " << cal.intra_u_vs_inter.p << (order_ok ? " (ok)" : " (FAIL)");

    const DiagnosticsRun synth = synthetic_diagnostics(200, 4096, 0.1, 0.0, 10);
    const CalibrationReport scal = null_calibration(synth);
    const bool null_ok = scal.inter_vs_zero.p > 0.05;
    d << "; synthetic orthogonal: one-sample p " << scal.inter_vs_zero.p
      << (null_ok ? " (ok)" : " (FAIL > 0.05)");
    detail = d.str();
    return order_ok && null_ok;
}

bool c10_kl_direction(std::string& detail) {
    bool ok = true;
    std::ostringstream d;

    // fresh-init KL is exactly zero
    ConfigBundle b = default_bundle();
    b.data_understanding.pair_count = 8;
    b.data_understanding.seed = 700;
    const ModelState fresh = init_model(b.model);
    DataConfig du = b.data_understanding;
    const auto pairs = generate_understanding_pairs(du, b.model);
    const KlEstimate kz = kl_to_reference(fresh, pairs, Task::understanding, 3, 1);
    if (kz.per_sequence != 0.0) ok = false;
    d << "fresh-init KL " << kz.per_sequence << " (exact 0); ";

    for (std::uint64_t seed : g_sweep.bundle.train.seeds) {
        const json su = load_summary(g_sweep.root_a, "understanding_only_seed" + std::to_string(seed));
        const json sg = load_summary(g_sweep.root_a, "generation_only_seed" + std::to_string(seed));
        const double klu = su.at("kl").at("understanding").at("per_sequence").get<double>();
        const double klg = sg.at("kl").at("generation").at("per_sequence").get<double>();
        const double klu_tok = su.at("kl").at("understanding").at("per_token").get<double>();
        const double klg_tok = sg.at("kl").at("generation").at("per_token").get<double>();
        const bool ratio_ok = klu >= 10.0 * klg;
        if (!ratio_ok) ok = false;
        d << "seed" << seed << ": und " << klu << " vs gen " << klg << " nats/seq (ratio "
          << klu / klg << (ratio_ok ? ", ok" : ", FAIL >=10x") << "; per-token ratio "
          << klu_tok / klg_tok << "); ";
    }
    detail = d.str();
    return ok;
}

bool c11_statistics(std::string& detail) {
    bool ok = true;
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> bb{2.0, 3.0, 4.0};
    const TTestResult w = welch_t(a, bb);
    if (std::abs(w.t - (-1.2247)) > 1e-4 || std::abs(w.df - 4.0) > 1e-9) ok = false;

    const double p = t_two_sided_p(2.776, 4.0);
    if (std::abs(p - 0.05) > 0.001) ok = false;

    Rng rng(1234);
    int covered = 0;
    std::vector<double> sample(200);
    for (int s = 0; s < 1000; ++s) {
        for (double& x : sample) x = rng.next_normal(0.0, 1.0);
        const SampleSummary sum = summarize(sample);
        if (sum.ci95_low <= 0.0 && 0.0 <= sum.ci95_high) ++covered;
    }
    const double coverage = covered / 1000.0;
    if (std::abs(coverage - 0.95) > 0.02) ok = false;

    std::ostringstream d;
    d << "welch t " << w.t << " (df " << w.df << "); p(2.776, df4) = " << p << "; CI coverage "
      << coverage;
    detail = d.str();
    return ok;
}

bool c12_posthoc_exactness(std::string& detail) {
    bool ok = true;
    const ModelState su = load_checkpoint(
        (g_sweep.root_a / "runs" / "understanding_only_seed1" / "checkpoint.json").string());
    const ModelState sg = load_checkpoint(
        (g_sweep.root_a / "runs" / "generation_only_seed1" / "checkpoint.json").string());

    const ModelState l0 = soup_interpolate(su, sg, 0.0);
    const ModelState l1 = soup_interpolate(su, sg, 1.0);
    if (l0.params != su.params || l1.params != sg.params) ok = false;

    const EvalSets eval = make_eval_sets(g_sweep.bundle);
    const CompositeEval comp = separate_adapter_eval(su, sg, eval.understanding, eval.generation,
                                                     g_sweep.bundle.train.dpo);
    const json ju = load_summary(g_sweep.root_a, "understanding_only_seed1");
    const json jg = load_summary(g_sweep.root_a, "generation_only_seed1");
    const auto mu = ju.at("eval").at("understanding").at("margins").get<std::vector<double>>();
    const auto mg = jg.at("eval").at("generation").at("margins").get<std::vector<double>>();
    if (comp.understanding.margins != mu || comp.generation.margins != mg) ok = false;

    detail = "soup endpoints bit-exact; composite margins equal the single-task runs bit-exactly";
    return ok;
}

bool c13_determinism(std::string& detail) {
    bool ok = true;
    std::ostringstream d;
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(g_sweep.root_a / "runs")) {
        if (!entry.is_directory()) continue;
        const std::string run_id = entry.path().filename().string();
        for (const char* f : {"trajectory.csv", "cosine.svg", "weights.svg", "task_losses.svg",
                              "combined_loss.svg"}) {
            const std::string bytes_a = read_bytes(entry.path() / f);
            const std::string bytes_b = read_bytes(g_sweep.root_b / "runs" / run_id / f);
            ++compared;
            if (bytes_a != bytes_b) {
                ok = false;
                d << run_id << "/" << f << " differs; ";
            }
        }
    }
    for (const char* f : {"report.json", "report.txt"}) {
        ++compared;
        if (read_bytes(g_sweep.root_a / f) != read_bytes(g_sweep.root_b / f)) {
            ok = false;
            d << f << " differs; ";
        }
    }
    for (const char* f : {"datasets/pairs.jsonl", "datasets/eval_pairs.jsonl"}) {
        ++compared;
        if (read_bytes(g_sweep.root_a / f) != read_bytes(g_sweep.root_b / f)) {
            ok = false;
            d << f << " differs; ";
        }
    }
    d << compared << " files byte-compared across reruns" << (ok ? ", all identical" : "");
    detail = d.str();
    return ok;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "gradient correctness (finite differences)", c1_gradient_correctness},
        {2, "loss floor exactness", c2_loss_floor},
        {3, "combined-norm quadratic bound", c3_eq7_bound},
        {4, "weight equalization arithmetic", c4_weight_arithmetic},
        {5, "pcgrad orthogonal no-op and projection", c5_pcgrad},
        {6, "directional loss replication", c6_loss_replication},
        {7, "weight-trajectory shape", c7_weight_trajectory},
        {8, "token-count monotonicity of 1/rho", c8_token_count_monotonicity},
        {9, "null-calibration ordering", c9_null_calibration},
        {10, "KL direction", c10_kl_direction},
        {11, "statistics validation", c11_statistics},
        {12, "post-hoc exactness", c12_posthoc_exactness},
        {13, "end-to-end determinism", c13_determinism},
    };

    try {
        run_default_sweep();
    } catch (const std::exception& e) {
        std::cerr << "sweep failed: " << e.what() << "\n";
        return 2;
    }

    int failed = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool ok = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        std::printf("[%2d/13] %s — %s  (%lld ms)\n        %s\n", c.number,
                    ok ? "PASS" : "FAIL", c.name.c_str(), static_cast<long long>(ms),
                    detail.c_str());
        if (!ok) ++failed;
    }
    if (failed > 0) {
        std::printf("\n%d of 13 criteria failed. Known desk-scale limitations are analyzed in "
                    "the project notes; failures above print the measured values.\n",
                    failed);
        return 1;
    }
    std::printf("\nall 13 criteria passed\n");
    return 0;
}
