#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bdlab/data.hpp"
#include "bdlab/trainer.hpp"
#include "test_util.hpp"

using namespace bdlab;
using Catch::Approx;

namespace {

constexpr double kLn2 = 0.6931471805599453;

Datasets tiny_datasets(const ModelConfig& model, int n_u = 8, int n_g = 6) {
    DataConfig du;
    du.task = Task::understanding;
    du.pair_count = n_u;
    du.context_length = 4;
    du.text_len_min = 6;
    du.text_len_max = 10;
    du.informativeness = 1.0;
    du.seed = 51;
    DataConfig dg;
    dg.task = Task::generation;
    dg.pair_count = n_g;
    dg.context_length = 4;
    dg.informativeness = 0.0;
    dg.seed = 52;
    Datasets d;
    d.understanding = generate_understanding_pairs(du, model);
    d.generation = generate_generation_pairs(dg, model, GenPairMode::same_distribution);
    return d;
}

TrainConfig tiny_train(Strategy strat, int steps) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.balancing.strategy = strat;
    cfg.balancing.recompute_interval = 5;
    return cfg;
}

}  // namespace

TEST_CASE("cosine schedule endpoints and midpoint", "[trainer]") {
    REQUIRE(cosine_lr(0, 1000, 1e-3, 0.0) == Approx(1e-3).margin(1e-18));
    REQUIRE(cosine_lr(1000, 1000, 1e-3, 0.0) == Approx(0.0).margin(1e-18));
    REQUIRE(cosine_lr(500, 1000, 1e-3, 1e-5) == Approx((1e-3 + 1e-5) / 2.0).margin(1e-15));
    REQUIRE_THROWS_AS(cosine_lr(-1, 10, 1e-3, 0.0), DomainError);
    REQUIRE_THROWS_AS(cosine_lr(11, 10, 1e-3, 0.0), DomainError);
}

TEST_CASE("gradient clipping", "[trainer]") {
    auto map = std::make_shared<SegmentMap>(std::vector<Segment>{{"v", 0, 2}});
    GradientVector g(map);
    g.mutable_values()[0] = 2.0;
    GradientVector clipped = clip_gradient(g, 1.0);
    REQUIRE(clipped.norm() == Approx(1.0).margin(1e-12));
    REQUIRE(clipped[0] == Approx(1.0).margin(1e-12));

    g.mutable_values()[0] = 0.5;
    clipped = clip_gradient(g, 1.0);
    REQUIRE(clipped[0] == 0.5);

    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        GradientVector x(map);
        x.mutable_values()[0] = rng.next_normal(0.0, 5.0);
        x.mutable_values()[1] = rng.next_normal(0.0, 5.0);
        REQUIRE(clip_gradient(x, 1.0).norm() <= 1.0 + 1e-12);
    }
}

TEST_CASE("adamw closed-form first step", "[trainer]") {
    // g = 0.5, lr = 0.1, decay 0, eps -> 0: update is -lr * sign(g)
    std::vector<double> p{0.0};
    std::vector<double> g{0.5};
    AdamWState opt(1);
    AdamWParams hp;
    hp.lr = 0.1;
    hp.weight_decay = 0.0;
    hp.eps = 1e-16;
    adamw_update(p, g, opt, hp);
    REQUIRE(p[0] == Approx(-0.1).margin(1e-9));

    // zero gradient, zero decay: parameter unchanged
    std::vector<double> p2{0.7};
    std::vector<double> g2{0.0};
    AdamWState opt2(1);
    adamw_update(p2, g2, opt2, hp);
    REQUIRE(p2[0] == 0.7);

    // decoupled decay with zero gradient: p <- p - lr * decay * p
    std::vector<double> p3{1.0};
    AdamWState opt3(1);
    AdamWParams hp3;
    hp3.lr = 0.1;
    hp3.weight_decay = 0.01;
    adamw_update(p3, g2, opt3, hp3);
    REQUIRE(p3[0] == Approx(0.999).margin(1e-15));
}

TEST_CASE("adamw moments persist across steps", "[trainer]") {
    std::vector<double> p{0.0};
    std::vector<double> g{1.0};
    AdamWState opt(1);
    AdamWParams hp;
    hp.lr = 0.1;
    adamw_update(p, g, opt, hp);
    const double m1 = opt.m[0];
    adamw_update(p, g, opt, hp);
    REQUIRE(opt.t == 2);
    REQUIRE(opt.m[0] == Approx(hp.beta1 * m1 + (1 - hp.beta1) * 1.0).margin(1e-15));
}

TEST_CASE("zero steps leave the state unchanged", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(61);
    ModelState st = init_model(model);
    const auto before = st.params;
    const TrainResult r = train(st, tiny_datasets(model), tiny_train(Strategy::naive_joint, 0), 1);
    REQUIRE(r.trajectory.empty());
    REQUIRE(st.params == before);
}

TEST_CASE("step-0 losses are exactly ln 2 for every strategy", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(67);
    const Datasets data = tiny_datasets(model);
    for (Strategy strat : all_strategies()) {
        ModelState st = init_model(model);
        const TrainResult r = train(st, data, tiny_train(strat, 1), 3);
        REQUIRE(r.trajectory.size() == 1);
        const TrajectoryPoint& p = r.trajectory.front();
        if (strategy_needs_understanding(strat)) REQUIRE(p.loss_u == Approx(kLn2).margin(1e-15));
        if (strategy_needs_generation(strat)) REQUIRE(p.loss_g == Approx(kLn2).margin(1e-15));
        REQUIRE(p.loss_combined == Approx(kLn2).margin(1e-15));
    }
}

TEST_CASE("training is bit-deterministic in the seed", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(71);
    const Datasets data = tiny_datasets(model);
    const TrainConfig cfg = tiny_train(Strategy::grad_weighted, 25);

    ModelState a = init_model(model);
    ModelState b = init_model(model);
    const TrainResult ra = train(a, data, cfg, 5);
    const TrainResult rb = train(b, data, cfg, 5);
    REQUIRE(a.params == b.params);
    REQUIRE(ra.trajectory.size() == rb.trajectory.size());
    for (std::size_t i = 0; i < ra.trajectory.size(); ++i) {
        REQUIRE(ra.trajectory[i].loss_combined == rb.trajectory[i].loss_combined);
        REQUIRE(ra.trajectory[i].w_u == rb.trajectory[i].w_u);
        REQUIRE(ra.trajectory[i].cos_ug == rb.trajectory[i].cos_ug);
    }

    ModelState c = init_model(model);
    const TrainResult rc = train(c, data, cfg, 6);  // different seed, different path
    REQUIRE(a.params != c.params);
}

TEST_CASE("the reference snapshot never mutates", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(73);
    ModelState st = init_model(model);
    const auto ref_before = st.reference;
    train(st, tiny_datasets(model), tiny_train(Strategy::naive_joint, 20), 9);
    REQUIRE(st.reference == ref_before);
    REQUIRE(st.params != ref_before);  // training moved the live params
}

TEST_CASE("grad_weighted weights jump only at the interval", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(79);
    ModelState st = init_model(model);
    TrainConfig cfg = tiny_train(Strategy::grad_weighted, 12);
    cfg.balancing.recompute_interval = 5;
    const TrainResult r = train(st, tiny_datasets(model), cfg, 11);
    for (long s = 0; s < 5; ++s) REQUIRE(r.trajectory[static_cast<std::size_t>(s)].w_u == 0.5);
    REQUIRE(r.trajectory[5].w_u != 0.5);
    REQUIRE(r.trajectory[6].w_u == r.trajectory[5].w_u);
    REQUIRE(r.trajectory[9].w_u == r.trajectory[5].w_u);
    REQUIRE(r.trajectory[10].w_u != r.trajectory[9].w_u);
}

TEST_CASE("soup interpolation endpoints are exact", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(83);
    const Datasets data = tiny_datasets(model);
    ModelState a = init_model(model);
    ModelState b = init_model(model);
    train(a, data, tiny_train(Strategy::understanding_only, 15), 21);
    train(b, data, tiny_train(Strategy::generation_only, 15), 22);

    const ModelState s0 = soup_interpolate(a, b, 0.0);
    REQUIRE(s0.params == a.params);
    const ModelState s1 = soup_interpolate(a, b, 1.0);
    REQUIRE(s1.params == b.params);

    const ModelState mid = soup_interpolate(a, b, 0.5);
    const auto& segs = a.layout.trainable_map->segments();
    const std::size_t off = a.layout.trainable_param_offsets[0];
    for (std::size_t k = 0; k < segs[0].size(); ++k)
        REQUIRE(mid.params[off + k] ==
                Approx((a.params[off + k] + b.params[off + k]) / 2.0).margin(1e-15));

    ModelState other = init_model(testutil::tiny_model(99));  // different base
    REQUIRE_THROWS_AS(soup_interpolate(a, other, 0.5), DomainError);
}

TEST_CASE("separate-adapter composite equals the single-task evaluations", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(89);
    const Datasets data = tiny_datasets(model);
    ModelState a = init_model(model);
    ModelState b = init_model(model);
    train(a, data, tiny_train(Strategy::understanding_only, 10), 31);
    train(b, data, tiny_train(Strategy::generation_only, 10), 32);

    const DpoConfig dpo;
    const CompositeEval comp =
        separate_adapter_eval(a, b, data.understanding, data.generation, dpo);
    const TaskEval eu = evaluate_task(a, data.understanding, dpo);
    const TaskEval eg = evaluate_task(b, data.generation, dpo);
    REQUIRE(comp.non_deployable);
    REQUIRE(comp.understanding.mean_margin == eu.mean_margin);
    REQUIRE(comp.understanding.margins == eu.margins);
    REQUIRE(comp.generation.mean_margin == eg.mean_margin);
    REQUIRE(comp.generation.margins == eg.margins);

    // both states equal: composite equals either state's metrics
    const CompositeEval same =
        separate_adapter_eval(a, a, data.understanding, data.generation, dpo);
    REQUIRE(same.understanding.mean_margin == eu.mean_margin);
}

TEST_CASE("trajectory csv round-trips with the exact header", "[trainer]") {
    const ModelConfig model = testutil::tiny_model(97);
    ModelState st = init_model(model);
    const TrainResult r = train(st, tiny_datasets(model), tiny_train(Strategy::naive_joint, 7), 41);

    const auto dir = testutil::fresh_dir("traj");
    const auto path = dir / "trajectory.csv";
    write_trajectory_csv(r.trajectory, path.string());

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "step,loss_u,loss_g,loss_combined,cos_ug,norm_u,norm_g,w_u,w_g,lr");

    const auto back = read_trajectory_csv(path.string());
    REQUIRE(back.size() == r.trajectory.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].step == r.trajectory[i].step);
        REQUIRE(back[i].loss_u == r.trajectory[i].loss_u);
        REQUIRE(back[i].cos_ug == r.trajectory[i].cos_ug);
        REQUIRE(back[i].lr == r.trajectory[i].lr);
    }
}
