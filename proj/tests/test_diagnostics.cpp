#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "bdlab/data.hpp"
#include "bdlab/diagnostics.hpp"
#include "test_util.hpp"

using namespace bdlab;
using Catch::Approx;

namespace {

GradientVector vec2(double x, double y) {
    auto map = std::make_shared<SegmentMap>(std::vector<Segment>{{"v", 0, 2}});
    GradientVector g(map);
    g.mutable_values()[0] = x;
    g.mutable_values()[1] = y;
    return g;
}

}  // namespace

TEST_CASE("cosine basics", "[diagnostics]") {
    REQUIRE(cosine(vec2(1, 0), vec2(0, 1)).value == 0.0);
    REQUIRE(cosine(vec2(1, 1), vec2(1, 0)).value == Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
    const GradientVector a = vec2(0.3, -0.7);
    REQUIRE(cosine(a, a).value == Approx(1.0).margin(1e-12));

    // symmetry and positive-scale invariance
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        GradientVector x = vec2(rng.next_normal(), rng.next_normal());
        GradientVector y = vec2(rng.next_normal(), rng.next_normal());
        const double ab = cosine(x, y).value;
        REQUIRE(ab == Approx(cosine(y, x).value).margin(1e-14));
        GradientVector xs = x;
        xs.scale(3.5);
        REQUIRE(cosine(xs, y).value == Approx(ab).margin(1e-12));
        REQUIRE(ab >= -1.0);
        REQUIRE(ab <= 1.0);
    }
}

TEST_CASE("cosine zero-norm flag and map mismatch", "[diagnostics]") {
    const CosineResult r = cosine(vec2(0, 0), vec2(1, 0));
    REQUIRE(r.value == 0.0);
    REQUIRE(r.zero_norm);

    auto other_map = std::make_shared<SegmentMap>(std::vector<Segment>{{"w", 0, 2}});
    GradientVector other(other_map);
    REQUIRE_THROWS_AS(cosine(vec2(1, 0), other), DomainError);
}

TEST_CASE("gradient vector norm cache and partition invariants", "[diagnostics]") {
    auto map = std::make_shared<SegmentMap>(
        std::vector<Segment>{{"a", 0, 3}, {"b", 3, 5}});
    GradientVector g(map);
    auto v = g.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) - 1.5;
    double manual = 0.0;
    for (double x : g.values()) manual += x * x;
    manual = std::sqrt(manual);
    REQUIRE(g.norm() == Approx(manual).epsilon(1e-12));
    g.mutable_segment("b")[0] = 9.0;
    manual = 0.0;
    for (double x : g.values()) manual += x * x;
    REQUIRE(g.norm() == Approx(std::sqrt(manual)).epsilon(1e-12));

    REQUIRE_THROWS_AS(SegmentMap(std::vector<Segment>{{"a", 0, 3}, {"b", 4, 5}}), DomainError);
    REQUIRE_THROWS_AS(SegmentMap(std::vector<Segment>{{"a", 0, 3}, {"b", 2, 5}}), DomainError);
}

TEST_CASE("combined norm check analytic values", "[diagnostics]") {
    const NormInteraction r1 = combined_norm_check(0.1, 0.0);
    REQUIRE(r1.exact_relative_increase == Approx(std::sqrt(1.01) - 1.0).epsilon(1e-14));
    REQUIRE(r1.exact_relative_increase == Approx(0.0049876).margin(1e-7));
    REQUIRE(r1.quadratic_approx == Approx(0.005).margin(1e-15));
    REQUIRE(r1.angle_rad == Approx(std::atan(0.1)).epsilon(1e-14));
    REQUIRE(r1.angle_rad * 180.0 / M_PI == Approx(5.71).margin(0.01));

    const NormInteraction r2 = combined_norm_check(1.0, 1.0);
    REQUIRE(r2.exact_relative_increase == Approx(1.0).margin(1e-12));

    const NormInteraction r3 = combined_norm_check(0.073, 0.0);
    REQUIRE(r3.exact_relative_increase == Approx(std::sqrt(1.0 + 0.073 * 0.073) - 1.0).epsilon(1e-14));

    // Taylor bound: |exact - rho^2/2| <= rho^4 for cos = 0, rho <= 0.1
    for (double rho = 0.005; rho <= 0.1; rho += 0.005) {
        const NormInteraction r = combined_norm_check(rho, 0.0);
        REQUIRE(std::abs(r.exact_relative_increase - r.quadratic_approx) <= std::pow(rho, 4));
    }
    REQUIRE_THROWS_AS(combined_norm_check(0.0, 0.0), DomainError);
}

TEST_CASE("random-vector null: cosine mean 0, std about 1/sqrt(d)", "[diagnostics][slow]") {
    const int d = 4096;
    const int draws = 1000;
    Rng rng(11);
    std::vector<double> cosines;
    auto map = std::make_shared<SegmentMap>(
        std::vector<Segment>{{"v", 0, static_cast<std::size_t>(d)}});
    for (int i = 0; i < draws; ++i) {
        GradientVector a(map), b(map);
        auto va = a.mutable_values();
        auto vb = b.mutable_values();
        for (int j = 0; j < d; ++j) {
            va[static_cast<std::size_t>(j)] = rng.next_normal();
            vb[static_cast<std::size_t>(j)] = rng.next_normal();
        }
        cosines.push_back(cosine(a, b).value);
    }
    const SampleSummary s = summarize(cosines);
    const double expected_std = 1.0 / std::sqrt(static_cast<double>(d));
    REQUIRE(std::abs(s.mean) <= 3.0 * s.se);
    REQUIRE(s.stddev == Approx(expected_std).epsilon(0.10));
}

TEST_CASE("model diagnostics at fresh init flag the A layers", "[diagnostics]") {
    const ModelConfig cfg = testutil::tiny_model(3);
    const ModelState st = init_model(cfg);

    DataConfig du;
    du.task = Task::understanding;
    du.pair_count = 6;
    du.context_length = 4;
    du.text_len_min = 5;
    du.text_len_max = 9;
    du.informativeness = 1.0;
    du.seed = 5;
    DataConfig dg = du;
    dg.task = Task::generation;
    dg.gen_mode = GenPairMode::same_distribution;

    const auto pairs_u = generate_understanding_pairs(du, cfg);
    const auto pairs_g = generate_generation_pairs(dg, cfg);

    DiagnosticsConfig diag;
    diag.seed = 9;
    const DiagnosticsRun run =
        collect_batch_diagnostics(st, pairs_u, pairs_g, 6, DpoConfig{}, diag);
    REQUIRE(run.records.size() == 6);
    REQUIRE(run.intra_understanding.size() == 5);
    for (const DiagnosticsRecord& rec : run.records) {
        REQUIRE_FALSE(rec.zero_norm);  // B segments carry gradient at init
        for (const LayerCosine& lc : rec.per_layer) {
            if (lc.segment.rfind("adapter_A", 0) == 0) {
                REQUIRE(lc.zero_norm);
                REQUIRE(lc.value == 0.0);
            }
        }
    }

    const DiagnosticsRun empty =
        collect_batch_diagnostics(st, pairs_u, pairs_g, 0, DpoConfig{}, diag);
    REQUIRE(empty.records.empty());
}

TEST_CASE("synthetic mode reproduces the constructed geometry", "[diagnostics]") {
    const DiagnosticsRun run = synthetic_diagnostics(64, 128, 0.25, 0.0, 17);
    REQUIRE(run.records.size() == 64);
    for (const DiagnosticsRecord& rec : run.records) {
        REQUIRE(rec.cos_ug == 0.0);  // disjoint support: exactly orthogonal
        REQUIRE(rec.rho == Approx(0.25).epsilon(1e-12));
        REQUIRE(rec.norm_g == Approx(1.0).epsilon(1e-12));
    }
    double mean = 0.0;
    for (const DiagnosticsRecord& rec : run.records) mean += rec.cos_ug;
    REQUIRE(std::abs(mean / 64.0) <= 1e-12);
}

TEST_CASE("null calibration on hand data", "[diagnostics]") {
    std::vector<DiagnosticsRecord> records(3);
    records[0].cos_ug = 2.0;
    records[1].cos_ug = 3.0;
    records[2].cos_ug = 4.0;
    const std::vector<double> intra_u{1.0, 2.0, 3.0};
    const std::vector<double> intra_g{2.0, 3.0, 4.0};

    const CalibrationReport rep = null_calibration(records, intra_u, intra_g);
    REQUIRE(rep.intra_u_vs_inter.t == Approx(-1.224745).margin(1e-5));
    REQUIRE(rep.intra_u_vs_inter.df == Approx(4.0).margin(1e-9));
    REQUIRE(rep.cohens_d_u == Approx(-1.0).margin(1e-12));
    REQUIRE(rep.intra_g_vs_inter.t == 0.0);

    // all-zero inter-task cosines: the trivial null
    std::vector<DiagnosticsRecord> zeros(4);
    const CalibrationReport rz = null_calibration(zeros, intra_u, intra_g);
    REQUIRE(rz.inter_vs_zero.t == 0.0);
    REQUIRE(rz.inter_vs_zero.p == 1.0);

    REQUIRE_THROWS_AS(null_calibration(records, std::vector<double>{1.0}, intra_g), DomainError);
}
