#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdlab/config.hpp"
#include "bdlab/dpo.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/gradient.hpp"
#include "bdlab/model.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/stats.hpp"

namespace bdlab {

inline constexpr double kZeroNormEps = 1e-12;

struct CosineResult {
    double value = 0.0;
    bool zero_norm = false;  // either input below the norm floor
};

// a.b / (|a||b|); vectors with a norm under eps report 0 with the flag raised.
inline CosineResult cosine(const GradientVector& a, const GradientVector& b,
                           double eps = kZeroNormEps) {
    a.require_same_map(b);
    const double na = a.norm(), nb = b.norm();
    if (na < eps || nb < eps) return {0.0, true};
    return {dot(a, b) / (na * nb), false};
}

struct NormInteraction {
    double exact_relative_increase = 0.0;  // (|g_U + g_G| - |g_G|) / |g_G|
    double quadratic_approx = 0.0;         // rho^2 / 2, valid at cos = 0
    double angle_rad = 0.0;                // deviation of the sum from g_G
};

// Relative norm increase and angular deviation of g_U + g_G over g_G alone,
// given the magnitude ratio rho = |g_U|/|g_G| and the cosine between them.
inline NormInteraction combined_norm_check(double rho, double cos_val) {
    if (!(rho > 0.0)) throw DomainError("combined_norm_check requires rho > 0");
    NormInteraction r;
    r.exact_relative_increase = std::sqrt(1.0 + 2.0 * rho * cos_val + rho * rho) - 1.0;
    r.quadratic_approx = 0.5 * rho * rho;
    const double theta = std::acos(std::min(1.0, std::max(-1.0, cos_val)));
    r.angle_rad = std::atan2(rho * std::sin(theta), 1.0 + rho * std::cos(theta));
    return r;
}

struct LayerCosine {
    std::string segment;
    double value = 0.0;
    bool zero_norm = false;
};

struct DiagnosticsRecord {
    int batch_index = 0;
    double cos_ug = 0.0;
    bool zero_norm = false;
    double norm_u = 0.0;
    double norm_g = 0.0;
    double rho = 0.0;  // norm_u / norm_g; 0 and flagged when norm_g < eps
    std::vector<LayerCosine> per_layer;
};

struct DiagnosticsRun {
    std::vector<DiagnosticsRecord> records;
    std::vector<double> intra_understanding;  // consecutive-batch same-task cosines
    std::vector<double> intra_generation;
    std::vector<std::string> layer_names;
};

namespace detail {

inline DiagnosticsRecord make_record(int index, const GradientVector& gu,
                                     const GradientVector& gg) {
    DiagnosticsRecord rec;
    rec.batch_index = index;
    const CosineResult c = cosine(gu, gg);
    rec.cos_ug = c.value;
    rec.zero_norm = c.zero_norm;
    rec.norm_u = gu.norm();
    rec.norm_g = gg.norm();
    rec.rho = rec.norm_g < kZeroNormEps ? 0.0 : rec.norm_u / rec.norm_g;
    for (const Segment& s : gu.map()->segments()) {
        const GradientVector su = gu.subvector({s.name});
        const GradientVector sg = gg.subvector({s.name});
        const CosineResult lc = cosine(su, sg);
        rec.per_layer.push_back({s.name, lc.value, lc.zero_norm});
    }
    return rec;
}

}  // namespace detail

// Per-batch interference measurements on the shared-parameter view: one
// understanding and one generation pair per batch (batch size 1), in a fixed
// seeded order. Consecutive-batch intra-task cosines come along for
// calibration.
inline DiagnosticsRun collect_batch_diagnostics(const ModelState& st,
                                                const std::vector<PreferencePair>& dataset_u,
                                                const std::vector<PreferencePair>& dataset_g,
                                                int n_batches, const DpoConfig& dpo,
                                                const DiagnosticsConfig& diag) {
    if (n_batches < 0) throw DomainError("n_batches must be >= 0");
    DiagnosticsRun run;
    if (n_batches == 0) return run;
    if (dataset_u.empty() || dataset_g.empty())
        throw DomainError("diagnostics require nonempty datasets for both tasks");

    std::vector<std::string> view = adapter_segment_names(st.config);
    if (diag.include_heads) view.push_back("head_code");
    run.layer_names = view;

    std::vector<std::size_t> order_u(dataset_u.size()), order_g(dataset_g.size());
    for (std::size_t i = 0; i < order_u.size(); ++i) order_u[i] = i;
    for (std::size_t i = 0; i < order_g.size(); ++i) order_g[i] = i;
    Rng rng(derive_seed(diag.seed, 0xd1a6));
    rng.shuffle(order_u);
    rng.shuffle(order_g);

    ReferenceLogprobCache cache_u(dataset_u.size()), cache_g(dataset_g.size());
    GradientVector prev_u, prev_g;
    for (int b = 0; b < n_batches; ++b) {
        const std::size_t iu = order_u[static_cast<std::size_t>(b) % order_u.size()];
        const std::size_t ig = order_g[static_cast<std::size_t>(b) % order_g.size()];
        DpoBatchResult ru = dpo_gradient(st, dataset_u[iu], dpo, cache_u.chosen(st, dataset_u, iu),
                                         cache_u.rejected(st, dataset_u, iu));
        DpoBatchResult rg = dpo_gradient(st, dataset_g[ig], dpo, cache_g.chosen(st, dataset_g, ig),
                                         cache_g.rejected(st, dataset_g, ig));
        GradientVector gu = ru.grad.subvector(view);
        GradientVector gg = rg.grad.subvector(view);
        run.records.push_back(detail::make_record(b, gu, gg));
        if (b > 0) {
            run.intra_understanding.push_back(cosine(prev_u, gu).value);
            run.intra_generation.push_back(cosine(prev_g, gg).value);
        }
        prev_u = std::move(gu);
        prev_g = std::move(gg);
    }
    return run;
}

// Synthetic-vector mode: constructed gradient pairs with exactly known cosine
// and ratio, bypassing the model. cos_target = 0 uses disjoint supports, so
// dot products are exactly zero in floating point.
inline DiagnosticsRun synthetic_diagnostics(int n_batches, int dim, double rho, double cos_target,
                                            std::uint64_t seed) {
    if (dim < 2) throw DomainError("synthetic diagnostics require dim >= 2");
    if (!(rho > 0.0)) throw DomainError("synthetic diagnostics require rho > 0");
    if (cos_target < -1.0 || cos_target > 1.0)
        throw DomainError("synthetic cosine target must be in [-1, 1]");

    DiagnosticsRun run;
    run.layer_names = {"synthetic"};
    auto map = std::make_shared<SegmentMap>(
        std::vector<Segment>{{"synthetic", 0, static_cast<std::size_t>(dim)}});
    Rng rng(derive_seed(seed, 0x5e17));
    GradientVector prev_u, prev_g;
    for (int b = 0; b < n_batches; ++b) {
        const auto i = static_cast<std::size_t>(rng.next_int(0, dim - 1));
        auto j = static_cast<std::size_t>(rng.next_int(0, dim - 2));
        if (j >= i) ++j;
        const double sign_g = rng.next_double() < 0.5 ? -1.0 : 1.0;
        const double sign_u = rng.next_double() < 0.5 ? -1.0 : 1.0;
        GradientVector gg(map), gu(map);
        gg.mutable_values()[i] = sign_g;
        const double along = rho * cos_target * sign_g;
        const double across = rho * std::sqrt(1.0 - cos_target * cos_target) * sign_u;
        gu.mutable_values()[i] = along;
        gu.mutable_values()[j] = across;
        run.records.push_back(detail::make_record(b, gu, gg));
        if (b > 0) {
            run.intra_understanding.push_back(cosine(prev_u, gu).value);
            run.intra_generation.push_back(cosine(prev_g, gg).value);
        }
        prev_u = std::move(gu);
        prev_g = std::move(gg);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Null-hypothesis calibration
// ---------------------------------------------------------------------------

struct CalibrationReport {
    SampleSummary inter;
    SampleSummary intra_understanding;
    SampleSummary intra_generation;
    TTestResult inter_vs_zero;              // one-sample t of inter-task mean against 0
    TTestResult intra_u_vs_inter;           // Welch
    TTestResult intra_g_vs_inter;           // Welch
    double cohens_d_u = 0.0;
    double cohens_d_g = 0.0;
};

namespace detail {

// Constructed-orthogonal runs produce exactly constant cosine groups; equal
// constants compare as the trivial null rather than a degenerate error.
inline TTestResult welch_or_trivial(const std::vector<double>& a, const std::vector<double>& b) {
    try {
        return welch_t(a, b);
    } catch (const DegenerateInputError&) {
        if (sample_mean(a) == sample_mean(b)) return {0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
        throw;
    }
}

inline double cohens_d_or_zero(const std::vector<double>& a, const std::vector<double>& b) {
    try {
        return cohens_d(a, b);
    } catch (const DegenerateInputError&) {
        if (sample_mean(a) == sample_mean(b)) return 0.0;
        throw;
    }
}

}  // namespace detail

inline CalibrationReport null_calibration(const std::vector<DiagnosticsRecord>& records,
                                          const std::vector<double>& intra_u,
                                          const std::vector<double>& intra_g) {
    if (records.size() < 2 || intra_u.size() < 2 || intra_g.size() < 2)
        throw DomainError("null_calibration requires >= 2 samples per group");
    std::vector<double> inter;
    inter.reserve(records.size());
    for (const DiagnosticsRecord& r : records) inter.push_back(r.cos_ug);

    CalibrationReport rep;
    rep.inter = summarize(inter);
    rep.intra_understanding = summarize(intra_u);
    rep.intra_generation = summarize(intra_g);
    rep.inter_vs_zero = one_sample_t(inter, 0.0);
    rep.intra_u_vs_inter = detail::welch_or_trivial(intra_u, inter);
    rep.intra_g_vs_inter = detail::welch_or_trivial(intra_g, inter);
    rep.cohens_d_u = detail::cohens_d_or_zero(intra_u, inter);
    rep.cohens_d_g = detail::cohens_d_or_zero(intra_g, inter);
    return rep;
}

inline CalibrationReport null_calibration(const DiagnosticsRun& run) {
    return null_calibration(run.records, run.intra_understanding, run.intra_generation);
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// CSV: one row per batch with the headline metrics, the combined-norm columns
// derived from (rho, cos), then per-layer cosines and zero-norm flags.
inline void write_diagnostics_csv(const DiagnosticsRun& run, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "batch,cos_ug,norm_u,norm_g,rho,exact_rel_increase,quad_approx,angle_rad";
    for (const std::string& n : run.layer_names) out << ",cos_" << n;
    for (const std::string& n : run.layer_names) out << ",zero_norm_" << n;
    out << "\n";
    for (const DiagnosticsRecord& r : run.records) {
        NormInteraction ni;
        if (r.rho > 0.0) ni = combined_norm_check(r.rho, r.cos_ug);
        out << r.batch_index << ',' << detail::fmt_double(r.cos_ug) << ','
            << detail::fmt_double(r.norm_u) << ',' << detail::fmt_double(r.norm_g) << ','
            << detail::fmt_double(r.rho) << ',' << detail::fmt_double(ni.exact_relative_increase)
            << ',' << detail::fmt_double(ni.quadratic_approx) << ','
            << detail::fmt_double(ni.angle_rad);
        for (const LayerCosine& lc : r.per_layer) out << ',' << detail::fmt_double(lc.value);
        for (const LayerCosine& lc : r.per_layer) out << ',' << (lc.zero_norm ? 1 : 0);
        out << "\n";
    }
    if (!out) throw IoError("failed while writing " + path);
}

inline json summary_to_json(const SampleSummary& s) {
    return json{{"n", s.n},        {"mean", s.mean},         {"std", s.stddev},
                {"se", s.se},      {"ci95_low", s.ci95_low}, {"ci95_high", s.ci95_high}};
}

inline json ttest_to_json(const TTestResult& t) {
    return json{{"t", t.t}, {"df", t.df}, {"p", t.p}};
}

inline json calibration_to_json(const CalibrationReport& rep) {
    return json{{"inter_task", summary_to_json(rep.inter)},
                {"intra_understanding", summary_to_json(rep.intra_understanding)},
                {"intra_generation", summary_to_json(rep.intra_generation)},
                {"inter_vs_zero", ttest_to_json(rep.inter_vs_zero)},
                {"intra_u_vs_inter", ttest_to_json(rep.intra_u_vs_inter)},
                {"intra_g_vs_inter", ttest_to_json(rep.intra_g_vs_inter)},
                {"cohens_d_u", rep.cohens_d_u},
                {"cohens_d_g", rep.cohens_d_g}};
}

// JSON summary: aggregate means/stds plus calibration tests when the run is
// large enough. Per-layer aggregates exclude zero-norm-flagged batches.
inline json diagnostics_summary_json(const DiagnosticsRun& run) {
    json j;
    j["n_batches"] = run.records.size();
    if (!run.records.empty()) {
        std::vector<double> cos_v, norm_u, norm_g, rho_v;
        for (const DiagnosticsRecord& r : run.records) {
            cos_v.push_back(r.cos_ug);
            norm_u.push_back(r.norm_u);
            norm_g.push_back(r.norm_g);
            if (r.rho > 0.0) rho_v.push_back(r.rho);
        }
        j["cos_ug"] = summary_to_json(summarize(cos_v));
        j["norm_u"] = summary_to_json(summarize(norm_u));
        j["norm_g"] = summary_to_json(summarize(norm_g));
        if (!rho_v.empty()) j["rho"] = summary_to_json(summarize(rho_v));
        json layers = json::object();
        for (std::size_t li = 0; li < run.layer_names.size(); ++li) {
            std::vector<double> vals;
            int flagged = 0;
            for (const DiagnosticsRecord& r : run.records) {
                if (r.per_layer[li].zero_norm)
                    ++flagged;
                else
                    vals.push_back(r.per_layer[li].value);
            }
            json entry;
            entry["zero_norm_batches"] = flagged;
            if (!vals.empty()) entry["cos"] = summary_to_json(summarize(vals));
            layers[run.layer_names[li]] = entry;
        }
        j["per_layer"] = layers;
    }
    if (run.records.size() >= 2 && run.intra_understanding.size() >= 2 &&
        run.intra_generation.size() >= 2)
        j["calibration"] = calibration_to_json(null_calibration(run));
    return j;
}

}  // namespace bdlab
