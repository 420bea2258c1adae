#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdlab/bundle.hpp"
#include "bdlab/checkpoint.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/runner.hpp"
#include "bdlab/stats.hpp"
#include "bdlab/trainer.hpp"

namespace bdlab {

// ---------------------------------------------------------------------------
// Method-comparison report: per method, pooled per-pair implicit margins on
// the held-out sets across seeds, compared against the unaligned base model.
// ---------------------------------------------------------------------------

struct MethodSamples {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<double> margins_u;  // pooled across seeds
    std::vector<double> margins_g;
    bool non_deployable = false;
    std::string note;
};

namespace detail {

struct MetricComparison {
    SampleSummary summary;
    double delta = 0.0;
    double t = 0.0;
    double p = 1.0;
    double d = 0.0;
};

inline MetricComparison compare_to_base(const std::vector<double>& method,
                                        const std::vector<double>& base) {
    MetricComparison c;
    c.summary = summarize(method);
    const double base_mean = sample_mean(base);
    c.delta = c.summary.mean - base_mean;
    try {
        const TTestResult w = welch_t(method, base);
        c.t = w.t;
        c.p = w.p;
        c.d = cohens_d(method, base);
    } catch (const DegenerateInputError&) {
        // Both groups constant. Identical means compare as a null result.
        if (c.summary.mean == base_mean) {
            c.t = 0.0;
            c.p = 1.0;
            c.d = 0.0;
        } else {
            throw;
        }
    }
    return c;
}

inline json comparison_to_json(const MetricComparison& c) {
    return json{{"mean", c.summary.mean},
                {"std", c.summary.stddev},
                {"n", c.summary.n},
                {"delta", c.delta},
                {"t", c.t},
                {"p", c.p},
                {"d", c.d},
                {"ci95_low", c.summary.ci95_low},
                {"ci95_high", c.summary.ci95_high}};
}

}  // namespace detail

struct ReportDocument {
    json document;
    std::string text;
};

inline ReportDocument build_report(const std::vector<MethodSamples>& methods,
                                   const MethodSamples& base, const json& config_echo) {
    if (methods.empty()) throw DomainError("build_report requires at least one method");
    const int n_metrics = 2;
    const double bonferroni =
        0.05 / (static_cast<double>(methods.size()) * static_cast<double>(n_metrics));

    json jmethods = json::array();
    std::string text;
    char line[512];
    std::snprintf(line, sizeof(line), "%-28s %14s %9s %8s %14s %9s %8s  %s\n", "method",
                  "margin_u", "delta_u", "p_u", "margin_g", "delta_g", "p_g", "notes");
    text += line;
    text += std::string(115, '-') + "\n";

    const SampleSummary base_u = summarize(base.margins_u);
    const SampleSummary base_g = summarize(base.margins_g);
    std::snprintf(line, sizeof(line), "%-28s %7.4f±%.3f %9s %8s %7.4f±%.3f %9s %8s  %s\n",
                  base.name.c_str(), base_u.mean, base_u.stddev, "-", "-", base_g.mean,
                  base_g.stddev, "-", "-", "unaligned reference point");
    text += line;

    for (const MethodSamples& m : methods) {
        const auto cu = detail::compare_to_base(m.margins_u, base.margins_u);
        const auto cg = detail::compare_to_base(m.margins_g, base.margins_g);
        json entry{{"name", m.name},
                   {"seeds", m.seeds},
                   {"non_deployable", m.non_deployable},
                   {"note", m.note},
                   {"metrics",
                    {{"understanding_margin", detail::comparison_to_json(cu)},
                     {"generation_margin", detail::comparison_to_json(cg)}}}};
        jmethods.push_back(entry);
        std::string notes = m.note;
        if (m.non_deployable) notes = "[non-deployable] " + notes;
        std::snprintf(line, sizeof(line), "%-28s %7.4f±%.3f %+9.4f %8.3g %7.4f±%.3f %+9.4f %8.3g  %s\n",
                      m.name.c_str(), cu.summary.mean, cu.summary.stddev, cu.delta, cu.p,
                      cg.summary.mean, cg.summary.stddev, cg.delta, cg.p, notes.c_str());
        text += line;
    }
    std::snprintf(line, sizeof(line),
                  "\nBonferroni-corrected significance threshold: p < %.5g (%zu methods x %d "
                  "metrics; uncorrected p values reported above)\n",
                  bonferroni, methods.size(), n_metrics);
    text += line;

    ReportDocument doc;
    doc.document = json{{"schema", "bdlab-report-v1"},
                        {"baseline",
                         {{"name", base.name},
                          {"understanding_margin", summary_to_json(base_u)},
                          {"generation_margin", summary_to_json(base_g)}}},
                        {"methods", jmethods},
                        {"bonferroni_threshold", bonferroni},
                        {"config_echo", config_echo}};
    doc.text = text;
    return doc;
}

// ---------------------------------------------------------------------------
// Assembling method samples from a directory of runs
// ---------------------------------------------------------------------------

namespace detail {

struct LoadedRun {
    RunManifest manifest;
    json summary;
    fs::path dir;
};

inline std::string method_key_of(const std::string& run_id) {
    const std::size_t pos = run_id.rfind("_seed");
    return pos == std::string::npos ? run_id : run_id.substr(0, pos);
}

}  // namespace detail

struct RunsDirectory {
    std::vector<detail::LoadedRun> complete;
    std::vector<std::string> incomplete;
    json config_echo;
};

inline RunsDirectory load_runs_directory(const fs::path& runs_dir) {
    RunsDirectory out;
    if (!fs::exists(runs_dir)) throw DomainError("no runs found in " + runs_dir.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& dir : dirs) {
        detail::LoadedRun run;
        run.manifest = read_manifest(dir / "manifest.json");
        run.dir = dir;
        if (run.manifest.status != "complete") {
            out.incomplete.push_back(run.manifest.run_id);
            continue;
        }
        std::ifstream in(dir / "summary.json", std::ios::binary);
        if (!in) throw IoError("missing summary.json for run " + run.manifest.run_id);
        in >> run.summary;
        if (out.config_echo.is_null()) out.config_echo = run.manifest.config;
        out.complete.push_back(std::move(run));
    }
    if (out.complete.empty()) throw DomainError("no runs found in " + runs_dir.string());
    return out;
}

// Base-model samples: implicit margins of the fresh-initialized model on the
// held-out sets (exactly zero at every pair by the init identity).
inline MethodSamples base_method_samples(const ConfigBundle& bundle, const EvalSets& eval) {
    ModelState base = init_model(bundle.model);
    MethodSamples m;
    m.name = "base_model";
    m.margins_u = evaluate_task(base, eval.understanding, bundle.train.dpo).margins;
    m.margins_g = evaluate_task(base, eval.generation, bundle.train.dpo).margins;
    return m;
}

// Build the full report for a sweep output directory: training methods in
// canonical order, then post-hoc rows (soups and the separate-adapter
// composite) derived from the single-task checkpoints.
inline ReportDocument report_from_runs(const fs::path& runs_dir,
                                       const std::vector<double>& soup_lambdas) {
    RunsDirectory runs = load_runs_directory(runs_dir);
    const ConfigBundle bundle = bundle_from_json(runs.config_echo);
    const EvalSets eval = make_eval_sets(bundle);

    // method key -> runs, preserving the key's first-seen order only for
    // lookup; emission order is canonicalized below.
    std::map<std::string, std::vector<const detail::LoadedRun*>> by_method;
    for (const detail::LoadedRun& run : runs.complete)
        by_method[detail::method_key_of(run.manifest.run_id)].push_back(&run);

    auto samples_of = [](const std::vector<const detail::LoadedRun*>& group, MethodSamples& m) {
        for (const detail::LoadedRun* run : group) {
            m.seeds.push_back(run->manifest.seed);
            for (const auto& v : run->summary.at("eval").at("understanding").at("margins"))
                m.margins_u.push_back(v.get<double>());
            for (const auto& v : run->summary.at("eval").at("generation").at("margins"))
                m.margins_g.push_back(v.get<double>());
        }
    };

    std::vector<MethodSamples> methods;
    std::vector<std::string> ordered_keys;
    for (Strategy s : all_strategies()) {
        // Plain strategy runs first, then any beta-tagged variants, sorted.
        std::vector<std::string> keys;
        for (const auto& [key, group] : by_method) {
            if (key == to_string(s) ||
                key.rfind(std::string(to_string(s)) + "_beta", 0) == 0)
                keys.push_back(key);
        }
        std::sort(keys.begin(), keys.end());
        for (const std::string& k : keys) ordered_keys.push_back(k);
    }
    // Anything left (custom run ids) goes last, sorted.
    for (const auto& [key, group] : by_method)
        if (std::find(ordered_keys.begin(), ordered_keys.end(), key) == ordered_keys.end())
            ordered_keys.push_back(key);

    for (const std::string& key : ordered_keys) {
        MethodSamples m;
        m.name = key;
        samples_of(by_method.at(key), m);
        methods.push_back(std::move(m));
    }

    // Post-hoc methods need both single-task adapters per seed.
    const auto it_u = by_method.find("understanding_only");
    const auto it_g = by_method.find("generation_only");
    if (it_u != by_method.end() && it_g != by_method.end()) {
        std::map<std::uint64_t, const detail::LoadedRun*> und_by_seed, gen_by_seed;
        for (const detail::LoadedRun* r : it_u->second) und_by_seed[r->manifest.seed] = r;
        for (const detail::LoadedRun* r : it_g->second) gen_by_seed[r->manifest.seed] = r;

        for (double lambda : soup_lambdas) {
            MethodSamples m;
            char name[64];
            std::snprintf(name, sizeof(name), "soup_lambda%g", lambda);
            m.name = name;
            m.note = "adapter interpolation of the single-task runs";
            for (const auto& [seed, run_u] : und_by_seed) {
                auto gi = gen_by_seed.find(seed);
                if (gi == gen_by_seed.end()) continue;
                const ModelState su = load_checkpoint((run_u->dir / "checkpoint.json").string());
                const ModelState sg =
                    load_checkpoint((gi->second->dir / "checkpoint.json").string());
                const ModelState soup = soup_interpolate(su, sg, lambda);
                m.seeds.push_back(seed);
                for (double v : evaluate_task(soup, eval.understanding, bundle.train.dpo).margins)
                    m.margins_u.push_back(v);
                for (double v : evaluate_task(soup, eval.generation, bundle.train.dpo).margins)
                    m.margins_g.push_back(v);
            }
            if (!m.seeds.empty()) methods.push_back(std::move(m));
        }

        MethodSamples comp;
        comp.name = "separate_adapter";
        comp.non_deployable = true;
        comp.note = "composite oracle: two adapters plus task routing at inference";
        for (const auto& [seed, run_u] : und_by_seed) {
            auto gi = gen_by_seed.find(seed);
            if (gi == gen_by_seed.end()) continue;
            comp.seeds.push_back(seed);
            for (const auto& v : run_u->summary.at("eval").at("understanding").at("margins"))
                comp.margins_u.push_back(v.get<double>());
            for (const auto& v : gi->second->summary.at("eval").at("generation").at("margins"))
                comp.margins_g.push_back(v.get<double>());
        }
        if (!comp.seeds.empty()) methods.push_back(std::move(comp));
    }

    ReportDocument doc = build_report(methods, base_method_samples(bundle, eval), runs.config_echo);
    if (!runs.incomplete.empty()) {
        doc.document["incomplete_runs"] = runs.incomplete;
        doc.text += "\nincomplete runs excluded: ";
        for (std::size_t i = 0; i < runs.incomplete.size(); ++i)
            doc.text += (i ? ", " : "") + runs.incomplete[i];
        doc.text += "\n";
    }
    return doc;
}

inline void write_report(const ReportDocument& doc, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "report.json", std::ios::binary);
        if (!out) throw IoError("cannot open report.json for writing");
        out << doc.document.dump(2) << "\n";
        if (!out) throw IoError("failed while writing report.json");
    }
    {
        std::ofstream out(out_dir / "report.txt", std::ios::binary);
        if (!out) throw IoError("cannot open report.txt for writing");
        out << doc.text;
        if (!out) throw IoError("failed while writing report.txt");
    }
}

}  // namespace bdlab
