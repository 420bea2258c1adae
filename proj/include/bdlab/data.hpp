#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdlab/config.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/types.hpp"

namespace bdlab {

// Deterministic context-keyed token rule: position t of an uncorrupted chosen
// response is (hash(context) + t) mod vocab.
inline int rule_token(std::uint64_t context_hash, std::size_t position, int vocab) {
    return static_cast<int>((context_hash + position) % static_cast<std::uint64_t>(vocab));
}

inline double rule_match_fraction(const std::vector<int>& tokens, std::uint64_t context_hash,
                                  int vocab) {
    if (tokens.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t)
        if (tokens[t] == rule_token(context_hash, t, vocab)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

namespace detail {

inline TokenSequence random_text_context(const DataConfig& cfg, const ModelConfig& model,
                                         Rng& rng) {
    TokenSequence ctx;
    ctx.modality = Modality::text;
    ctx.tokens.reserve(static_cast<std::size_t>(cfg.context_length));
    for (int i = 0; i < cfg.context_length; ++i)
        ctx.tokens.push_back(static_cast<int>(rng.next_int(0, model.text_vocab - 1)));
    return ctx;
}

inline std::vector<int> rule_tokens_with_corruption(std::uint64_t hash, std::size_t len, int vocab,
                                                    double kappa, Rng& rng) {
    std::vector<int> toks(len);
    for (std::size_t t = 0; t < len; ++t) {
        if (rng.next_double() < kappa)
            toks[t] = rule_token(hash, t, vocab);
        else
            toks[t] = static_cast<int>(rng.next_int(0, vocab - 1));
    }
    return toks;
}

inline std::vector<int> uniform_tokens(std::size_t len, int vocab, Rng& rng) {
    std::vector<int> toks(len);
    for (std::size_t t = 0; t < len; ++t)
        toks[t] = static_cast<int>(rng.next_int(0, vocab - 1));
    return toks;
}

inline constexpr int kMaxAttemptsPerPair = 1000;

}  // namespace detail

// Understanding pairs: chosen follows the context-keyed rule with per-token
// corruption probability (1 - kappa); rejected is uniform. Pairs whose
// construction margin (rule-match fraction gap) falls below the filter
// threshold are dropped and regenerated.
inline std::vector<PreferencePair> generate_understanding_pairs(const DataConfig& cfg,
                                                                const ModelConfig& model) {
    cfg.validate();
    model.validate();
    Rng rng(cfg.seed);
    std::vector<PreferencePair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.pair_count));
    long attempts = 0;
    const long max_attempts =
        static_cast<long>(cfg.pair_count) * detail::kMaxAttemptsPerPair;
    while (pairs.size() < static_cast<std::size_t>(cfg.pair_count)) {
        if (++attempts > max_attempts)
            throw ExhaustedError(
                "understanding pair generation exhausted: margin_filter_threshold " +
                std::to_string(cfg.margin_filter_threshold) + " unreachable at informativeness " +
                std::to_string(cfg.informativeness));
        PreferencePair p;
        p.task = Task::understanding;
        p.context = detail::random_text_context(cfg, model, rng);
        const std::uint64_t hash = fnv1a64(p.context.tokens);
        const auto len = static_cast<std::size_t>(rng.next_int(cfg.text_len_min, cfg.text_len_max));
        p.chosen.modality = Modality::text;
        p.chosen.tokens = detail::rule_tokens_with_corruption(hash, len, model.text_vocab,
                                                              cfg.informativeness, rng);
        p.rejected.modality = Modality::text;
        p.rejected.tokens = detail::uniform_tokens(len, model.text_vocab, rng);
        p.construction_margin = rule_match_fraction(p.chosen.tokens, hash, model.text_vocab) -
                                rule_match_fraction(p.rejected.tokens, hash, model.text_vocab);
        if (p.construction_margin < cfg.margin_filter_threshold) continue;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

// Generation pairs. same_distribution: chosen and rejected are both uniform
// length-N code sequences (the indistinguishable regime) and the margin filter
// is bypassed. rule_separated: chosen follows the rule with corruption
// (1 - kappa), rejected uniform, filter applied -- a dose-response control.
inline std::vector<PreferencePair> generate_generation_pairs(const DataConfig& cfg,
                                                             const ModelConfig& model,
                                                             GenPairMode mode) {
    cfg.validate();
    model.validate();
    Rng rng(cfg.seed);
    std::vector<PreferencePair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.pair_count));
    const auto n = static_cast<std::size_t>(model.gen_tokens);
    long attempts = 0;
    const long max_attempts =
        static_cast<long>(cfg.pair_count) * detail::kMaxAttemptsPerPair;
    while (pairs.size() < static_cast<std::size_t>(cfg.pair_count)) {
        if (++attempts > max_attempts)
            throw ExhaustedError(
                "generation pair generation exhausted: margin_filter_threshold " +
                std::to_string(cfg.margin_filter_threshold) + " unreachable at informativeness " +
                std::to_string(cfg.informativeness));
        PreferencePair p;
        p.task = Task::generation;
        p.context = detail::random_text_context(cfg, model, rng);
        const std::uint64_t hash = fnv1a64(p.context.tokens);
        p.chosen.modality = Modality::code;
        p.rejected.modality = Modality::code;
        if (mode == GenPairMode::same_distribution) {
            p.chosen.tokens = detail::uniform_tokens(n, model.code_vocab, rng);
        } else {
            p.chosen.tokens = detail::rule_tokens_with_corruption(hash, n, model.code_vocab,
                                                                  cfg.informativeness, rng);
        }
        p.rejected.tokens = detail::uniform_tokens(n, model.code_vocab, rng);
        p.construction_margin = rule_match_fraction(p.chosen.tokens, hash, model.code_vocab) -
                                rule_match_fraction(p.rejected.tokens, hash, model.code_vocab);
        if (mode == GenPairMode::rule_separated &&
            p.construction_margin < cfg.margin_filter_threshold)
            continue;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<PreferencePair> generate_generation_pairs(const DataConfig& cfg,
                                                             const ModelConfig& model) {
    return generate_generation_pairs(cfg, model, cfg.gen_mode);
}

// ---------------------------------------------------------------------------
// JSONL serialization: a header line carrying config + seed, then one pair
// per line.
// ---------------------------------------------------------------------------

struct DatasetFile {
    json header;
    std::vector<PreferencePair> pairs;

    std::vector<PreferencePair> task_pairs(Task t) const {
        std::vector<PreferencePair> out;
        for (const PreferencePair& p : pairs)
            if (p.task == t) out.push_back(p);
        return out;
    }
};

inline json pair_to_json(const PreferencePair& p) {
    return json{{"task", to_string(p.task)},
                {"context", p.context.tokens},
                {"chosen", p.chosen.tokens},
                {"rejected", p.rejected.tokens},
                {"construction_margin", p.construction_margin}};
}

inline PreferencePair pair_from_json(const json& j) {
    PreferencePair p;
    p.task = task_from_string(j.at("task").get<std::string>());
    p.context.modality = Modality::text;
    j.at("context").get_to(p.context.tokens);
    const Modality resp = response_modality(p.task);
    p.chosen.modality = resp;
    p.rejected.modality = resp;
    j.at("chosen").get_to(p.chosen.tokens);
    j.at("rejected").get_to(p.rejected.tokens);
    j.at("construction_margin").get_to(p.construction_margin);
    return p;
}

inline void write_pairs_jsonl(const std::string& path, const std::vector<PreferencePair>& pairs,
                              const json& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    json h = header;
    h["format"] = "bdlab-pairs-v1";
    out << h.dump() << "\n";
    for (const PreferencePair& p : pairs) out << pair_to_json(p).dump() << "\n";
    if (!out) throw IoError("failed while writing " + path);
}

inline DatasetFile read_pairs_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    DatasetFile file;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file " + path);
    file.header = json::parse(line);
    if (file.header.value("format", "") != "bdlab-pairs-v1")
        throw IoError(path + " is not a bdlab-pairs-v1 file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        file.pairs.push_back(pair_from_json(json::parse(line)));
    }
    return file;
}

}  // namespace bdlab
