#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdlab/errors.hpp"
#include "bdlab/types.hpp"

namespace bdlab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

struct ModelConfig {
    int hidden_dim = 32;       // d
    int trunk_layers = 4;      // L
    int text_vocab = 128;      // V_T
    int code_vocab = 256;      // V_G (full-scale codebook is 16,384)
    int adapter_rank = 4;      // r
    double adapter_scale = 2.0;  // s, mirroring alpha/rank = 128/64
    int gen_tokens = 576;      // N, code-response length
    double base_init_std = 0.2;
    std::uint64_t seed = 1;

    void validate() const {
        if (hidden_dim < 1) throw ConfigError("model.hidden_dim must be >= 1");
        if (trunk_layers < 1) throw ConfigError("model.trunk_layers must be >= 1");
        if (text_vocab < 1) throw ConfigError("model.text_vocab must be >= 1");
        if (code_vocab < 1) throw ConfigError("model.code_vocab must be >= 1");
        if (adapter_rank < 1) throw ConfigError("model.adapter_rank must be >= 1");
        if (!(adapter_scale > 0.0)) throw ConfigError("model.adapter_scale must be > 0");
        if (gen_tokens < 1) throw ConfigError("model.gen_tokens must be >= 1");
        if (!(base_init_std > 0.0)) throw ConfigError("model.base_init_std must be > 0");
    }

    int vocab(Modality m) const { return m == Modality::text ? text_vocab : code_vocab; }

    bool operator==(const ModelConfig&) const = default;
};

inline void to_json(json& j, const ModelConfig& c) {
    j = json{{"hidden_dim", c.hidden_dim},
             {"trunk_layers", c.trunk_layers},
             {"text_vocab", c.text_vocab},
             {"code_vocab", c.code_vocab},
             {"adapter_rank", c.adapter_rank},
             {"adapter_scale", c.adapter_scale},
             {"gen_tokens", c.gen_tokens},
             {"base_init_std", c.base_init_std},
             {"seed", c.seed}};
}

inline void from_json(const json& j, ModelConfig& c) {
    j.at("hidden_dim").get_to(c.hidden_dim);
    j.at("trunk_layers").get_to(c.trunk_layers);
    j.at("text_vocab").get_to(c.text_vocab);
    j.at("code_vocab").get_to(c.code_vocab);
    j.at("adapter_rank").get_to(c.adapter_rank);
    j.at("adapter_scale").get_to(c.adapter_scale);
    j.at("gen_tokens").get_to(c.gen_tokens);
    j.at("base_init_std").get_to(c.base_init_std);
    j.at("seed").get_to(c.seed);
}

// ---------------------------------------------------------------------------
// dpo
// ---------------------------------------------------------------------------

struct DpoConfig {
    double beta = 0.1;
    double joint_alpha = 0.5;

    void validate() const {
        if (!(beta > 0.0)) throw ConfigError("dpo.beta must be > 0");
        if (joint_alpha < 0.0 || joint_alpha > 1.0)
            throw ConfigError("dpo.joint_alpha must be in [0, 1]");
    }
};

inline void to_json(json& j, const DpoConfig& c) {
    j = json{{"beta", c.beta}, {"joint_alpha", c.joint_alpha}};
}

inline void from_json(const json& j, DpoConfig& c) {
    j.at("beta").get_to(c.beta);
    j.at("joint_alpha").get_to(c.joint_alpha);
}

// ---------------------------------------------------------------------------
// balancing
// ---------------------------------------------------------------------------

enum class Strategy {
    understanding_only,
    generation_only,
    naive_joint,
    grad_weighted,
    pcgrad,
    length_normalized,
    fixed_weight,
};

inline const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> v = {
        Strategy::understanding_only, Strategy::generation_only, Strategy::naive_joint,
        Strategy::grad_weighted,      Strategy::pcgrad,          Strategy::length_normalized,
        Strategy::fixed_weight,
    };
    return v;
}

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::understanding_only: return "understanding_only";
        case Strategy::generation_only: return "generation_only";
        case Strategy::naive_joint: return "naive_joint";
        case Strategy::grad_weighted: return "grad_weighted";
        case Strategy::pcgrad: return "pcgrad";
        case Strategy::length_normalized: return "length_normalized";
        case Strategy::fixed_weight: return "fixed_weight";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    for (Strategy k : all_strategies())
        if (s == to_string(k)) return k;
    throw ConfigError("unknown strategy: " + s);
}

struct WeightState {
    double w_u = 0.5;
    double w_g = 0.5;
    long last_recompute_step = 0;
    double norm_u_snapshot = 0.0;
    double norm_g_snapshot = 0.0;
};

struct BalancingConfig {
    Strategy strategy = Strategy::naive_joint;
    double joint_alpha = 0.5;
    double fixed_w_u = 0.93;
    double fixed_w_g = 0.07;
    int recompute_interval = 50;  // K
    // Sequence lengths used by the length_normalized strategy; the trainer
    // fills seq_len_t with the dataset's mean text length.
    double seq_len_n = 576.0;
    double seq_len_t = 65.0;

    void validate() const {
        if (joint_alpha < 0.0 || joint_alpha > 1.0)
            throw ConfigError("balancing.joint_alpha must be in [0, 1]");
        if (fixed_w_u < 0.0 || fixed_w_g < 0.0)
            throw ConfigError("balancing.fixed weights must be nonnegative");
        if (std::abs(fixed_w_u + fixed_w_g - 1.0) > 1e-9)
            throw ConfigError("balancing.fixed weights must sum to 1");
        if (recompute_interval < 1) throw ConfigError("balancing.recompute_interval must be >= 1");
    }
};

inline void to_json(json& j, const BalancingConfig& c) {
    j = json{{"strategy", to_string(c.strategy)},
             {"joint_alpha", c.joint_alpha},
             {"fixed_w_u", c.fixed_w_u},
             {"fixed_w_g", c.fixed_w_g},
             {"recompute_interval", c.recompute_interval},
             {"seq_len_n", c.seq_len_n},
             {"seq_len_t", c.seq_len_t}};
}

inline void from_json(const json& j, BalancingConfig& c) {
    c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    j.at("joint_alpha").get_to(c.joint_alpha);
    j.at("fixed_w_u").get_to(c.fixed_w_u);
    j.at("fixed_w_g").get_to(c.fixed_w_g);
    j.at("recompute_interval").get_to(c.recompute_interval);
    j.at("seq_len_n").get_to(c.seq_len_n);
    j.at("seq_len_t").get_to(c.seq_len_t);
}

// ---------------------------------------------------------------------------
// data
// ---------------------------------------------------------------------------

enum class GenPairMode { same_distribution, rule_separated };

inline const char* to_string(GenPairMode m) {
    return m == GenPairMode::same_distribution ? "same_distribution" : "rule_separated";
}

inline GenPairMode gen_pair_mode_from_string(const std::string& s) {
    if (s == "same_distribution") return GenPairMode::same_distribution;
    if (s == "rule_separated") return GenPairMode::rule_separated;
    throw ConfigError("unknown generation pair mode: " + s);
}

struct DataConfig {
    Task task = Task::understanding;
    int pair_count = 1300;          // 1,300 understanding / 288 generation by default
    int context_length = 16;
    int text_len_min = 30;
    int text_len_max = 100;
    double informativeness = 1.0;   // kappa in [0,1]
    double margin_filter_threshold = 0.5;
    GenPairMode gen_mode = GenPairMode::same_distribution;
    std::uint64_t seed = 1;

    void validate() const {
        if (pair_count < 1) throw ConfigError("data.pair_count must be >= 1");
        if (context_length < 1) throw ConfigError("data.context_length must be >= 1");
        if (text_len_min < 1 || text_len_max < text_len_min)
            throw ConfigError("data.text_len band must satisfy 1 <= min <= max");
        if (informativeness < 0.0 || informativeness > 1.0)
            throw ConfigError("data.informativeness must be in [0, 1]");
        if (margin_filter_threshold < 0.0)
            throw ConfigError("data.margin_filter_threshold must be >= 0");
    }
};

inline void to_json(json& j, const DataConfig& c) {
    j = json{{"task", to_string(c.task)},
             {"pair_count", c.pair_count},
             {"context_length", c.context_length},
             {"text_len_min", c.text_len_min},
             {"text_len_max", c.text_len_max},
             {"informativeness", c.informativeness},
             {"margin_filter_threshold", c.margin_filter_threshold},
             {"gen_mode", to_string(c.gen_mode)},
             {"seed", c.seed}};
}

inline void from_json(const json& j, DataConfig& c) {
    c.task = task_from_string(j.at("task").get<std::string>());
    j.at("pair_count").get_to(c.pair_count);
    j.at("context_length").get_to(c.context_length);
    j.at("text_len_min").get_to(c.text_len_min);
    j.at("text_len_max").get_to(c.text_len_max);
    j.at("informativeness").get_to(c.informativeness);
    j.at("margin_filter_threshold").get_to(c.margin_filter_threshold);
    c.gen_mode = gen_pair_mode_from_string(j.at("gen_mode").get<std::string>());
    j.at("seed").get_to(c.seed);
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int steps = 1000;
    int batch_size = 1;             // fixed; one pair per required task per step
    double lr = 1e-3;               // desk-scale default
    double lr_min = 0.0;
    double lr_full_scale = 1e-6;    // recorded reference value for full-scale runs
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    DpoConfig dpo;
    BalancingConfig balancing;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int eval_pairs = 200;
    int kl_samples_per_context = 1;

    void validate() const {
        if (steps < 0) throw ConfigError("train.steps must be >= 0");
        if (batch_size != 1) throw ConfigError("train.batch_size is fixed at 1");
        if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
        if (lr_min < 0.0) throw ConfigError("train.lr_min must be >= 0");
        if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
        if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
        if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) throw ConfigError("train.adam_beta1 must be in [0, 1)");
        if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) throw ConfigError("train.adam_beta2 must be in [0, 1)");
        if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
        if (seeds.empty()) throw ConfigError("train.seeds must be nonempty");
        if (eval_pairs < 1) throw ConfigError("train.eval_pairs must be >= 1");
        if (kl_samples_per_context < 1) throw ConfigError("train.kl_samples_per_context must be >= 1");
        dpo.validate();
        balancing.validate();
    }
};

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"steps", c.steps},
             {"batch_size", c.batch_size},
             {"lr", c.lr},
             {"lr_min", c.lr_min},
             {"lr_full_scale", c.lr_full_scale},
             {"weight_decay", c.weight_decay},
             {"clip_norm", c.clip_norm},
             {"adam_beta1", c.adam_beta1},
             {"adam_beta2", c.adam_beta2},
             {"adam_eps", c.adam_eps},
             {"dpo", c.dpo},
             {"balancing", c.balancing},
             {"seeds", c.seeds},
             {"eval_pairs", c.eval_pairs},
             {"kl_samples_per_context", c.kl_samples_per_context}};
}

inline void from_json(const json& j, TrainConfig& c) {
    j.at("steps").get_to(c.steps);
    j.at("batch_size").get_to(c.batch_size);
    j.at("lr").get_to(c.lr);
    j.at("lr_min").get_to(c.lr_min);
    j.at("lr_full_scale").get_to(c.lr_full_scale);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("clip_norm").get_to(c.clip_norm);
    j.at("adam_beta1").get_to(c.adam_beta1);
    j.at("adam_beta2").get_to(c.adam_beta2);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("dpo").get_to(c.dpo);
    j.at("balancing").get_to(c.balancing);
    j.at("seeds").get_to(c.seeds);
    j.at("eval_pairs").get_to(c.eval_pairs);
    j.at("kl_samples_per_context").get_to(c.kl_samples_per_context);
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

struct DiagnosticsConfig {
    int n_batches = 200;
    bool include_heads = false;  // measure on adapters only by default
    std::uint64_t seed = 1;

    void validate() const {
        if (n_batches < 0) throw ConfigError("diagnostics.n_batches must be >= 0");
    }
};

inline void to_json(json& j, const DiagnosticsConfig& c) {
    j = json{{"n_batches", c.n_batches}, {"include_heads", c.include_heads}, {"seed", c.seed}};
}

}  // namespace bdlab
