#pragma once

#include <string>
#include <vector>

#include "bdlab/config.hpp"
#include "bdlab/ini.hpp"

namespace bdlab {

// Everything a run needs, assembled from the config file's sections with flag
// overrides applied on top by the CLI.
struct ConfigBundle {
    ModelConfig model;
    DataConfig data_understanding;
    DataConfig data_generation;
    TrainConfig train;
    DiagnosticsConfig diagnostics;
    std::vector<double> soup_lambdas = {0.3, 0.5, 0.7};

    void validate() const {
        model.validate();
        data_understanding.validate();
        data_generation.validate();
        train.validate();
        diagnostics.validate();
        for (double l : soup_lambdas)
            if (l < 0.0 || l > 1.0) throw ConfigError("report.soup_lambdas must be in [0, 1]");
    }
};

inline ConfigBundle default_bundle() {
    ConfigBundle b;
    b.data_understanding.task = Task::understanding;
    b.data_understanding.pair_count = 1300;
    b.data_understanding.informativeness = 1.0;
    b.data_generation.task = Task::generation;
    b.data_generation.pair_count = 288;
    b.data_generation.informativeness = 0.0;
    b.data_generation.gen_mode = GenPairMode::same_distribution;
    return b;
}

inline ConfigBundle bundle_from_ini(IniReader& r) {
    ConfigBundle b = default_bundle();

    b.model.hidden_dim = static_cast<int>(r.get_long("model", "hidden_dim", b.model.hidden_dim));
    b.model.trunk_layers = static_cast<int>(r.get_long("model", "trunk_layers", b.model.trunk_layers));
    b.model.text_vocab = static_cast<int>(r.get_long("model", "text_vocab", b.model.text_vocab));
    b.model.code_vocab = static_cast<int>(r.get_long("model", "code_vocab", b.model.code_vocab));
    b.model.adapter_rank = static_cast<int>(r.get_long("model", "adapter_rank", b.model.adapter_rank));
    b.model.adapter_scale = r.get_double("model", "adapter_scale", b.model.adapter_scale);
    b.model.gen_tokens = static_cast<int>(r.get_long("model", "gen_tokens", b.model.gen_tokens));
    b.model.base_init_std = r.get_double("model", "base_init_std", b.model.base_init_std);
    b.model.seed = static_cast<std::uint64_t>(r.get_long("model", "seed", static_cast<long>(b.model.seed)));

    auto read_common = [&](DataConfig& d) {
        d.context_length = static_cast<int>(r.get_long("data", "context_length", d.context_length));
        d.text_len_min = static_cast<int>(r.get_long("data", "text_len_min", d.text_len_min));
        d.text_len_max = static_cast<int>(r.get_long("data", "text_len_max", d.text_len_max));
        d.margin_filter_threshold =
            r.get_double("data", "margin_filter_threshold", d.margin_filter_threshold);
        d.seed = static_cast<std::uint64_t>(r.get_long("data", "seed", static_cast<long>(d.seed)));
    };
    read_common(b.data_understanding);
    read_common(b.data_generation);
    b.data_understanding.pair_count = static_cast<int>(
        r.get_long("data", "understanding_pairs", b.data_understanding.pair_count));
    b.data_generation.pair_count =
        static_cast<int>(r.get_long("data", "generation_pairs", b.data_generation.pair_count));
    b.data_understanding.informativeness = r.get_double(
        "data", "informativeness_understanding", b.data_understanding.informativeness);
    b.data_generation.informativeness =
        r.get_double("data", "informativeness_generation", b.data_generation.informativeness);
    b.data_generation.gen_mode = gen_pair_mode_from_string(
        r.get_string("data", "generation_mode", to_string(b.data_generation.gen_mode)));

    b.train.dpo.beta = r.get_double("dpo", "beta", b.train.dpo.beta);
    b.train.dpo.joint_alpha = r.get_double("dpo", "joint_alpha", b.train.dpo.joint_alpha);
    b.train.balancing.joint_alpha = b.train.dpo.joint_alpha;

    b.train.balancing.strategy = strategy_from_string(
        r.get_string("balancing", "strategy", to_string(b.train.balancing.strategy)));
    b.train.balancing.fixed_w_u =
        r.get_double("balancing", "fixed_w_u", b.train.balancing.fixed_w_u);
    b.train.balancing.fixed_w_g =
        r.get_double("balancing", "fixed_w_g", b.train.balancing.fixed_w_g);
    b.train.balancing.recompute_interval = static_cast<int>(
        r.get_long("balancing", "recompute_interval", b.train.balancing.recompute_interval));

    b.train.steps = static_cast<int>(r.get_long("train", "steps", b.train.steps));
    b.train.lr = r.get_double("train", "lr", b.train.lr);
    b.train.lr_min = r.get_double("train", "lr_min", b.train.lr_min);
    b.train.weight_decay = r.get_double("train", "weight_decay", b.train.weight_decay);
    b.train.clip_norm = r.get_double("train", "clip_norm", b.train.clip_norm);
    b.train.adam_beta1 = r.get_double("train", "adam_beta1", b.train.adam_beta1);
    b.train.adam_beta2 = r.get_double("train", "adam_beta2", b.train.adam_beta2);
    b.train.adam_eps = r.get_double("train", "adam_eps", b.train.adam_eps);
    b.train.seeds = r.get_list<std::uint64_t>("train", "seeds", b.train.seeds, [](const std::string& s) {
        return static_cast<std::uint64_t>(std::stoul(s));
    });
    b.train.eval_pairs = static_cast<int>(r.get_long("train", "eval_pairs", b.train.eval_pairs));
    b.train.kl_samples_per_context = static_cast<int>(
        r.get_long("train", "kl_samples_per_context", b.train.kl_samples_per_context));

    b.diagnostics.n_batches =
        static_cast<int>(r.get_long("diagnostics", "n_batches", b.diagnostics.n_batches));
    b.diagnostics.include_heads =
        r.get_bool("diagnostics", "include_heads", b.diagnostics.include_heads);
    b.diagnostics.seed = static_cast<std::uint64_t>(
        r.get_long("diagnostics", "seed", static_cast<long>(b.diagnostics.seed)));

    b.soup_lambdas = r.get_list<double>("report", "soup_lambdas", b.soup_lambdas,
                                        [](const std::string& s) { return std::stod(s); });

    r.reject_unknown_keys();
    return b;
}

inline ConfigBundle load_bundle(const std::string& config_path) {
    if (config_path.empty()) return default_bundle();
    IniReader reader(parse_ini_file(config_path));
    return bundle_from_ini(reader);
}

inline json bundle_to_json(const ConfigBundle& b) {
    return json{{"model", b.model},
                {"data_understanding", b.data_understanding},
                {"data_generation", b.data_generation},
                {"train", b.train},
                {"diagnostics", b.diagnostics},
                {"soup_lambdas", b.soup_lambdas}};
}

inline ConfigBundle bundle_from_json(const json& j) {
    ConfigBundle b;
    j.at("model").get_to(b.model);
    j.at("data_understanding").get_to(b.data_understanding);
    j.at("data_generation").get_to(b.data_generation);
    j.at("train").get_to(b.train);
    b.diagnostics.n_batches = j.at("diagnostics").at("n_batches").get<int>();
    b.diagnostics.include_heads = j.at("diagnostics").at("include_heads").get<bool>();
    b.diagnostics.seed = j.at("diagnostics").at("seed").get<std::uint64_t>();
    j.at("soup_lambdas").get_to(b.soup_lambdas);
    return b;
}

}  // namespace bdlab
