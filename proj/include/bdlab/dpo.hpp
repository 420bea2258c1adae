#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "bdlab/config.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/gradient.hpp"
#include "bdlab/model.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/types.hpp"

namespace bdlab {

// Numerically stable -log sigma(x) = log(1 + exp(-x)). beta * margin can reach
// +-1e2 late in training.
inline double neg_log_sigmoid(double x) {
    if (x >= 0.0) return std::log1p(std::exp(-x));
    return -x + std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Per-dataset cache of reference-policy log-probabilities. The reference never
// mutates, so each pair's values are computed once and reused across steps.
class ReferenceLogprobCache {
public:
    explicit ReferenceLogprobCache(std::size_t n) : chosen_(n), rejected_(n) {}

    double chosen(const ModelState& st, const std::vector<PreferencePair>& pairs, std::size_t i) {
        if (!chosen_[i]) chosen_[i] = sequence_logprob(st, pairs[i].context, pairs[i].chosen, true);
        return *chosen_[i];
    }
    double rejected(const ModelState& st, const std::vector<PreferencePair>& pairs, std::size_t i) {
        if (!rejected_[i])
            rejected_[i] = sequence_logprob(st, pairs[i].context, pairs[i].rejected, true);
        return *rejected_[i];
    }

private:
    std::vector<std::optional<double>> chosen_, rejected_;
};

// Delta_theta = [log pi(y_w) - log pi_ref(y_w)] - [log pi(y_l) - log pi_ref(y_l)].
inline double implicit_margin(const ModelState& st, const PreferencePair& pair) {
    validate_pair_tags(pair);
    const double lw = sequence_logprob(st, pair.context, pair.chosen, false);
    const double ll = sequence_logprob(st, pair.context, pair.rejected, false);
    const double rw = sequence_logprob(st, pair.context, pair.chosen, true);
    const double rl = sequence_logprob(st, pair.context, pair.rejected, true);
    return (lw - rw) - (ll - rl);
}

inline double dpo_loss_from_margin(double margin, const DpoConfig& cfg) {
    return neg_log_sigmoid(cfg.beta * margin);
}

// -log sigma(beta * Delta); > 0 always, equal to ln 2 iff Delta = 0.
inline double dpo_loss(const ModelState& st, const PreferencePair& pair, const DpoConfig& cfg) {
    return dpo_loss_from_margin(implicit_margin(st, pair), cfg);
}

// alpha * L_U + (1 - alpha) * L_G.
inline double joint_loss(const ModelState& st, const PreferencePair& pair_u,
                         const PreferencePair& pair_g, const DpoConfig& cfg) {
    if (pair_u.task != Task::understanding)
        throw DomainError("joint_loss: first pair must be an understanding pair");
    if (pair_g.task != Task::generation)
        throw DomainError("joint_loss: second pair must be a generation pair");
    return cfg.joint_alpha * dpo_loss(st, pair_u, cfg) +
           (1.0 - cfg.joint_alpha) * dpo_loss(st, pair_g, cfg);
}

struct DpoBatchResult {
    double loss = 0.0;
    double margin = 0.0;
    GradientVector grad;
};

// Loss, margin, and exact gradient for one preference pair. The chosen and
// rejected backward passes go into separate buffers and are differenced
// coordinate-wise, so identical sequences cancel to a bitwise-zero gradient.
inline DpoBatchResult dpo_gradient(const ModelState& st, const PreferencePair& pair,
                                   const DpoConfig& cfg, double ref_chosen_logprob,
                                   double ref_rejected_logprob) {
    validate_pair_tags(pair);
    const SequenceTrace tw = sequence_forward(st, pair.context, pair.chosen, false);
    const SequenceTrace tl = sequence_forward(st, pair.context, pair.rejected, false);

    DpoBatchResult out;
    out.margin = (tw.logprob - ref_chosen_logprob) - (tl.logprob - ref_rejected_logprob);
    out.loss = dpo_loss_from_margin(out.margin, cfg);

    // dL/d lp_w = -beta (1 - sigma(beta Delta)); dL/d lp_l is its negative.
    const double factor = -cfg.beta * (1.0 - sigmoid(cfg.beta * out.margin));
    GradientVector gw = backward(st, tw, 1.0);
    const GradientVector gl = backward(st, tl, 1.0);
    auto vw = gw.mutable_values();
    const auto vl = gl.values();
    for (std::size_t i = 0; i < vw.size(); ++i) vw[i] = factor * (vw[i] - vl[i]);
    out.grad = std::move(gw);
    return out;
}

inline DpoBatchResult dpo_gradient(const ModelState& st, const PreferencePair& pair,
                                   const DpoConfig& cfg) {
    const double rw = sequence_logprob(st, pair.context, pair.chosen, true);
    const double rl = sequence_logprob(st, pair.context, pair.rejected, true);
    return dpo_gradient(st, pair, cfg, rw, rl);
}

// ---------------------------------------------------------------------------
// KL(pi_theta || pi_ref), Monte-Carlo over ancestral samples from the live
// policy at temperature 1.0.
// ---------------------------------------------------------------------------

struct KlEstimate {
    double per_sequence = 0.0;  // nats/sequence
    double per_sequence_se = 0.0;
    double per_token = 0.0;  // per_sequence / mean sequence length
    double mean_length = 0.0;
    int n_samples = 0;
};

namespace detail {

inline int sample_from_probs(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        acc += probs[v];
        if (u < acc) return static_cast<int>(v);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

// For each context, draw `samples_per_context` responses from the live policy
// (length matched to the pair's chosen response) and accumulate
// log pi_theta - log pi_ref. The estimate is >= 0 in expectation; the raw
// value is reported with its standard error.
inline KlEstimate kl_to_reference(const ModelState& st, const std::vector<PreferencePair>& pairs,
                                  Task task, std::uint64_t seed, int samples_per_context = 1) {
    if (pairs.empty()) throw DomainError("kl_to_reference requires a nonempty dataset");
    const Modality mod = response_modality(task);
    Rng rng(seed);

    std::vector<double> per_sample;
    double total_len = 0.0;
    std::vector<double> probs_live, probs_ref;
    for (const PreferencePair& pair : pairs) {
        if (pair.task != task) throw DomainError("kl_to_reference: pair task mismatch");
        const auto c_live = context_mean(st, pair.context, false);
        const auto c_ref = context_mean(st, pair.context, true);
        const auto len = pair.chosen.size();
        for (int s = 0; s < samples_per_context; ++s) {
            double acc = 0.0;
            int prev = -1;
            for (std::size_t t = 0; t < len; ++t) {
                next_token_probs(st, c_live, prev, mod, false, probs_live);
                next_token_probs(st, c_ref, prev, mod, true, probs_ref);
                const int tok = detail::sample_from_probs(probs_live, rng);
                acc += std::log(probs_live[static_cast<std::size_t>(tok)]) -
                       std::log(probs_ref[static_cast<std::size_t>(tok)]);
                prev = tok;
            }
            per_sample.push_back(acc);
            total_len += static_cast<double>(len);
        }
    }

    KlEstimate est;
    est.n_samples = static_cast<int>(per_sample.size());
    double mean = 0.0;
    for (double v : per_sample) mean += v;
    mean /= static_cast<double>(per_sample.size());
    double var = 0.0;
    for (double v : per_sample) var += (v - mean) * (v - mean);
    if (per_sample.size() > 1) var /= static_cast<double>(per_sample.size() - 1);
    est.per_sequence = mean;
    est.per_sequence_se = std::sqrt(var / static_cast<double>(per_sample.size()));
    est.mean_length = total_len / static_cast<double>(per_sample.size());
    est.per_token = mean / est.mean_length;
    return est;
}

}  // namespace bdlab
