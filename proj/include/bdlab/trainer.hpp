#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bdlab/balancing.hpp"
#include "bdlab/config.hpp"
#include "bdlab/data.hpp"
#include "bdlab/dpo.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/gradient.hpp"
#include "bdlab/model.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2.
inline double cosine_lr(long step, long total, double lr_max, double lr_min) {
    if (step < 0 || step > total) throw DomainError("cosine_lr requires 0 <= step <= total");
    if (total == 0) return lr_max;
    return lr_min + 0.5 * (lr_max - lr_min) *
                        (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total)));
}

// Scale the gradient to max_norm when it exceeds it.
inline void clip_gradient_inplace(GradientVector& g, double max_norm) {
    if (!(max_norm > 0.0)) throw DomainError("clip_gradient requires max_norm > 0");
    const double n = g.norm();
    if (n > max_norm) g.scale(max_norm / n);
}

inline GradientVector clip_gradient(GradientVector g, double max_norm) {
    clip_gradient_inplace(g, max_norm);
    return g;
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay; moments persist across steps.
// ---------------------------------------------------------------------------

struct AdamWParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamWState {
    std::vector<double> m, v;
    long t = 0;

    explicit AdamWState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Core update on a flat parameter array; exposed separately so the closed-form
// single-step cases are directly checkable.
inline void adamw_update(std::span<double> params, std::span<const double> grad, AdamWState& opt,
                         const AdamWParams& hp) {
    if (params.size() != grad.size() || opt.m.size() != grad.size())
        throw DomainError("adamw_update: size mismatch");
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(opt.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        opt.m[i] = hp.beta1 * opt.m[i] + (1.0 - hp.beta1) * g;
        opt.v[i] = hp.beta2 * opt.v[i] + (1.0 - hp.beta2) * g * g;
        const double mhat = opt.m[i] / bc1;
        const double vhat = opt.v[i] / bc2;
        params[i] -= hp.lr * (mhat / (std::sqrt(vhat) + hp.eps) + hp.weight_decay * params[i]);
    }
}

// Apply one AdamW step to the model's trainable parameters.
inline void adamw_step(ModelState& st, AdamWState& opt, const GradientVector& grad,
                       const AdamWParams& hp) {
    if (!grad.all_finite())
        throw DomainError("adamw_step: non-finite gradient; aborting the run");
    const auto& segs = st.layout.trainable_map->segments();
    // The gradient space is contiguous per segment; walk segments and update
    // the corresponding parameter ranges, sharing one moment buffer laid out
    // in gradient space.
    if (opt.m.size() != grad.size()) throw DomainError("adamw_step: optimizer state mismatch");
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(opt.t));
    const auto gv = grad.values();
    for (std::size_t si = 0; si < segs.size(); ++si) {
        const Segment& s = segs[si];
        double* p = st.params.data() + st.layout.trainable_param_offsets[si];
        for (std::size_t k = 0; k < s.size(); ++k) {
            const std::size_t gi = s.begin + k;
            const double g = gv[gi];
            opt.m[gi] = hp.beta1 * opt.m[gi] + (1.0 - hp.beta1) * g;
            opt.v[gi] = hp.beta2 * opt.v[gi] + (1.0 - hp.beta2) * g * g;
            const double mhat = opt.m[gi] / bc1;
            const double vhat = opt.v[gi] / bc2;
            p[k] -= hp.lr * (mhat / (std::sqrt(vhat) + hp.eps) + hp.weight_decay * p[k]);
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrajectoryPoint {
    long step = 0;
    double loss_u = 0.0;
    double loss_g = 0.0;
    double loss_combined = 0.0;
    double cos_ug = 0.0;
    double norm_u = 0.0;
    double norm_g = 0.0;
    double w_u = 0.0;
    double w_g = 0.0;
    double lr = 0.0;
};

struct Datasets {
    std::vector<PreferencePair> understanding;
    std::vector<PreferencePair> generation;
};

struct TrainResult {
    std::vector<TrajectoryPoint> trajectory;
    WeightState final_weights;
};

namespace detail {

// Shuffled cyclic iteration with an independent per-task cursor, re-shuffled
// each epoch.
class PairSchedule {
public:
    PairSchedule(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        rng_.shuffle(order_);
    }

    std::size_t next() {
        if (cursor_ == order_.size()) {
            rng_.shuffle(order_);
            cursor_ = 0;
        }
        return order_[cursor_++];
    }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

}  // namespace detail

// Run the optimization loop: per step, one pair per required task, per-task
// losses and gradients, strategy combination, clipping, AdamW. The reference
// snapshot never mutates. Interference metrics are logged on the
// shared-parameter (adapter) view each step.
inline TrainResult train(ModelState& st, const Datasets& data, const TrainConfig& cfg,
                         std::uint64_t run_seed) {
    cfg.validate();
    const Strategy strat = cfg.balancing.strategy;
    const bool need_u = strategy_needs_understanding(strat);
    const bool need_g = strategy_needs_generation(strat);
    if (need_u && data.understanding.empty())
        throw DomainError("strategy requires understanding pairs");
    if (need_g && data.generation.empty())
        throw DomainError("strategy requires generation pairs");

    BalancingConfig bal = cfg.balancing;
    if (!data.understanding.empty()) {
        double mean_t = 0.0;
        for (const PreferencePair& p : data.understanding)
            mean_t += static_cast<double>(p.chosen.size());
        bal.seq_len_t = mean_t / static_cast<double>(data.understanding.size());
    }
    if (!data.generation.empty())
        bal.seq_len_n = static_cast<double>(data.generation.front().chosen.size());

    detail::PairSchedule sched_u(std::max<std::size_t>(data.understanding.size(), 1),
                                 derive_seed(run_seed, 0x75));
    detail::PairSchedule sched_g(std::max<std::size_t>(data.generation.size(), 1),
                                 derive_seed(run_seed, 0x67));
    ReferenceLogprobCache cache_u(data.understanding.size());
    ReferenceLogprobCache cache_g(data.generation.size());

    AdamWState opt(st.layout.trainable_map->total_size());
    AdamWParams hp;
    hp.beta1 = cfg.adam_beta1;
    hp.beta2 = cfg.adam_beta2;
    hp.eps = cfg.adam_eps;
    hp.weight_decay = cfg.weight_decay;

    const auto shared_names = adapter_segment_names(st.config);

    TrainResult result;
    result.trajectory.reserve(static_cast<std::size_t>(cfg.steps));
    WeightState weights;
    for (long step = 0; step < cfg.steps; ++step) {
        DpoBatchResult ru, rg;
        if (need_u) {
            const std::size_t i = sched_u.next();
            ru = dpo_gradient(st, data.understanding[i], cfg.dpo,
                              cache_u.chosen(st, data.understanding, i),
                              cache_u.rejected(st, data.understanding, i));
        }
        if (need_g) {
            const std::size_t i = sched_g.next();
            rg = dpo_gradient(st, data.generation[i], cfg.dpo,
                              cache_g.chosen(st, data.generation, i),
                              cache_g.rejected(st, data.generation, i));
        }
        if ((need_u && !std::isfinite(ru.loss)) || (need_g && !std::isfinite(rg.loss)))
            throw DomainError("non-finite loss at step " + std::to_string(step));

        TrajectoryPoint pt;
        pt.step = step;
        pt.loss_u = need_u ? ru.loss : 0.0;
        pt.loss_g = need_g ? rg.loss : 0.0;
        if (need_u && need_g) {
            const GradientVector su = ru.grad.subvector(shared_names);
            const GradientVector sg = rg.grad.subvector(shared_names);
            pt.cos_ug = cosine(su, sg).value;
            pt.norm_u = su.norm();
            pt.norm_g = sg.norm();
        } else if (need_u) {
            pt.norm_u = ru.grad.subvector(shared_names).norm();
        } else {
            pt.norm_g = rg.grad.subvector(shared_names).norm();
        }

        // Weight recomputation (Eq. 8) measures norms on the theta_s view even
        // though the update gradient includes the generation head.
        CombineResult combined =
            combine(bal, weights, step, need_u ? &ru.grad : nullptr,
                    need_g ? &rg.grad : nullptr, pt.loss_u, pt.loss_g, pt.norm_u, pt.norm_g);
        weights = combined.weights;
        pt.loss_combined = combined.loss;
        pt.w_u = weights.w_u;
        pt.w_g = weights.w_g;
        pt.lr = cosine_lr(step, cfg.steps, cfg.lr, cfg.lr_min);

        if (combined.grad.norm() >= kZeroNormEps) {
            clip_gradient_inplace(combined.grad, cfg.clip_norm);
            hp.lr = pt.lr;
            adamw_step(st, opt, combined.grad, hp);
        }
        // A zero-norm combined gradient performs no parameter update; the step
        // is still logged.

        result.trajectory.push_back(pt);
    }
    result.final_weights = weights;
    return result;
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryHeader =
    "step,loss_u,loss_g,loss_combined,cos_ug,norm_u,norm_g,w_u,w_g,lr";

inline void write_trajectory_csv(const std::vector<TrajectoryPoint>& traj,
                                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << kTrajectoryHeader << "\n";
    char buf[512];
    for (const TrajectoryPoint& p : traj) {
        std::snprintf(buf, sizeof(buf),
                      "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.step,
                      p.loss_u, p.loss_g, p.loss_combined, p.cos_ug, p.norm_u, p.norm_g, p.w_u,
                      p.w_g, p.lr);
        out << buf;
    }
    if (!out) throw IoError("failed while writing " + path);
}

inline std::vector<TrajectoryPoint> read_trajectory_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory file " + path);
    if (line != kTrajectoryHeader) throw IoError(path + " has an unexpected trajectory header");
    std::vector<TrajectoryPoint> traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrajectoryPoint p;
        if (std::sscanf(line.c_str(), "%ld,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &p.step,
                        &p.loss_u, &p.loss_g, &p.loss_combined, &p.cos_ug, &p.norm_u, &p.norm_g,
                        &p.w_u, &p.w_g, &p.lr) != 10)
            throw IoError("malformed trajectory row: " + line);
        traj.push_back(p);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Post-hoc methods
// ---------------------------------------------------------------------------

namespace detail {

inline void require_same_base(const ModelState& a, const ModelState& b) {
    if (!(a.config == b.config)) throw DomainError("soup requires identical configs");
    if (a.reference != b.reference)
        throw DomainError("soup requires identical reference snapshots");
    // Frozen parameters must agree bit-for-bit; only trainable blocks may differ.
    std::vector<char> trainable(a.layout.total, 0);
    const auto& segs = a.layout.trainable_map->segments();
    for (std::size_t si = 0; si < segs.size(); ++si) {
        const std::size_t off = a.layout.trainable_param_offsets[si];
        for (std::size_t k = 0; k < segs[si].size(); ++k) trainable[off + k] = 1;
    }
    for (std::size_t i = 0; i < a.layout.total; ++i)
        if (!trainable[i] && a.params[i] != b.params[i])
            throw DomainError("soup requires identical frozen base weights");
}

}  // namespace detail

// Weight interpolation between two trained states sharing a base:
// trainable <- (1 - lambda) * a + lambda * b. lambda 0/1 reproduce the
// endpoints exactly.
inline ModelState soup_interpolate(const ModelState& a, const ModelState& b, double lambda) {
    detail::require_same_base(a, b);
    ModelState out = a;
    const auto& segs = a.layout.trainable_map->segments();
    for (std::size_t si = 0; si < segs.size(); ++si) {
        const std::size_t off = a.layout.trainable_param_offsets[si];
        for (std::size_t k = 0; k < segs[si].size(); ++k)
            out.params[off + k] = (1.0 - lambda) * a.params[off + k] + lambda * b.params[off + k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct TaskEval {
    std::vector<double> margins;  // per held-out pair
    double mean_margin = 0.0;
    double mean_loss = 0.0;
    double preference_accuracy = 0.0;  // fraction with positive margin
};

inline TaskEval evaluate_task(const ModelState& st, const std::vector<PreferencePair>& pairs,
                              const DpoConfig& dpo) {
    if (pairs.empty()) throw DomainError("evaluate_task requires a nonempty dataset");
    TaskEval ev;
    ev.margins.reserve(pairs.size());
    double loss_acc = 0.0;
    std::size_t wins = 0;
    for (const PreferencePair& p : pairs) {
        const double m = implicit_margin(st, p);
        ev.margins.push_back(m);
        loss_acc += dpo_loss_from_margin(m, dpo);
        if (m > 0.0) ++wins;
    }
    ev.mean_margin = sample_mean(ev.margins);
    ev.mean_loss = loss_acc / static_cast<double>(pairs.size());
    ev.preference_accuracy = static_cast<double>(wins) / static_cast<double>(pairs.size());
    return ev;
}

struct CompositeEval {
    TaskEval understanding;  // from the understanding-trained state
    TaskEval generation;     // from the generation-trained state
    bool non_deployable = true;  // two adapters + task routing at inference
};

// Composite oracle: understanding metrics from state_u, generation metrics
// from state_g.
inline CompositeEval separate_adapter_eval(const ModelState& state_u, const ModelState& state_g,
                                           const std::vector<PreferencePair>& eval_u,
                                           const std::vector<PreferencePair>& eval_g,
                                           const DpoConfig& dpo) {
    CompositeEval ev;
    ev.understanding = evaluate_task(state_u, eval_u, dpo);
    ev.generation = evaluate_task(state_g, eval_g, dpo);
    return ev;
}

}  // namespace bdlab
