#pragma once

#include <cmath>
#include <utility>

#include "bdlab/config.hpp"
#include "bdlab/diagnostics.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/gradient.hpp"

namespace bdlab {

// w_U = |g_G| / (|g_U| + |g_G|), w_G = |g_U| / (|g_U| + |g_G|), equalizing the
// weighted gradient contributions: w_U |g_U| = w_G |g_G|.
inline std::pair<double, double> dynamic_weights(double norm_u, double norm_g) {
    if (norm_u < kZeroNormEps || norm_g < kZeroNormEps)
        throw DegenerateInputError("dynamic_weights: zero gradient norm");
    const double total = norm_u + norm_g;
    return {norm_g / total, norm_u / total};
}

// Static sequence-length weights: w_U = N / (N + T).
inline std::pair<double, double> length_normalized_weights(double n, double t) {
    if (!(n >= 1.0) || !(t >= 1.0))
        throw DomainError("length_normalized_weights requires N, T >= 1");
    return {n / (n + t), t / (n + t)};
}

// Gradient surgery: when the task gradients conflict (negative dot product),
// each is projected onto the other's normal plane before summing; otherwise
// the plain sum passes through. Zero-norm inputs pass through unmodified.
inline GradientVector pcgrad_combine(const GradientVector& g_u, const GradientVector& g_g) {
    g_u.require_same_map(g_g);
    const double nu = g_u.norm(), ng = g_g.norm();
    if (nu < kZeroNormEps || ng < kZeroNormEps) return linear_combination(1.0, g_u, 1.0, g_g);
    const double d = dot(g_u, g_g);
    if (d >= 0.0) return linear_combination(1.0, g_u, 1.0, g_g);
    // g~_U = g_U - (d/|g_G|^2) g_G;  g~_G = g_G - (d/|g_U|^2) g_U
    GradientVector out = linear_combination(1.0 - d / (nu * nu), g_u, 1.0 - d / (ng * ng), g_g);
    return out;
}

struct CombineResult {
    GradientVector grad;
    double loss = 0.0;
    WeightState weights;
};

namespace detail {

inline GradientVector weighted_sum_with_passthrough(double w_u, const GradientVector& g_u,
                                                    double w_g, const GradientVector& g_g) {
    // A zero-norm side passes through the other unscaled; weighting applies
    // only when both tasks supply signal.
    const bool zu = g_u.norm() < kZeroNormEps;
    const bool zg = g_g.norm() < kZeroNormEps;
    if (zu && !zg) return g_g;
    if (zg && !zu) return g_u;
    return linear_combination(w_u, g_u, w_g, g_g);
}

}  // namespace detail

// One strategy step: combine per-task gradients and losses into the update
// gradient, the reported loss, and the carried weight state. Single-task
// strategies accept only their own side; the other pointer may be null.
// shared_norm_u/g, when nonnegative, are the theta_s-view norms used for the
// grad_weighted recomputation; by default the full gradient norms are used.
inline CombineResult combine(const BalancingConfig& cfg, const WeightState& prev, long step,
                             const GradientVector* g_u, const GradientVector* g_g, double loss_u,
                             double loss_g, double shared_norm_u = -1.0,
                             double shared_norm_g = -1.0) {
    auto need = [](const GradientVector* g, const char* side) -> const GradientVector& {
        if (g == nullptr) throw DomainError(std::string("combine: missing required ") + side +
                                            " gradient for this strategy");
        return *g;
    };

    CombineResult out;
    out.weights = prev;
    switch (cfg.strategy) {
        case Strategy::understanding_only: {
            out.grad = need(g_u, "understanding");
            out.loss = loss_u;
            out.weights.w_u = 1.0;
            out.weights.w_g = 0.0;
            return out;
        }
        case Strategy::generation_only: {
            out.grad = need(g_g, "generation");
            out.loss = loss_g;
            out.weights.w_u = 0.0;
            out.weights.w_g = 1.0;
            return out;
        }
        case Strategy::naive_joint: {
            const double a = cfg.joint_alpha;
            out.weights.w_u = a;
            out.weights.w_g = 1.0 - a;
            out.grad = detail::weighted_sum_with_passthrough(a, need(g_u, "understanding"),
                                                             1.0 - a, need(g_g, "generation"));
            out.loss = a * loss_u + (1.0 - a) * loss_g;
            return out;
        }
        case Strategy::pcgrad: {
            out.grad = pcgrad_combine(need(g_u, "understanding"), need(g_g, "generation"));
            out.loss = 0.5 * (loss_u + loss_g);
            out.weights.w_u = 0.5;
            out.weights.w_g = 0.5;
            return out;
        }
        case Strategy::grad_weighted: {
            const GradientVector& gu = need(g_u, "understanding");
            const GradientVector& gg = need(g_g, "generation");
            if (step - prev.last_recompute_step >= cfg.recompute_interval) {
                const double nu = shared_norm_u >= 0.0 ? shared_norm_u : gu.norm();
                const double ng = shared_norm_g >= 0.0 ? shared_norm_g : gg.norm();
                if (nu >= kZeroNormEps && ng >= kZeroNormEps) {
                    const auto [wu, wg] = dynamic_weights(nu, ng);
                    out.weights.w_u = wu;
                    out.weights.w_g = wg;
                    out.weights.norm_u_snapshot = nu;
                    out.weights.norm_g_snapshot = ng;
                    out.weights.last_recompute_step = step;
                }
                // Degenerate norms: keep the previous weights and retry at the
                // next step.
            }
            out.grad = detail::weighted_sum_with_passthrough(out.weights.w_u, gu,
                                                             out.weights.w_g, gg);
            out.loss = out.weights.w_u * loss_u + out.weights.w_g * loss_g;
            return out;
        }
        case Strategy::length_normalized: {
            const auto [wu, wg] = length_normalized_weights(cfg.seq_len_n, cfg.seq_len_t);
            out.weights.w_u = wu;
            out.weights.w_g = wg;
            out.grad = detail::weighted_sum_with_passthrough(wu, need(g_u, "understanding"), wg,
                                                             need(g_g, "generation"));
            out.loss = wu * loss_u + wg * loss_g;
            return out;
        }
        case Strategy::fixed_weight: {
            out.weights.w_u = cfg.fixed_w_u;
            out.weights.w_g = cfg.fixed_w_g;
            out.grad = detail::weighted_sum_with_passthrough(cfg.fixed_w_u,
                                                             need(g_u, "understanding"),
                                                             cfg.fixed_w_g, need(g_g, "generation"));
            out.loss = cfg.fixed_w_u * loss_u + cfg.fixed_w_g * loss_g;
            return out;
        }
    }
    throw DomainError("combine: unknown strategy");
}

inline bool strategy_needs_understanding(Strategy s) { return s != Strategy::generation_only; }
inline bool strategy_needs_generation(Strategy s) { return s != Strategy::understanding_only; }

}  // namespace bdlab
