#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bdlab/config.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/gradient.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/types.hpp"

namespace bdlab {

// ---------------------------------------------------------------------------
// Parameter layout
//
// One flat vector holds every parameter; named offsets address the blocks.
// The trainable set is {adapter_A.l, adapter_B.l for all l, head_code}; its
// gradient lives in a separate flat space described by `trainable_map`, with
// `trainable_param_offsets` mapping each gradient segment back into the
// parameter vector. The shared-parameter view used for interference analysis
// is the adapter segments only.
// ---------------------------------------------------------------------------

struct ParamLayout {
    int d = 0, layers = 0, text_vocab = 0, code_vocab = 0, rank = 0;

    std::size_t input_w = 0, input_b = 0;
    std::vector<std::size_t> trunk_w, trunk_b;
    std::size_t embed_text = 0, embed_code = 0;
    std::size_t head_text = 0, head_text_b = 0;
    std::size_t head_code = 0, head_code_b = 0;
    std::vector<std::size_t> adapter_a, adapter_b;
    std::size_t total = 0;

    SegmentMapPtr trainable_map;
    std::vector<std::size_t> trainable_param_offsets;

    static std::string adapter_a_name(int layer) { return "adapter_A." + std::to_string(layer + 1); }
    static std::string adapter_b_name(int layer) { return "adapter_B." + std::to_string(layer + 1); }

    static ParamLayout build(const ModelConfig& cfg) {
        ParamLayout lay;
        lay.d = cfg.hidden_dim;
        lay.layers = cfg.trunk_layers;
        lay.text_vocab = cfg.text_vocab;
        lay.code_vocab = cfg.code_vocab;
        lay.rank = cfg.adapter_rank;

        const auto d = static_cast<std::size_t>(cfg.hidden_dim);
        const auto vt = static_cast<std::size_t>(cfg.text_vocab);
        const auto vg = static_cast<std::size_t>(cfg.code_vocab);
        const auto r = static_cast<std::size_t>(cfg.adapter_rank);

        std::size_t cursor = 0;
        auto take = [&cursor](std::size_t n) {
            const std::size_t at = cursor;
            cursor += n;
            return at;
        };

        lay.input_w = take(d * 2 * d);
        lay.input_b = take(d);
        for (int l = 0; l < cfg.trunk_layers; ++l) {
            lay.trunk_w.push_back(take(d * d));
            lay.trunk_b.push_back(take(d));
        }
        lay.embed_text = take(vt * d);
        lay.embed_code = take(vg * d);
        lay.head_text = take(vt * d);
        lay.head_text_b = take(vt);
        lay.head_code = take(vg * d);
        lay.head_code_b = take(vg);
        for (int l = 0; l < cfg.trunk_layers; ++l) {
            lay.adapter_a.push_back(take(r * d));
            lay.adapter_b.push_back(take(d * r));
        }
        lay.total = cursor;

        std::vector<Segment> segs;
        std::size_t gcursor = 0;
        auto add_seg = [&](const std::string& name, std::size_t param_off, std::size_t n) {
            segs.push_back({name, gcursor, gcursor + n});
            lay.trainable_param_offsets.push_back(param_off);
            gcursor += n;
        };
        for (int l = 0; l < cfg.trunk_layers; ++l) {
            add_seg(adapter_a_name(l), lay.adapter_a[static_cast<std::size_t>(l)], r * d);
            add_seg(adapter_b_name(l), lay.adapter_b[static_cast<std::size_t>(l)], d * r);
        }
        add_seg("head_code", lay.head_code, vg * d);
        lay.trainable_map = std::make_shared<SegmentMap>(std::move(segs));
        return lay;
    }

    std::size_t embed(Modality m) const { return m == Modality::text ? embed_text : embed_code; }
    std::size_t head(Modality m) const { return m == Modality::text ? head_text : head_code; }
    std::size_t head_bias(Modality m) const { return m == Modality::text ? head_text_b : head_code_b; }
    int vocab(Modality m) const { return m == Modality::text ? text_vocab : code_vocab; }
};

// Names of the shared-parameter (theta_s) view: adapters only, heads excluded.
inline std::vector<std::string> adapter_segment_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for (int l = 0; l < cfg.trunk_layers; ++l) {
        names.push_back(ParamLayout::adapter_a_name(l));
        names.push_back(ParamLayout::adapter_b_name(l));
    }
    return names;
}

inline std::vector<std::string> trainable_segment_names(const ModelConfig& cfg) {
    auto names = adapter_segment_names(cfg);
    names.push_back("head_code");
    return names;
}

// ---------------------------------------------------------------------------
// Model state
// ---------------------------------------------------------------------------

struct ModelState {
    ModelConfig config;
    ParamLayout layout;
    std::vector<double> params;     // live
    std::vector<double> reference;  // frozen snapshot

    std::span<double> live(std::size_t off, std::size_t n) { return {params.data() + off, n}; }
    std::span<const double> live(std::size_t off, std::size_t n) const {
        return {params.data() + off, n};
    }

    std::span<double> input_w() { return live(layout.input_w, static_cast<std::size_t>(layout.d) * 2 * layout.d); }
    std::span<double> input_b() { return live(layout.input_b, static_cast<std::size_t>(layout.d)); }
    std::span<double> trunk_w(int l) { return live(layout.trunk_w[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.d) * layout.d); }
    std::span<double> trunk_b(int l) { return live(layout.trunk_b[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.d)); }
    std::span<double> embed(Modality m) { return live(layout.embed(m), static_cast<std::size_t>(layout.vocab(m)) * layout.d); }
    std::span<double> head(Modality m) { return live(layout.head(m), static_cast<std::size_t>(layout.vocab(m)) * layout.d); }
    std::span<double> head_bias(Modality m) { return live(layout.head_bias(m), static_cast<std::size_t>(layout.vocab(m))); }
    std::span<double> adapter_a(int l) { return live(layout.adapter_a[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.rank) * layout.d); }
    std::span<double> adapter_b(int l) { return live(layout.adapter_b[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.d) * layout.rank); }

    std::span<const double> adapter_a(int l) const { return live(layout.adapter_a[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.rank) * layout.d); }
    std::span<const double> adapter_b(int l) const { return live(layout.adapter_b[static_cast<std::size_t>(l)], static_cast<std::size_t>(layout.d) * layout.rank); }

    // Re-freeze the reference snapshot to the live parameters. Test scaffolding
    // for hand-built states; the trainer never calls this.
    void sync_reference() { reference = params; }

    GradientVector make_gradient() const { return GradientVector(layout.trainable_map); }
};

inline ModelState init_model(const ModelConfig& cfg) {
    cfg.validate();
    ModelState st;
    st.config = cfg;
    st.layout = ParamLayout::build(cfg);
    st.params.assign(st.layout.total, 0.0);

    Rng rng(cfg.seed);
    auto fill_normal = [&](std::size_t off, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) st.params[off + i] = rng.next_normal(0.0, cfg.base_init_std);
    };
    const auto d = static_cast<std::size_t>(cfg.hidden_dim);
    const auto r = static_cast<std::size_t>(cfg.adapter_rank);

    fill_normal(st.layout.input_w, d * 2 * d);
    fill_normal(st.layout.input_b, d);
    for (int l = 0; l < cfg.trunk_layers; ++l) {
        fill_normal(st.layout.trunk_w[static_cast<std::size_t>(l)], d * d);
        fill_normal(st.layout.trunk_b[static_cast<std::size_t>(l)], d);
    }
    fill_normal(st.layout.embed_text, static_cast<std::size_t>(cfg.text_vocab) * d);
    fill_normal(st.layout.embed_code, static_cast<std::size_t>(cfg.code_vocab) * d);
    fill_normal(st.layout.head_text, static_cast<std::size_t>(cfg.text_vocab) * d);
    fill_normal(st.layout.head_text_b, static_cast<std::size_t>(cfg.text_vocab));
    fill_normal(st.layout.head_code, static_cast<std::size_t>(cfg.code_vocab) * d);
    fill_normal(st.layout.head_code_b, static_cast<std::size_t>(cfg.code_vocab));

    // Adapters: A ~ uniform(-1/sqrt(d), +1/sqrt(d)), B = 0, so the effective
    // weights equal the base weights and the policy equals the reference.
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    for (int l = 0; l < cfg.trunk_layers; ++l) {
        const std::size_t off = st.layout.adapter_a[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < r * d; ++i)
            st.params[off + i] = (2.0 * rng.next_double() - 1.0) * bound;
        // adapter_B stays zero
    }

    st.reference = st.params;
    return st;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate_context(const ModelState& st, const TokenSequence& ctx) {
    if (ctx.modality != Modality::text) throw DomainError("context must be text-modality");
    if (ctx.tokens.empty()) throw DomainError("context must be nonempty");
    for (int t : ctx.tokens)
        if (t < 0 || t >= st.config.text_vocab)
            throw DomainError("context token id " + std::to_string(t) + " out of vocabulary");
}

inline void validate_response(const ModelState& st, const TokenSequence& resp) {
    if (resp.tokens.empty()) throw DomainError("response must be nonempty");
    const int v = st.config.vocab(resp.modality);
    for (int t : resp.tokens)
        if (t < 0 || t >= v)
            throw DomainError("response token id " + std::to_string(t) + " out of vocabulary");
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

// Mean of the context-token embeddings (the pooled stand-in for an encoder).
inline std::vector<double> context_mean(const ModelState& st, const TokenSequence& ctx,
                                        bool use_reference = false) {
    validate_context(st, ctx);
    const auto d = static_cast<std::size_t>(st.layout.d);
    const double* p = (use_reference ? st.reference : st.params).data();
    const double* emb = p + st.layout.embed_text;
    std::vector<double> c(d, 0.0);
    for (int tok : ctx.tokens) {
        const double* row = emb + static_cast<std::size_t>(tok) * d;
        for (std::size_t j = 0; j < d; ++j) c[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(ctx.tokens.size());
    for (std::size_t j = 0; j < d; ++j) c[j] *= inv;
    return c;
}

namespace detail {

// One position of the first-order-Markov recurrence. Writes all layer
// activations into `h` ((layers+1) * d) and the softmax distribution into
// `probs` (vocab); `a_scratch` must hold `rank` doubles. Returns
// log p(target | prev, context).
inline double position_forward(const ParamLayout& lay, const double* p, double adapter_scale,
                               const double* ctx_mean, int prev_id, int target, Modality mod,
                               double* h, double* probs, double* a_scratch) {
    const auto d = static_cast<std::size_t>(lay.d);
    const auto r = static_cast<std::size_t>(lay.rank);
    const auto vocab = static_cast<std::size_t>(lay.vocab(mod));
    double* a = a_scratch;

    // h0 = tanh(W_in [prev_embedding; ctx_mean] + b_in)
    const double* win = p + lay.input_w;
    const double* bin = p + lay.input_b;
    const double* prev_emb =
        prev_id < 0 ? nullptr : p + lay.embed(mod) + static_cast<std::size_t>(prev_id) * d;
    for (std::size_t i = 0; i < d; ++i) {
        const double* row = win + i * 2 * d;
        double acc = bin[i];
        if (prev_emb != nullptr)
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * prev_emb[j];
        for (std::size_t j = 0; j < d; ++j) acc += row[d + j] * ctx_mean[j];
        h[i] = std::tanh(acc);
    }

    // h_l = tanh((W_l + s B_l A_l) h_{l-1} + b_l)
    for (int l = 0; l < lay.layers; ++l) {
        const double* w = p + lay.trunk_w[static_cast<std::size_t>(l)];
        const double* b = p + lay.trunk_b[static_cast<std::size_t>(l)];
        const double* am = p + lay.adapter_a[static_cast<std::size_t>(l)];
        const double* bm = p + lay.adapter_b[static_cast<std::size_t>(l)];
        const double* hin = h + static_cast<std::size_t>(l) * d;
        double* hout = h + static_cast<std::size_t>(l + 1) * d;
        for (std::size_t k = 0; k < r; ++k) {
            const double* row = am + k * d;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * hin[j];
            a[k] = acc;
        }
        for (std::size_t i = 0; i < d; ++i) {
            const double* wrow = w + i * d;
            double acc = b[i];
            for (std::size_t j = 0; j < d; ++j) acc += wrow[j] * hin[j];
            const double* brow = bm + i * r;
            double adapt = 0.0;
            for (std::size_t k = 0; k < r; ++k) adapt += brow[k] * a[k];
            hout[i] = std::tanh(acc + adapter_scale * adapt);
        }
    }

    // logits = H h_L + b_head, then log-softmax
    const double* hm = p + lay.head(mod);
    const double* hb = p + lay.head_bias(mod);
    const double* hl = h + static_cast<std::size_t>(lay.layers) * d;
    double maxv = -1e300;
    for (std::size_t v = 0; v < vocab; ++v) {
        const double* row = hm + v * d;
        double acc = hb[v];
        for (std::size_t j = 0; j < d; ++j) acc += row[j] * hl[j];
        probs[v] = acc;  // logits, normalized below
        if (acc > maxv) maxv = acc;
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(probs[v] - maxv);
    const double lse = maxv + std::log(sum);
    const double logprob = probs[static_cast<std::size_t>(target)] - lse;
    for (std::size_t v = 0; v < vocab; ++v) probs[v] = std::exp(probs[v] - lse);
    return logprob;
}

}  // namespace detail

// Recorded intermediates of one sequence forward pass; consumed by backward().
struct SequenceTrace {
    bool recorded = false;
    bool used_reference = false;
    Modality modality = Modality::text;
    int n_positions = 0;
    int h_stride = 0;  // (layers+1) * d
    int vocab = 0;
    std::vector<double> context_mean;
    std::vector<double> h;      // n_positions * h_stride
    std::vector<double> probs;  // n_positions * vocab
    std::vector<int> targets;
    double logprob = 0.0;
};

// Sum over positions of log p(y_t | y_{t-1}, context), in nats.
inline double sequence_logprob(const ModelState& st, const TokenSequence& ctx,
                               const TokenSequence& resp, bool use_reference = false) {
    validate_response(st, resp);
    const auto c = context_mean(st, ctx, use_reference);
    const double* p = (use_reference ? st.reference : st.params).data();
    const auto stride = static_cast<std::size_t>(st.layout.layers + 1) * st.layout.d;
    std::vector<double> h(stride);
    std::vector<double> probs(static_cast<std::size_t>(st.layout.vocab(resp.modality)));
    std::vector<double> a(static_cast<std::size_t>(st.layout.rank));
    double total = 0.0;
    int prev = -1;  // begin-of-sequence sentinel embeds as the zero vector
    for (std::size_t t = 0; t < resp.tokens.size(); ++t) {
        total += detail::position_forward(st.layout, p, st.config.adapter_scale, c.data(), prev,
                                          resp.tokens[t], resp.modality, h.data(), probs.data(),
                                          a.data());
        prev = resp.tokens[t];
    }
    return total;
}

// Forward pass that records every activation needed for backward().
inline SequenceTrace sequence_forward(const ModelState& st, const TokenSequence& ctx,
                                      const TokenSequence& resp, bool use_reference = false) {
    validate_response(st, resp);
    SequenceTrace tr;
    tr.used_reference = use_reference;
    tr.modality = resp.modality;
    tr.n_positions = static_cast<int>(resp.tokens.size());
    tr.h_stride = (st.layout.layers + 1) * st.layout.d;
    tr.vocab = st.layout.vocab(resp.modality);
    tr.context_mean = context_mean(st, ctx, use_reference);
    tr.h.resize(static_cast<std::size_t>(tr.n_positions) * tr.h_stride);
    tr.probs.resize(static_cast<std::size_t>(tr.n_positions) * tr.vocab);
    tr.targets = resp.tokens;

    const double* p = (use_reference ? st.reference : st.params).data();
    std::vector<double> a(static_cast<std::size_t>(st.layout.rank));
    double total = 0.0;
    int prev = -1;
    for (int t = 0; t < tr.n_positions; ++t) {
        total += detail::position_forward(
            st.layout, p, st.config.adapter_scale, tr.context_mean.data(), prev, resp.tokens[static_cast<std::size_t>(t)],
            resp.modality, tr.h.data() + static_cast<std::size_t>(t) * tr.h_stride,
            tr.probs.data() + static_cast<std::size_t>(t) * tr.vocab, a.data());
        prev = resp.tokens[static_cast<std::size_t>(t)];
    }
    tr.logprob = total;
    tr.recorded = true;
    return tr;
}

// Accumulate cotangent * d(logprob)/d(trainable params) into `grad`.
// Gradients of frozen parameters are omitted by construction.
inline void accumulate_backward(const ModelState& st, const SequenceTrace& tr, double cotangent,
                                GradientVector& grad) {
    if (!tr.recorded) throw StateError("backward requires a recorded forward trace");
    if (tr.used_reference)
        throw StateError("backward through the frozen reference policy is not defined");
    if (grad.map() != st.layout.trainable_map &&
        (!grad.map() || !(*grad.map() == *st.layout.trainable_map)))
        throw DomainError("gradient vector does not match the model's trainable layout");

    const ParamLayout& lay = st.layout;
    const double* p = st.params.data();
    const auto d = static_cast<std::size_t>(lay.d);
    const auto r = static_cast<std::size_t>(lay.rank);
    const auto vocab = static_cast<std::size_t>(tr.vocab);
    const double s = st.config.adapter_scale;
    const bool head_trainable = tr.modality == Modality::code;

    auto gshared = grad.mutable_values();
    const auto& segs = lay.trainable_map->segments();
    // Gradient-space offsets: segments 2l and 2l+1 are adapter A/B of layer l,
    // the last segment is head_code.
    std::vector<double*> ga(static_cast<std::size_t>(lay.layers)), gb(static_cast<std::size_t>(lay.layers));
    for (int l = 0; l < lay.layers; ++l) {
        ga[static_cast<std::size_t>(l)] = gshared.data() + segs[static_cast<std::size_t>(2 * l)].begin;
        gb[static_cast<std::size_t>(l)] = gshared.data() + segs[static_cast<std::size_t>(2 * l + 1)].begin;
    }
    double* ghead = gshared.data() + segs[segs.size() - 1].begin;

    std::vector<double> delta(vocab);
    std::vector<double> dh(d), dz(d), a(r), bt(r), dh_prev(d);
    const double* hm = p + lay.head(tr.modality);

    for (int t = 0; t < tr.n_positions; ++t) {
        const double* h = tr.h.data() + static_cast<std::size_t>(t) * tr.h_stride;
        const double* probs = tr.probs.data() + static_cast<std::size_t>(t) * vocab;
        const auto target = static_cast<std::size_t>(tr.targets[static_cast<std::size_t>(t)]);

        for (std::size_t v = 0; v < vocab; ++v) delta[v] = -cotangent * probs[v];
        delta[target] += cotangent;

        const double* hl = h + static_cast<std::size_t>(lay.layers) * d;
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t v = 0; v < vocab; ++v) {
            const double dv = delta[v];
            const double* row = hm + v * d;
            if (head_trainable) {
                double* grow = ghead + v * d;
                for (std::size_t j = 0; j < d; ++j) {
                    grow[j] += dv * hl[j];
                    dh[j] += dv * row[j];
                }
            } else {
                for (std::size_t j = 0; j < d; ++j) dh[j] += dv * row[j];
            }
        }

        for (int l = lay.layers - 1; l >= 0; --l) {
            const double* w = p + lay.trunk_w[static_cast<std::size_t>(l)];
            const double* am = p + lay.adapter_a[static_cast<std::size_t>(l)];
            const double* bm = p + lay.adapter_b[static_cast<std::size_t>(l)];
            const double* hout = h + static_cast<std::size_t>(l + 1) * d;
            const double* hin = h + static_cast<std::size_t>(l) * d;

            for (std::size_t i = 0; i < d; ++i) dz[i] = dh[i] * (1.0 - hout[i] * hout[i]);

            for (std::size_t k = 0; k < r; ++k) {
                const double* row = am + k * d;
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += row[j] * hin[j];
                a[k] = acc;
            }
            // dB += s * dz (outer) a;  bt = B^T dz;  dA += s * bt (outer) h_in
            for (std::size_t k = 0; k < r; ++k) bt[k] = 0.0;
            double* gbl = gb[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < d; ++i) {
                const double dzi = dz[i];
                const double* brow = bm + i * r;
                double* grow = gbl + i * r;
                for (std::size_t k = 0; k < r; ++k) {
                    grow[k] += s * dzi * a[k];
                    bt[k] += brow[k] * dzi;
                }
            }
            double* gal = ga[static_cast<std::size_t>(l)];
            for (std::size_t k = 0; k < r; ++k) {
                const double sk = s * bt[k];
                double* grow = gal + k * d;
                for (std::size_t j = 0; j < d; ++j) grow[j] += sk * hin[j];
            }
            // dh_in = W^T dz + s A^T bt
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                const double dzi = dz[i];
                const double* wrow = w + i * d;
                for (std::size_t j = 0; j < d; ++j) dh_prev[j] += wrow[j] * dzi;
            }
            for (std::size_t k = 0; k < r; ++k) {
                const double sk = s * bt[k];
                const double* arow = am + k * d;
                for (std::size_t j = 0; j < d; ++j) dh_prev[j] += sk * arow[j];
            }
            std::swap(dh, dh_prev);
        }
        // Input map and embeddings are frozen; the chain stops at h0.
    }
}

inline GradientVector backward(const ModelState& st, const SequenceTrace& tr,
                               double cotangent = 1.0) {
    GradientVector g = st.make_gradient();
    accumulate_backward(st, tr, cotangent, g);
    return g;
}

// Next-token distribution for ancestral sampling (probabilities over the
// modality's vocabulary). prev_id < 0 denotes the begin sentinel.
inline void next_token_probs(const ModelState& st, const std::vector<double>& ctx_mean,
                             int prev_id, Modality mod, bool use_reference,
                             std::vector<double>& probs_out) {
    const double* p = (use_reference ? st.reference : st.params).data();
    const auto stride = static_cast<std::size_t>(st.layout.layers + 1) * st.layout.d;
    std::vector<double> h(stride);
    std::vector<double> a(static_cast<std::size_t>(st.layout.rank));
    probs_out.resize(static_cast<std::size_t>(st.layout.vocab(mod)));
    // Use target 0 only to satisfy the signature; probabilities are what we keep.
    detail::position_forward(st.layout, p, st.config.adapter_scale, ctx_mean.data(), prev_id, 0,
                             mod, h.data(), probs_out.data(), a.data());
}

}  // namespace bdlab
