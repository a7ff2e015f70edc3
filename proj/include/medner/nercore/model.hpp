#ifndef MEDNER_NERCORE_MODEL_HPP
#define MEDNER_NERCORE_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/corpus/schema.hpp"
#include "medner/corpus/vocab.hpp"
#include "medner/embeddings.hpp"
#include "medner/nercore/crf.hpp"
#include "medner/nercore/matrix.hpp"
#include "medner/util/error.hpp"
#include "medner/util/math.hpp"
#include "medner/util/random.hpp"

namespace medner {

/// Architecture sizes. Word dimension comes from the embedding table.
struct ModelConfig {
    std::size_t word_dim = 768;
    std::size_t char_dim = 128;
    std::size_t num_filters = 25;
    std::size_t filter_width = 2;
    std::size_t lstm_state = 200;
    bool use_char_cnn = true;
    bool trainable_embeddings = false;
    bool use_transition_mask = true;

    std::size_t char_features() const noexcept { return use_char_cnn ? num_filters : 0; }
    std::size_t input_dim() const noexcept { return word_dim + char_features(); }

    bool operator==(const ModelConfig&) const = default;
};

/// Every trainable tensor. Gradients and optimizer moments use the same type.
struct ParamSet {
    Matrix char_embedding;  // chars x char_dim
    Matrix conv_weight;     // filters x (width * char_dim), window-major
    Matrix conv_bias;       // 1 x filters
    Matrix fwd_wx;          // 4S x input   gate order: input, forget, candidate, output
    Matrix fwd_wh;          // 4S x S
    Matrix fwd_b;           // 1 x 4S
    Matrix bwd_wx;
    Matrix bwd_wh;
    Matrix bwd_b;
    Matrix emit_w;  // tags x 2S
    Matrix emit_b;  // 1 x tags
    Matrix transitions;  // (tags + 2) x (tags + 2)
    Matrix word_delta;   // words x word_dim, empty unless embeddings are trainable

    static constexpr std::size_t kCount = 13;
    static constexpr std::array<std::string_view, kCount> kNames = {
        "char_embedding", "conv_weight", "conv_bias", "fwd_wx",      "fwd_wh",     "fwd_b",     "bwd_wx",
        "bwd_wh",         "bwd_b",       "emit_w",    "emit_b",      "transitions", "word_delta"};

    std::array<Matrix*, kCount> tensors() {
        return {&char_embedding, &conv_weight, &conv_bias, &fwd_wx, &fwd_wh, &fwd_b,      &bwd_wx,
                &bwd_wh,         &bwd_b,       &emit_w,    &emit_b, &transitions, &word_delta};
    }
    std::array<const Matrix*, kCount> tensors() const {
        return {&char_embedding, &conv_weight, &conv_bias, &fwd_wx, &fwd_wh, &fwd_b,      &bwd_wx,
                &bwd_wh,         &bwd_b,       &emit_w,    &emit_b, &transitions, &word_delta};
    }

    ParamSet zeros_like() const {
        ParamSet z;
        auto dst = z.tensors();
        auto src = tensors();
        for (std::size_t k = 0; k < kCount; ++k) *dst[k] = Matrix(src[k]->rows, src[k]->cols);
        return z;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (auto* t : tensors()) n += t->size();
        return n;
    }

    void scale(double a) {
        for (auto* t : tensors()) {
            for (auto& v : t->data) v *= a;
        }
    }

    ParamSet& operator+=(const ParamSet& o) {
        auto dst = tensors();
        auto src = o.tensors();
        for (std::size_t k = 0; k < kCount; ++k) {
            for (std::size_t i = 0; i < dst[k]->size(); ++i) dst[k]->data[i] += src[k]->data[i];
        }
        return *this;
    }

    bool all_finite() const {
        for (auto* t : tensors()) {
            if (!medner::all_finite(t->data)) return false;
        }
        return true;
    }

    bool operator==(const ParamSet&) const = default;
};

/// A BiLSTM-CNN-CRF tagger together with everything needed to run it.
struct Model {
    ModelConfig config;
    LabelSchema schema;
    Vocabulary vocab;
    ParamSet params;
    std::shared_ptr<const EmbeddingTable> embeddings;

    std::size_t num_tags() const { return schema.num_tags(); }

    /// Fresh model with seeded uniform initialization. Transitions start at
    /// zero, with schema-forbidden entries pinned when masking is on.
    static Model create(ModelConfig config, LabelSchema schema, Vocabulary vocab,
                        std::shared_ptr<const EmbeddingTable> embeddings, std::uint64_t seed) {
        if (!embeddings) throw ValidationError("a model needs an embedding table");
        config.word_dim = embeddings->dimension();
        if (config.use_char_cnn && (config.num_filters == 0 || config.filter_width == 0 || config.char_dim == 0)) {
            throw ValidationError("char CNN needs positive filters, width and char dimension");
        }
        if (config.lstm_state == 0) throw ValidationError("LSTM state size must be positive");

        Model m{config, std::move(schema), std::move(vocab), {}, std::move(embeddings)};
        const std::size_t s = config.lstm_state, in = config.input_dim(), t = m.num_tags();
        const std::size_t dc = config.use_char_cnn ? config.char_dim : 0;
        const std::size_t nf = config.char_features();
        auto& p = m.params;
        p.char_embedding = Matrix(config.use_char_cnn ? m.vocab.num_chars() : 0, dc);
        p.conv_weight = Matrix(nf, config.use_char_cnn ? config.filter_width * dc : 0);
        p.conv_bias = Matrix(1, nf);
        for (Matrix* w : {&p.fwd_wx, &p.bwd_wx}) *w = Matrix(4 * s, in);
        for (Matrix* w : {&p.fwd_wh, &p.bwd_wh}) *w = Matrix(4 * s, s);
        for (Matrix* w : {&p.fwd_b, &p.bwd_b}) *w = Matrix(1, 4 * s);
        p.emit_w = Matrix(t, 2 * s);
        p.emit_b = Matrix(1, t);
        p.transitions = Matrix(t + 2, t + 2);
        p.word_delta = config.trainable_embeddings ? Matrix(m.vocab.num_words(), config.word_dim) : Matrix();

        Rng rng(seed);
        auto init = [&](Matrix& w, double a) {
            for (auto& v : w.data) v = rng.uniform(-a, a);
        };
        if (config.use_char_cnn) {
            init(p.char_embedding, std::sqrt(3.0 / static_cast<double>(dc)));
            const double ca = 1.0 / std::sqrt(static_cast<double>(config.filter_width * dc));
            init(p.conv_weight, ca);
            init(p.conv_bias, ca);
        }
        const double la = 1.0 / std::sqrt(static_cast<double>(s));
        for (Matrix* w : {&p.fwd_wx, &p.fwd_wh, &p.fwd_b, &p.bwd_wx, &p.bwd_wh, &p.bwd_b}) init(*w, la);
        const double ea = 1.0 / std::sqrt(static_cast<double>(2 * s));
        init(p.emit_w, ea);
        init(p.emit_b, ea);
        if (config.use_transition_mask) p.transitions = apply_transition_mask(p.transitions, m.schema);
        return m;
    }

    std::size_t parameter_count() const { return params.size(); }
};

/// Dropout settings for one forward pass. Masks are a pure function of
/// (seed, step, slot, position, unit), so backward can rely on the cache and
/// reruns reproduce them exactly.
struct DropoutContext {
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t slot = 0;  // sentence position inside the batch
};

struct LstmCache {
    Matrix gates;  // N x 4S, post-activation
    Matrix cell;   // N x S
    Matrix tanh_cell;
    Matrix hidden;
};

/// Intermediates of model_forward, indexed by token position.
struct ForwardCache {
    std::vector<std::size_t> word_ids;
    std::vector<std::vector<std::size_t>> char_ids;  // padded to at least the filter width
    std::vector<std::size_t> pool_arg;               // N x filters, best window start
    Matrix pool_max;                                 // N x filters, pre-activation maximum
    Matrix input;                                    // N x input_dim, before dropout
    Matrix input_mask;                               // empty when no dropout
    Matrix input_dropped;
    LstmCache fwd, bwd;
    Matrix hidden;  // N x 2S
    Matrix hidden_mask;
    Matrix hidden_dropped;
    Matrix emissions;  // N x tags
};

namespace detail {

inline void lstm_run(const Matrix& wx, const Matrix& wh, const Matrix& b, const Matrix& x, bool reverse,
                     LstmCache& c) {
    const std::size_t n = x.rows, s = wh.cols;
    c.gates = Matrix(n, 4 * s);
    c.cell = Matrix(n, s);
    c.tanh_cell = Matrix(n, s);
    c.hidden = Matrix(n, s);
    std::vector<double> h_prev(s, 0.0), c_prev(s, 0.0), z(4 * s);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t pos = reverse ? n - 1 - step : step;
        std::copy(b.data.begin(), b.data.end(), z.begin());
        gemv_add(wx, x.row(pos), z);
        gemv_add(wh, h_prev, z);
        auto g = c.gates.row(pos);
        for (std::size_t k = 0; k < s; ++k) {
            g[k] = sigmoid(z[k]);
            g[s + k] = sigmoid(z[s + k]);
            g[2 * s + k] = std::tanh(z[2 * s + k]);
            g[3 * s + k] = sigmoid(z[3 * s + k]);
            const double cell = g[s + k] * c_prev[k] + g[k] * g[2 * s + k];
            c.cell(pos, k) = cell;
            c.tanh_cell(pos, k) = std::tanh(cell);
            c.hidden(pos, k) = g[3 * s + k] * c.tanh_cell(pos, k);
        }
        auto hr = c.hidden.row(pos);
        auto cr = c.cell.row(pos);
        std::copy(hr.begin(), hr.end(), h_prev.begin());
        std::copy(cr.begin(), cr.end(), c_prev.begin());
    }
}

/// Backpropagation through time for one direction. `d_hidden` is the loss
/// gradient w.r.t. each output hidden state; input gradients accumulate into
/// `d_x`.
inline void lstm_backward(const Matrix& wx, const Matrix& wh, const Matrix& x, bool reverse, const LstmCache& c,
                          const Matrix& d_hidden, Matrix& d_wx, Matrix& d_wh, Matrix& d_b, Matrix& d_x) {
    const std::size_t n = x.rows, s = wh.cols;
    std::vector<double> dh_next(s, 0.0), dc_next(s, 0.0), dz(4 * s), dh_prev(s);
    const std::vector<double> zeros(s, 0.0);
    for (std::size_t step = n; step-- > 0;) {
        const std::size_t pos = reverse ? n - 1 - step : step;
        const bool first = step == 0;
        const std::size_t prev = reverse ? pos + 1 : pos - 1;  // only read when !first
        std::span<const double> h_prev = first ? std::span<const double>(zeros) : c.hidden.row(prev);
        std::span<const double> c_prev = first ? std::span<const double>(zeros) : c.cell.row(prev);
        auto g = c.gates.row(pos);
        for (std::size_t k = 0; k < s; ++k) {
            const double i = g[k], f = g[s + k], cand = g[2 * s + k], o = g[3 * s + k];
            const double tc = c.tanh_cell(pos, k);
            const double dh = d_hidden(pos, k) + dh_next[k];
            const double d_o = dh * tc;
            const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * cand * i * (1.0 - i);
            dz[s + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * s + k] = dc * i * (1.0 - cand * cand);
            dz[3 * s + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        outer_add(dz, x.row(pos), d_wx);
        outer_add(dz, h_prev, d_wh);
        for (std::size_t k = 0; k < 4 * s; ++k) d_b.data[k] += dz[k];
        gemv_t_add(wx, dz, d_x.row(pos));
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        gemv_t_add(wh, dz, dh_prev);
        dh_next = dh_prev;
    }
}

inline Matrix dropout_mask(std::size_t rows, std::size_t cols, const DropoutContext& ctx, std::uint64_t layer) {
    Matrix m(rows, cols);
    const double keep = 1.0 / (1.0 - ctx.rate);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(r, c) = counter_uniform(ctx.seed, ctx.step, ctx.slot, layer, r, c) >= ctx.rate ? keep : 0.0;
        }
    }
    return m;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

}  // namespace detail

/// Max-pooled ReLU convolution over the character embeddings of one word.
/// Words shorter than the filter width are right-padded with PAD.
inline std::vector<double> char_cnn_forward(const Matrix& char_embedding, const Matrix& conv_weight,
                                            const Matrix& conv_bias, std::span<const std::size_t> word_chars,
                                            std::size_t filter_width, std::vector<std::size_t>* arg_out = nullptr,
                                            std::vector<double>* max_out = nullptr) {
    const std::size_t nf = conv_weight.rows, dc = char_embedding.cols;
    std::vector<std::size_t> chars(word_chars.begin(), word_chars.end());
    while (chars.size() < filter_width) chars.push_back(Vocabulary::kPad);
    const std::size_t windows = chars.size() - filter_width + 1;
    std::vector<double> out(nf, 0.0);
    if (arg_out) arg_out->assign(nf, 0);
    if (max_out) max_out->assign(nf, 0.0);
    for (std::size_t m = 0; m < nf; ++m) {
        double best = kNegInf;
        std::size_t arg = 0;
        for (std::size_t p = 0; p < windows; ++p) {
            double v = conv_bias.data[m];
            for (std::size_t k = 0; k < filter_width; ++k) {
                auto e = char_embedding.row(chars[p + k]);
                const double* w = conv_weight.data.data() + m * conv_weight.cols + k * dc;
                for (std::size_t d = 0; d < dc; ++d) v += w[d] * e[d];
            }
            if (v > best) {
                best = v;
                arg = p;
            }
        }
        out[m] = std::max(0.0, best);
        if (arg_out) (*arg_out)[m] = arg;
        if (max_out) (*max_out)[m] = best;
    }
    return out;
}

/// Runs both LSTM directions from zero states; row i of the result is
/// [forward h_i, backward h_i].
inline Matrix bilstm_forward(const ParamSet& p, const Matrix& inputs, LstmCache* fwd_cache = nullptr,
                             LstmCache* bwd_cache = nullptr) {
    LstmCache f, b;
    detail::lstm_run(p.fwd_wx, p.fwd_wh, p.fwd_b, inputs, false, f);
    detail::lstm_run(p.bwd_wx, p.bwd_wh, p.bwd_b, inputs, true, b);
    const std::size_t n = inputs.rows, s = p.fwd_wh.cols;
    Matrix h(n, 2 * s);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < s; ++k) {
            h(i, k) = f.hidden(i, k);
            h(i, s + k) = b.hidden(i, k);
        }
    }
    if (fwd_cache) *fwd_cache = std::move(f);
    if (bwd_cache) *bwd_cache = std::move(b);
    return h;
}

/// tanh(W h_i + b) for every row of `hidden`.
inline Matrix emission_scores(const Matrix& emit_w, const Matrix& emit_b, const Matrix& hidden) {
    Matrix e(hidden.rows, emit_w.rows);
    for (std::size_t i = 0; i < hidden.rows; ++i) {
        auto row = e.row(i);
        std::copy(emit_b.data.begin(), emit_b.data.end(), row.begin());
        gemv_add(emit_w, hidden.row(i), row);
        for (auto& v : row) v = std::tanh(v);
    }
    return e;
}

/// Full forward pass of one sentence. Dropout applies only when
/// `dropout.rate > 0`.
inline ForwardCache model_forward(const Model& model, const Sentence& sentence, const DropoutContext& dropout = {}) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    const std::size_t n = sentence.size(), in = cfg.input_dim(), wd = cfg.word_dim, nf = cfg.char_features();
    ForwardCache c;
    c.input = Matrix(n, in);
    c.pool_max = Matrix(n, nf);
    c.pool_arg.assign(n * nf, 0);
    c.word_ids.resize(n);
    c.char_ids.resize(n);
    std::vector<std::size_t> arg;
    std::vector<double> mx;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& surface = sentence.tokens[i].surface;
        auto wv = model.embeddings->lookup(surface);
        auto row = c.input.row(i);
        std::copy(wv.begin(), wv.end(), row.begin());
        c.word_ids[i] = model.vocab.word(surface);
        if (cfg.trainable_embeddings) {
            auto delta = p.word_delta.row(c.word_ids[i]);
            for (std::size_t d = 0; d < wd; ++d) row[d] += delta[d];
        }
        if (cfg.use_char_cnn) {
            c.char_ids[i] = model.vocab.char_ids(surface);
            while (c.char_ids[i].size() < cfg.filter_width) c.char_ids[i].push_back(Vocabulary::kPad);
            auto feats =
                char_cnn_forward(p.char_embedding, p.conv_weight, p.conv_bias, c.char_ids[i], cfg.filter_width, &arg, &mx);
            std::copy(feats.begin(), feats.end(), row.begin() + static_cast<std::ptrdiff_t>(wd));
            for (std::size_t m = 0; m < nf; ++m) {
                c.pool_arg[i * nf + m] = arg[m];
                c.pool_max(i, m) = mx[m];
            }
        }
    }
    const bool drop = dropout.rate > 0.0;
    if (drop) {
        c.input_mask = detail::dropout_mask(n, in, dropout, 0);
        c.input_dropped = detail::hadamard(c.input, c.input_mask);
    }
    c.hidden = bilstm_forward(p, drop ? c.input_dropped : c.input, &c.fwd, &c.bwd);
    if (drop) {
        c.hidden_mask = detail::dropout_mask(n, c.hidden.cols, dropout, 1);
        c.hidden_dropped = detail::hadamard(c.hidden, c.hidden_mask);
    }
    c.emissions = emission_scores(p.emit_w, p.emit_b, drop ? c.hidden_dropped : c.hidden);
    return c;
}

/// Gold tag indices of a tagged sentence, checked against the schema mask.
inline std::vector<std::size_t> gold_indices(const Model& model, const Sentence& s) {
    if (!s.tagged()) throw ValidationError("sentence " + s.doc_id + "#" + std::to_string(s.sent_index) + " has no tags");
    std::vector<std::size_t> gold;
    gold.reserve(s.size());
    for (const auto& t : s.tokens) {
        auto idx = model.schema.find_tag(*t.tag);
        if (!idx) {
            throw SchemaError("sentence " + s.doc_id + "#" + std::to_string(s.sent_index) + ": tag '" + *t.tag +
                              "' is not in the label schema");
        }
        gold.push_back(*idx);
    }
    if (model.config.use_transition_mask) {
        std::size_t prev = model.schema.start();
        for (std::size_t i = 0; i <= gold.size(); ++i) {
            const std::size_t cur = i < gold.size() ? gold[i] : model.schema.stop();
            if (!model.schema.allowed(prev, cur)) {
                throw ValidationError("sentence " + s.doc_id + "#" + std::to_string(s.sent_index) +
                                      ": gold path uses a forbidden transition at token " + std::to_string(i));
            }
            prev = cur;
        }
    }
    return gold;
}

/// Negative log-likelihood of one tagged sentence, no dropout.
inline double sentence_nll(const Model& model, const Sentence& s) {
    if (s.empty()) return 0.0;
    auto gold = gold_indices(model, s);
    auto cache = model_forward(model, s);
    return crf_log_partition(cache.emissions, model.params.transitions) -
           crf_score_sequence(cache.emissions, model.params.transitions, gold);
}

/// Summed NLL over a batch.
inline double crf_nll(const Model& model, std::span<const Sentence> batch) {
    double total = 0.0;
    for (const auto& s : batch) total += sentence_nll(model, s);
    return total;
}

/// Loss of one sentence and its exact gradient, accumulated into `grad`.
inline double accumulate_sentence_gradient(const Model& model, const Sentence& s, ParamSet& grad,
                                           const DropoutContext& dropout = {}) {
    if (s.empty()) return 0.0;
    const auto& cfg = model.config;
    const auto& p = model.params;
    const auto gold = gold_indices(model, s);
    const auto c = model_forward(model, s, dropout);
    const bool drop = dropout.rate > 0.0;
    const std::size_t n = s.size(), st = cfg.lstm_state, in = cfg.input_dim(), wd = cfg.word_dim;

    auto crf = crf_nll_gradient(c.emissions, p.transitions, gold);
    if (cfg.use_transition_mask) {
        for (std::size_t a = 0; a < crf.d_transitions.rows; ++a) {
            for (std::size_t b = 0; b < crf.d_transitions.cols; ++b) {
                if (!model.schema.allowed(a, b)) crf.d_transitions(a, b) = 0.0;
            }
        }
    }
    for (std::size_t i = 0; i < grad.transitions.size(); ++i) grad.transitions.data[i] += crf.d_transitions.data[i];

    // Emission layer.
    const Matrix& h_used = drop ? c.hidden_dropped : c.hidden;
    Matrix d_h(n, 2 * st);
    std::vector<double> d_pre(model.num_tags());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < d_pre.size(); ++t) {
            const double e = c.emissions(i, t);
            d_pre[t] = crf.d_emissions(i, t) * (1.0 - e * e);
            grad.emit_b.data[t] += d_pre[t];
        }
        outer_add(d_pre, h_used.row(i), grad.emit_w);
        gemv_t_add(p.emit_w, d_pre, d_h.row(i));
    }
    if (drop) d_h = detail::hadamard(d_h, c.hidden_mask);

    // BiLSTM.
    Matrix d_hf(n, st), d_hb(n, st);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < st; ++k) {
            d_hf(i, k) = d_h(i, k);
            d_hb(i, k) = d_h(i, st + k);
        }
    }
    const Matrix& x_used = drop ? c.input_dropped : c.input;
    Matrix d_x(n, in);
    detail::lstm_backward(p.fwd_wx, p.fwd_wh, x_used, false, c.fwd, d_hf, grad.fwd_wx, grad.fwd_wh, grad.fwd_b, d_x);
    detail::lstm_backward(p.bwd_wx, p.bwd_wh, x_used, true, c.bwd, d_hb, grad.bwd_wx, grad.bwd_wh, grad.bwd_b, d_x);
    if (drop) d_x = detail::hadamard(d_x, c.input_mask);

    // Word vectors and the char CNN.
    const std::size_t nf = cfg.char_features(), dc = cfg.char_dim, kw = cfg.filter_width;
    for (std::size_t i = 0; i < n; ++i) {
        if (cfg.trainable_embeddings) {
            auto gd = grad.word_delta.row(c.word_ids[i]);
            for (std::size_t d = 0; d < wd; ++d) gd[d] += d_x(i, d);
        }
        for (std::size_t m = 0; m < nf; ++m) {
            if (c.pool_max(i, m) <= 0.0) continue;  // ReLU closed
            const double g = d_x(i, wd + m);
            if (g == 0.0) continue;
            const std::size_t pos = c.pool_arg[i * nf + m];
            grad.conv_bias.data[m] += g;
            for (std::size_t k = 0; k < kw; ++k) {
                const std::size_t ch = c.char_ids[i][pos + k];
                const double* w = p.conv_weight.data.data() + m * p.conv_weight.cols + k * dc;
                double* gw = grad.conv_weight.data.data() + m * p.conv_weight.cols + k * dc;
                auto e = p.char_embedding.row(ch);
                auto ge = grad.char_embedding.row(ch);
                for (std::size_t d = 0; d < dc; ++d) {
                    gw[d] += g * e[d];
                    ge[d] += g * w[d];
                }
            }
        }
    }
    return crf.nll;
}

struct BatchGradient {
    double loss = 0.0;
    ParamSet grad;
};

/// Summed loss and gradient over a batch, accumulated in batch order.
/// `dropout.slot` is overwritten with each sentence's batch position.
inline BatchGradient model_backward(const Model& model, std::span<const Sentence> batch, DropoutContext dropout = {}) {
    BatchGradient out{0.0, model.params.zeros_like()};
    for (std::size_t k = 0; k < batch.size(); ++k) {
        dropout.slot = k;
        out.loss += accumulate_sentence_gradient(model, batch[k], out.grad, dropout);
    }
    return out;
}

struct Prediction {
    std::vector<std::size_t> tags;
    std::vector<double> confidence;  // marginal probability of each chosen tag
    Matrix marginals;
};

/// Transitions used for decoding: forbidden moves are impossible.
inline Matrix decoding_transitions(const Model& model) {
    return apply_transition_mask(model.params.transitions, model.schema, kNegInf);
}

inline Prediction predict_with(const Model& model, const Matrix& transitions, const Sentence& sentence) {
    Prediction out;
    if (sentence.empty()) return out;
    const auto c = model_forward(model, sentence);
    out.tags = crf_viterbi(c.emissions, transitions).path;
    out.marginals = crf_marginals(c.emissions, transitions);
    out.confidence.reserve(out.tags.size());
    for (std::size_t i = 0; i < out.tags.size(); ++i) out.confidence.push_back(out.marginals(i, out.tags[i]));
    return out;
}

/// Masked Viterbi tags plus the posterior marginals.
inline Prediction predict(const Model& model, const Sentence& sentence) {
    return predict_with(model, decoding_transitions(model), sentence);
}

inline std::vector<std::string> predict_tags(const Model& model, const Sentence& sentence) {
    return model.schema.tags_of(predict(model, sentence).tags);
}

/// Copy of `corpus` with every sentence re-tagged by the model.
inline Corpus predict_corpus(const Model& model, const Corpus& corpus) {
    Corpus out = corpus;
    out.schema = model.schema;
    const Matrix trans = decoding_transitions(model);
    for (auto& s : out.sentences) {
        if (s.empty()) continue;
        s.set_tags(model.schema.tags_of(predict_with(model, trans, s).tags));
    }
    return out;
}

}  // namespace medner

#endif  // MEDNER_NERCORE_MODEL_HPP
