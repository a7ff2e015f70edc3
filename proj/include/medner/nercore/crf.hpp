#ifndef MEDNER_NERCORE_CRF_HPP
#define MEDNER_NERCORE_CRF_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "medner/corpus/schema.hpp"
#include "medner/nercore/matrix.hpp"
#include "medner/util/math.hpp"

// Linear-chain CRF over an N x T emission matrix and a (T + 2) x (T + 2)
// transition matrix whose rows/columns T and T + 1 are START and STOP.
// transitions(a, b) scores moving from tag a to tag b.
namespace medner {

/// Surrogate for -inf on masked transitions; keeps training gradients finite.
inline constexpr double kMaskedTransition = -1e4;

/// Score of one tag path, accumulated left to right:
/// T[START, y0] + E[0, y0] + T[y0, y1] + E[1, y1] + ... + T[y_{N-1}, STOP].
inline double crf_score_sequence(const Matrix& emissions, const Matrix& transitions, std::span<const std::size_t> path) {
    const std::size_t n = emissions.rows, start = emissions.cols, stop = emissions.cols + 1;
    if (n == 0) return transitions(start, stop);
    double s = transitions(start, path[0]) + emissions(0, path[0]);
    for (std::size_t i = 1; i < n; ++i) {
        s = s + transitions(path[i - 1], path[i]) + emissions(i, path[i]);
    }
    return s + transitions(path[n - 1], stop);
}

/// Log-space forward (alpha) and backward (beta) tables.
struct ForwardBackward {
    Matrix alpha;
    Matrix beta;
    double log_z = 0.0;
};

inline ForwardBackward crf_forward_backward(const Matrix& emissions, const Matrix& transitions) {
    const std::size_t n = emissions.rows, t = emissions.cols, start = t, stop = t + 1;
    ForwardBackward fb{Matrix(n, t), Matrix(n, t), 0.0};
    std::vector<double> buf(t);
    for (std::size_t j = 0; j < t; ++j) fb.alpha(0, j) = transitions(start, j) + emissions(0, j);
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            for (std::size_t k = 0; k < t; ++k) buf[k] = fb.alpha(i - 1, k) + transitions(k, j);
            fb.alpha(i, j) = log_sum_exp(buf) + emissions(i, j);
        }
    }
    for (std::size_t k = 0; k < t; ++k) buf[k] = fb.alpha(n - 1, k) + transitions(k, stop);
    fb.log_z = log_sum_exp(buf);

    for (std::size_t k = 0; k < t; ++k) fb.beta(n - 1, k) = transitions(k, stop);
    for (std::size_t i = n - 1; i-- > 0;) {
        for (std::size_t k = 0; k < t; ++k) {
            for (std::size_t j = 0; j < t; ++j) buf[j] = transitions(k, j) + emissions(i + 1, j) + fb.beta(i + 1, j);
            fb.beta(i, k) = log_sum_exp(buf);
        }
    }
    return fb;
}

/// log of the sum over all T^N paths of exp(score).
inline double crf_log_partition(const Matrix& emissions, const Matrix& transitions) {
    const std::size_t n = emissions.rows, t = emissions.cols;
    if (n == 0) return transitions(t, t + 1);
    std::vector<double> alpha(t), next(t), buf(t);
    for (std::size_t j = 0; j < t; ++j) alpha[j] = transitions(t, j) + emissions(0, j);
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            for (std::size_t k = 0; k < t; ++k) buf[k] = alpha[k] + transitions(k, j);
            next[j] = log_sum_exp(buf) + emissions(i, j);
        }
        alpha.swap(next);
    }
    for (std::size_t k = 0; k < t; ++k) buf[k] = alpha[k] + transitions(k, t + 1);
    return log_sum_exp(buf);
}

struct ViterbiResult {
    std::vector<std::size_t> path;
    double score = 0.0;
};

/// Highest-scoring path. Ties go to the lowest tag index, both for the final
/// tag and for every back-pointer.
inline ViterbiResult crf_viterbi(const Matrix& emissions, const Matrix& transitions) {
    const std::size_t n = emissions.rows, t = emissions.cols, start = t, stop = t + 1;
    ViterbiResult out;
    if (n == 0) return out;
    std::vector<double> delta(t), next(t);
    std::vector<std::size_t> back(n * t, 0);
    for (std::size_t j = 0; j < t; ++j) delta[j] = transitions(start, j) + emissions(0, j);
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            double best = delta[0] + transitions(0, j);
            std::size_t arg = 0;
            for (std::size_t k = 1; k < t; ++k) {
                const double v = delta[k] + transitions(k, j);
                if (v > best) {
                    best = v;
                    arg = k;
                }
            }
            next[j] = best + emissions(i, j);
            back[i * t + j] = arg;
        }
        delta.swap(next);
    }
    double best = delta[0] + transitions(0, stop);
    std::size_t last = 0;
    for (std::size_t k = 1; k < t; ++k) {
        const double v = delta[k] + transitions(k, stop);
        if (v > best) {
            best = v;
            last = k;
        }
    }
    out.score = best;
    out.path.assign(n, 0);
    out.path[n - 1] = last;
    for (std::size_t i = n - 1; i > 0; --i) out.path[i - 1] = back[i * t + out.path[i]];
    return out;
}

/// Posterior p(y_i = t) for every position.
inline Matrix crf_marginals(const Matrix& emissions, const Matrix& transitions) {
    if (emissions.rows == 0) return Matrix(0, emissions.cols);
    const auto fb = crf_forward_backward(emissions, transitions);
    Matrix m(emissions.rows, emissions.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = std::exp(fb.alpha(i, j) + fb.beta(i, j) - fb.log_z);
    }
    return m;
}

/// Negative log-likelihood of `gold` and its gradient: expected minus
/// observed feature counts for both emissions and transitions.
struct CrfLossGradient {
    double nll = 0.0;
    Matrix d_emissions;
    Matrix d_transitions;
};

inline CrfLossGradient crf_nll_gradient(const Matrix& emissions, const Matrix& transitions,
                                        std::span<const std::size_t> gold) {
    const std::size_t n = emissions.rows, t = emissions.cols, start = t, stop = t + 1;
    CrfLossGradient g{0.0, Matrix(n, t), Matrix(t + 2, t + 2)};
    if (n == 0) return g;
    const auto fb = crf_forward_backward(emissions, transitions);
    g.nll = fb.log_z - crf_score_sequence(emissions, transitions, gold);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < t; ++j) g.d_emissions(i, j) = std::exp(fb.alpha(i, j) + fb.beta(i, j) - fb.log_z);
    }
    for (std::size_t j = 0; j < t; ++j) {
        g.d_transitions(start, j) += g.d_emissions(0, j);
        g.d_transitions(j, stop) += g.d_emissions(n - 1, j);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t a = 0; a < t; ++a) {
            for (std::size_t b = 0; b < t; ++b) {
                g.d_transitions(a, b) +=
                    std::exp(fb.alpha(i, a) + transitions(a, b) + emissions(i + 1, b) + fb.beta(i + 1, b) - fb.log_z);
            }
        }
    }
    // Observed counts.
    for (std::size_t i = 0; i < n; ++i) g.d_emissions(i, gold[i]) -= 1.0;
    g.d_transitions(start, gold[0]) -= 1.0;
    for (std::size_t i = 1; i < n; ++i) g.d_transitions(gold[i - 1], gold[i]) -= 1.0;
    g.d_transitions(gold[n - 1], stop) -= 1.0;
    return g;
}

/// Copy of `transitions` with every transition the schema forbids set to
/// `value`, including all edges into START and out of STOP.
inline Matrix apply_transition_mask(const Matrix& transitions, const LabelSchema& schema,
                                    double value = kMaskedTransition) {
    Matrix out = transitions;
    for (std::size_t a = 0; a < out.rows; ++a) {
        for (std::size_t b = 0; b < out.cols; ++b) {
            if (!schema.allowed(a, b)) out(a, b) = value;
        }
    }
    return out;
}

}  // namespace medner

#endif  // MEDNER_NERCORE_CRF_HPP
