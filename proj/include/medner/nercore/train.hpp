#ifndef MEDNER_NERCORE_TRAIN_HPP
#define MEDNER_NERCORE_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/eval.hpp"
#include "medner/nercore/model.hpp"
#include "medner/util/error.hpp"
#include "medner/util/random.hpp"

namespace medner {

/// Optimizer and schedule settings. Defaults follow the reference setup.
struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 30;
    double dropout = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t warmup_steps = 3000;
    std::size_t patience = 5;
    double grad_clip_norm = 5.0;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
        if (batch_size == 0) throw ValidationError("batch_size must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("Adam betas must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
        if (patience == 0) throw ValidationError("patience must be positive");
        if (!(grad_clip_norm > 0.0)) throw ValidationError("grad_clip_norm must be positive");
    }

    bool operator==(const TrainConfig&) const = default;
};

/// Linear warmup from 0 to the base rate over `warmup_steps`, then constant.
/// `step` counts optimizer updates starting at 1.
inline double learning_rate_at(const TrainConfig& cfg, std::size_t step) {
    if (cfg.warmup_steps == 0 || step >= cfg.warmup_steps) return cfg.learning_rate;
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

inline double global_norm(const ParamSet& g) {
    double s = 0.0;
    for (const auto* t : g.tensors()) {
        for (double v : t->data) s += v * v;
    }
    return std::sqrt(s);
}

/// Rescales `g` so its global L2 norm is at most `max_norm`; returns the norm
/// before clipping.
inline double clip_gradients(ParamSet& g, double max_norm) {
    const double norm = global_norm(g);
    if (norm > max_norm) g.scale(max_norm / norm);
    return norm;
}

struct AdamState {
    ParamSet first_moment;
    ParamSet second_moment;
    std::size_t step = 0;

    static AdamState for_params(const ParamSet& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// One bias-corrected Adam update at learning rate `lr`.
inline void adam_update(ParamSet& params, AdamState& state, const ParamSet& grad, double lr, const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto p = params.tensors();
    auto m = state.first_moment.tensors();
    auto v = state.second_moment.tensors();
    auto g = grad.tensors();
    for (std::size_t k = 0; k < ParamSet::kCount; ++k) {
        auto& pd = p[k]->data;
        auto& md = m[k]->data;
        auto& vd = v[k]->data;
        const auto& gd = g[k]->data;
        for (std::size_t i = 0; i < pd.size(); ++i) {
            md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
            vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
            pd[i] -= lr * (md[i] / bc1) / (std::sqrt(vd[i] / bc2) + cfg.epsilon);
        }
    }
}

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_micro_f1 = 0.0;
};

/// Mutable training bookkeeping.
struct TrainState {
    AdamState adam;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t epochs_since_improvement = 0;
    std::vector<EpochRecord> history;
};

struct FitResult {
    Model model;  // parameters from the best validation epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  // 0 means the untrained parameters
    double best_metric = 0.0;
    bool early_stopped = false;
};

/// Entity micro-F1 of the model's predictions against a tagged corpus.
inline double validation_micro_f1(const Model& model, const Corpus& val) {
    return evaluate_corpora(val, predict_corpus(model, val)).micro_f1;
}

/// Metrics log record, one JSON object per line.
inline std::string format_epoch_record(const EpochRecord& r) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["step"] = r.step;
    j["lr"] = r.lr;
    j["train_loss"] = r.train_loss;
    j["val_micro_f1"] = r.val_micro_f1;
    return j.dump();
}

/// Mini-batch Adam on the summed CRF loss. After every epoch the model is
/// scored on `val` (entity micro-F1; `train` is used when `val` is empty).
/// Training stops once `patience` epochs pass without a strict improvement
/// and the best epoch's parameters are returned.
inline FitResult fit(Model model, const Corpus& train, const Corpus& val, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    if (train.empty()) throw ValidationError("training corpus is empty");
    for (const auto& s : train.sentences) gold_indices(model, s);
    const Corpus& monitor = val.empty() ? train : val;

    TrainState state;
    state.adam = AdamState::for_params(model.params);
    FitResult result{model, {}, 0, 0.0, false};
    if (cfg.max_epochs == 0) {
        result.best_metric = validation_micro_f1(model, monitor);
        return result;
    }

    std::vector<std::size_t> order(train.size());
    std::vector<Sentence> batch;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(splitmix64(cfg.seed) ^ splitmix64(epoch));
        rng.shuffle(order);

        double epoch_loss = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) {
                batch.push_back(train.sentences[order[k]]);
            }
            DropoutContext drop{cfg.dropout, cfg.seed, state.adam.step, 0};
            auto bg = model_backward(model, batch, drop);
            if (!std::isfinite(bg.loss) || !bg.grad.all_finite()) {
                throw NumericError("non-finite loss or gradient at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(state.adam.step + 1) + " (loss " + std::to_string(bg.loss) + ")");
            }
            clip_gradients(bg.grad, cfg.grad_clip_norm);
            lr = learning_rate_at(cfg, state.adam.step + 1);
            adam_update(model.params, state.adam, bg.grad, lr, cfg);
            if (!model.params.all_finite()) {
                throw NumericError("parameters became non-finite at step " + std::to_string(state.adam.step));
            }
            epoch_loss += bg.loss;
        }

        EpochRecord rec{epoch, state.adam.step, lr, epoch_loss, validation_micro_f1(model, monitor)};
        state.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_micro_f1 > state.best_metric) {
            state.best_metric = rec.val_micro_f1;
            state.best_epoch = epoch;
            state.epochs_since_improvement = 0;
            result.model.params = model.params;
        } else if (++state.epochs_since_improvement >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
    }
    result.history = std::move(state.history);
    result.best_epoch = state.best_epoch;
    result.best_metric = state.best_metric;
    return result;
}

/// One point of a hyperparameter grid.
struct GridPoint {
    TrainConfig train;
    ModelConfig model;
};

/// Ordered hyperparameter name -> candidate values (as text).
using ConfigGrid = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Sets one named hyperparameter from text.
inline void set_hyperparameter(GridPoint& g, const std::string& key, const std::string& value) {
    try {
        if (key == "learning_rate" || key == "lr") g.train.learning_rate = std::stod(value);
        else if (key == "batch_size") g.train.batch_size = std::stoul(value);
        else if (key == "max_epochs" || key == "epochs") g.train.max_epochs = std::stoul(value);
        else if (key == "dropout") g.train.dropout = std::stod(value);
        else if (key == "warmup_steps") g.train.warmup_steps = std::stoul(value);
        else if (key == "patience") g.train.patience = std::stoul(value);
        else if (key == "grad_clip_norm") g.train.grad_clip_norm = std::stod(value);
        else if (key == "lstm_state") g.model.lstm_state = std::stoul(value);
        else if (key == "char_dim") g.model.char_dim = std::stoul(value);
        else if (key == "num_filters" || key == "filters") g.model.num_filters = std::stoul(value);
        else if (key == "filter_width" || key == "cnn_width") g.model.filter_width = std::stoul(value);
        else throw UsageError("unknown grid hyperparameter '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ParseError("bad value '" + value + "' for " + key);
    } catch (const std::out_of_range&) {
        throw ParseError("value '" + value + "' out of range for " + key);
    }
}

/// Grid file: "name = v1, v2, ..." per line, '#' comments.
inline ConfigGrid parse_grid(std::string_view text) {
    ConfigGrid grid;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'name = values'", lineno);
        std::string key = trim(line.substr(0, eq));
        std::vector<std::string> values;
        std::stringstream vs(line.substr(eq + 1));
        std::string v;
        while (std::getline(vs, v, ',')) {
            v = trim(v);
            if (!v.empty()) values.push_back(v);
        }
        if (key.empty() || values.empty()) throw ParseError("grid line needs a name and values", lineno);
        grid.emplace_back(key, values);
    }
    return grid;
}

/// Cartesian product of the grid over `base`; the last key varies fastest.
inline std::vector<GridPoint> expand_grid(const ConfigGrid& grid, const GridPoint& base) {
    std::vector<GridPoint> points{base};
    for (const auto& [key, values] : grid) {
        std::vector<GridPoint> next;
        for (const auto& p : points) {
            for (const auto& v : values) {
                GridPoint q = p;
                set_hyperparameter(q, key, v);
                next.push_back(q);
            }
        }
        points = std::move(next);
    }
    return points;
}

/// Values of grid point `index` in expand_grid order, one per key.
inline std::vector<std::string> grid_values(const ConfigGrid& grid, std::size_t index) {
    std::vector<std::string> out(grid.size());
    for (std::size_t k = grid.size(); k-- > 0;) {
        const auto& values = grid[k].second;
        out[k] = values[index % values.size()];
        index /= values.size();
    }
    return out;
}

struct GridScore {
    GridPoint point;
    double val_micro_f1 = 0.0;
    std::size_t parameter_count = 0;
};

struct GridResult {
    std::size_t best_index = 0;
    std::vector<GridScore> scores;
    FitResult best_fit;
};

/// True when `a` should be preferred over `b`: higher F1, then lower learning
/// rate, then fewer parameters.
inline bool grid_prefers(const GridScore& a, const GridScore& b) {
    if (a.val_micro_f1 != b.val_micro_f1) return a.val_micro_f1 > b.val_micro_f1;
    if (a.point.train.learning_rate != b.point.train.learning_rate) {
        return a.point.train.learning_rate < b.point.train.learning_rate;
    }
    return a.parameter_count < b.parameter_count;
}

/// Trains one model per grid point and keeps the best by validation F1.
inline GridResult grid_search(const std::vector<GridPoint>& points, const LabelSchema& schema, const Vocabulary& vocab,
                              const std::shared_ptr<const EmbeddingTable>& embeddings, const Corpus& train,
                              const Corpus& val, const std::function<void(std::size_t, const GridScore&)>& on_point = {}) {
    if (points.empty()) throw ValidationError("grid search needs at least one configuration");
    GridResult out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        auto model = Model::create(pt.model, schema, vocab, embeddings, pt.train.seed);
        auto res = fit(std::move(model), train, val, pt.train);
        GridScore score{pt, res.best_metric, res.model.parameter_count()};
        if (on_point) on_point(i, score);
        out.scores.push_back(score);
        if (i == 0 || grid_prefers(score, out.scores[out.best_index])) {
            out.best_index = i;
            out.best_fit = std::move(res);
        }
    }
    return out;
}

}  // namespace medner

#endif  // MEDNER_NERCORE_TRAIN_HPP
