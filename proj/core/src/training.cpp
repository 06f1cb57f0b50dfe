#include "mmgr/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mmgr/errors.hpp"
#include "mmgr/graph.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/rng.hpp"

namespace mmgr {

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("train: learning rate must be > 0");
    if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("train: lr gamma must be in (0, 1]");
    if (lr_step_epochs == 0) throw ConfigError("train: lr step must be positive");
    for (double w : class_weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("train: class weights must be positive");
    if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0) || !(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0))
        throw ConfigError("train: AdamW betas must be in [0, 1)");
    if (!(adamw.eps > 0.0)) throw ConfigError("train: AdamW eps must be > 0");
    if (!(adamw.weight_decay >= 0.0)) throw ConfigError("train: weight decay must be >= 0");
    if (target_f1 && !(*target_f1 > 0.0 && *target_f1 <= 1.0))
        throw ConfigError("train: target F1 must be in (0, 1]");
}

LossResult weighted_ce(const Matrix& logits, const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                       const std::array<double, 2>& weights) {
    if (logits.cols() != 2) throw ShapeError("weighted_ce: logits " + logits.shape_string() + " must have 2 columns");
    if (labels.size() != logits.rows() || mask.size() != logits.rows())
        throw ShapeError("weighted_ce: " + std::to_string(labels.size()) + " labels and " +
                         std::to_string(mask.size()) + " mask entries for logits " + logits.shape_string());
    const auto count = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
    if (count == 0) throw EmptyBatchError("weighted_ce: no labeled nodes in batch");

    LossResult out{0.0, Matrix(logits.rows(), 2)};
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t n = 0; n < logits.rows(); ++n) {
        if (!mask[n]) continue;
        const int y = labels[n];
        if (y != 0 && y != 1) throw ConfigError("weighted_ce: label " + std::to_string(y) + " at node " + std::to_string(n));
        const double a = logits(n, 0);
        const double b = logits(n, 1);
        const double m = std::max(a, b);
        const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        const double w = weights[static_cast<std::size_t>(y)];
        out.loss += w * (lse - logits(n, static_cast<std::size_t>(y)));
        for (std::size_t c = 0; c < 2; ++c) {
            const double p = std::exp(logits(n, c) - lse);
            out.dlogits(n, c) = w * (p - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv;
        }
    }
    out.loss *= inv;
    return out;
}

void adamw_step(std::vector<Parameter*> params, TrainState& state, double lr, const AdamWSettings& s) {
    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (const auto* p : params) {
            state.m.emplace_back(p->value.rows(), p->value.cols());
            state.v.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    ++state.step;
    state.lr = lr;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    const double decay = 1.0 - lr * s.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (!p.trainable) continue;
        if (!state.m[i].same_shape(p.value))
            throw InternalError("adamw_step: moment shape changed for " + p.name);
        auto theta = p.value.data();
        auto g = p.grad.data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
            v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
            theta[k] *= decay;
            theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.eps);
        }
    }
}

double step_lr(std::size_t epoch, const TrainConfig& config) {
    const auto k = static_cast<double>(epoch / config.lr_step_epochs);
    return config.base_lr * std::pow(config.lr_gamma, k);
}

std::string epoch_log_json(const EpochLog& log, bool with_time) {
    nlohmann::ordered_json j;
    j["epoch"] = log.epoch;
    j["lr"] = log.lr;
    j["train_loss"] = log.train_loss;
    j["val_f1"] = log.val_f1;
    j["val_f1_image"] = log.val_f1_image;
    j["val_f1_text"] = log.val_f1_text;
    if (with_time) j["seconds"] = log.seconds;
    return j.dump();
}

namespace {

std::vector<BatchedGraph> fixed_batches(const std::vector<QuestionGraph>& graphs, std::size_t batch_size) {
    std::vector<BatchedGraph> out;
    for (std::size_t i = 0; i < graphs.size(); i += batch_size) {
        const std::size_t n = std::min(batch_size, graphs.size() - i);
        out.push_back(batch_graphs(std::span<const QuestionGraph>(graphs.data() + i, n)));
    }
    return out;
}

EvalReport validate_on(const Model& model, const std::vector<BatchedGraph>& batches) {
    std::vector<QuestionPrediction> preds;
    for (const auto& b : batches) {
        auto p = predict_batch(model, b);
        preds.insert(preds.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    }
    return make_report(preds);
}

double cell_f1(const EvalReport& r, const std::string& key) {
    auto it = r.per_modality.find(key);
    return it == r.per_modality.end() ? 0.0 : it->second.prf.f1;
}

}  // namespace

FitResult fit(const Dataset& dataset, const TrainConfig& config, const ModelSpec& spec, const EpochCallback& on_epoch) {
    config.validate();
    spec.validate();
    if (dataset.train.empty()) throw ConfigError("train: the training split is empty");
    if (spec.feature_dims != dataset.meta.dims)
        throw DimensionError("train: model feature dims do not match the dataset");

    const auto train_graphs = build_graphs(spec.topology, dataset.train, dataset.features, spec.feature_dims);
    const bool has_dev = !dataset.dev.empty();
    const auto val_graphs =
        has_dev ? build_graphs(spec.topology, dataset.dev, dataset.features, spec.feature_dims) : train_graphs;
    const auto val_batches = fixed_batches(val_graphs, config.batch_size);

    Rng root(config.seed);
    Rng init_rng = root.split();
    Rng shuffle_rng = root.split();

    FitResult result;
    result.validation_split = has_dev ? "dev" : "train";
    result.model = Model(spec, init_rng);
    Model& model = result.model;
    auto params = model.parameters();
    TrainState state;

    std::vector<Matrix> best;
    bool have_best = false;
    std::vector<std::size_t> order(train_graphs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<QuestionGraph> chunk;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = step_lr(epoch, config);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - i);
            chunk.clear();
            for (std::size_t k = 0; k < n; ++k) chunk.push_back(train_graphs[order[i + k]]);
            const BatchedGraph batch = batch_graphs(chunk);

            model.zero_grad();
            const auto fwd = model_forward(model, batch);
            const auto loss = weighted_ce(fwd.logits, batch.labels, batch.has_label, config.class_weights);
            if (!std::isfinite(loss.loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(steps));
            model_backward(model, batch, fwd.cache, loss.dlogits);
            adamw_step(params, state, lr, config.adamw);
            model.bump_version();
            loss_sum += loss.loss;
            ++steps;
        }

        const EvalReport val = validate_on(model, val_batches);
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_loss = loss_sum / static_cast<double>(steps);
        log.val_f1 = val.combined.prf.f1;
        log.val_f1_image = cell_f1(val, "image");
        log.val_f1_text = cell_f1(val, "text");
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);

        if (!have_best || log.val_f1 > result.best_val_f1) {
            have_best = true;
            result.best_val_f1 = log.val_f1;
            result.best_epoch = epoch;
            best.clear();
            for (const auto* p : params) best.push_back(p->value);
        }
        if (config.target_f1 && log.val_f1 >= *config.target_f1) break;
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(best[i]);
    model.zero_grad();
    model.bump_version();
    return result;
}

FitResult fit(const Dataset& dataset, const TrainConfig& config, Topology topology, bool gated,
              const EpochCallback& on_epoch) {
    ModelSpec spec = ModelSpec::reference(topology, gated, dataset.meta.dims);
    spec.use_bias = config.use_bias;
    return fit(dataset, config, spec, on_epoch);
}

}  // namespace mmgr
