#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmgr/dataset.hpp"
#include "mmgr/model.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

struct AdamWSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double base_lr = 2e-5;
    double lr_gamma = 0.9;
    /// StepLR period in epochs.
    std::size_t lr_step_epochs = 10;
    /// {w_neg, w_pos}
    std::array<double, 2> class_weights{1.0, 10.0};
    AdamWSettings adamw{};
    std::uint64_t seed = 0;
    /// Stop once the validation F1 reaches this value.
    std::optional<double> target_f1;
    bool use_bias = true;

    /// ConfigError on violated invariants.
    void validate() const;
};

struct TrainState {
    std::uint64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    double lr = 0.0;
};

struct LossResult {
    double loss = 0.0;
    Matrix dlogits;
};

/// Mean over nodes with mask[n] != 0 of w[label] * -log softmax(logits)[label].
/// EmptyBatchError when the mask selects nothing.
LossResult weighted_ce(const Matrix& logits, const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                       const std::array<double, 2>& weights);

/// One AdamW update over every trainable parameter. Initializes the moments
/// on first use.
void adamw_step(std::vector<Parameter*> params, TrainState& state, double lr, const AdamWSettings& settings);

/// base_lr * gamma^floor(epoch / lr_step_epochs)
double step_lr(std::size_t epoch, const TrainConfig& config);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
    double val_f1_image = 0.0;
    double val_f1_text = 0.0;
    double seconds = 0.0;
};

/// One JSON object per line; `with_time` false drops the wall-clock field.
std::string epoch_log_json(const EpochLog& log, bool with_time = true);

struct FitResult {
    Model model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_f1 = 0.0;
    /// "dev", or "train" when the dataset has no dev questions.
    std::string validation_split;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains with seeded shuffling and returns the parameters of the epoch with
/// the best validation F1 (earliest on ties).
FitResult fit(const Dataset& dataset, const TrainConfig& config, const ModelSpec& spec,
              const EpochCallback& on_epoch = {});
FitResult fit(const Dataset& dataset, const TrainConfig& config, Topology topology, bool gated,
              const EpochCallback& on_epoch = {});

}  // namespace mmgr
