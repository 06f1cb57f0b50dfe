#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmgr/dataset.hpp"
#include "mmgr/model.hpp"

namespace mmgr {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    void add(int label, int predicted);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// 0/0 is 0 for each ratio.
Prf f1(const ConfusionCounts& c);

struct SourcePrediction {
    std::string source_id;
    Modality modality = Modality::Text;
    int label = 0;
    /// Softmax probability of the positive class (or a baseline score).
    double score = 0.0;
    int predicted = 0;
};

struct QuestionPrediction {
    std::string question_id;
    std::string category;
    std::vector<SourcePrediction> sources;
};

/// Argmax predictions for every labeled node of an assembled batch, one
/// entry per graph.
std::vector<QuestionPrediction> predict_batch(const Model& model, const BatchedGraph& batch);

/// Argmax predictions for `instances`, graphs batched `batch_size` at a time.
std::vector<QuestionPrediction> predict(const Model& model, const FeatureSet& features, const FeatureDims& dims,
                                        const std::vector<QuestionInstance>& instances,
                                        std::size_t batch_size = 32);

struct EvalCell {
    ConfusionCounts counts;
    Prf prf;
};

struct EvalReport {
    std::size_t questions = 0;
    EvalCell combined;
    std::map<std::string, EvalCell> per_modality;
    std::map<std::string, EvalCell> per_category;
    double accuracy = 0.0;
    /// Mean of per-question F1, when requested.
    std::optional<double> macro_f1;
    std::vector<std::string> warnings;
};

/// Micro-pooled counts per cell. Categories outside the known taxonomy are
/// grouped under "other" with a warning. EmptyBatchError if there is nothing
/// to evaluate.
EvalReport make_report(const std::vector<QuestionPrediction>& predictions, bool with_macro = false);

/// ConfigError for an empty split.
EvalReport evaluate(const Model& model, const Dataset& dataset, const std::string& split, bool with_macro = false,
                    std::size_t batch_size = 32);

std::string report_json(const EvalReport& report, int indent = 2);
std::string report_table(const EvalReport& report);

}  // namespace mmgr
