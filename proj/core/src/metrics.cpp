#include "mmgr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "mmgr/errors.hpp"
#include "mmgr/graph.hpp"
#include "mmgr/threads.hpp"

namespace mmgr {

void ConfusionCounts::add(int label, int predicted) {
    if (label == 1) {
        predicted == 1 ? ++tp : ++fn;
    } else {
        predicted == 1 ? ++fp : ++tn;
    }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

EvalCell cell_of(const ConfusionCounts& c) { return {c, f1(c)}; }

}  // namespace

Prf f1(const ConfusionCounts& c) {
    Prf r;
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    const double s = r.precision + r.recall;
    r.f1 = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
    return r;
}

std::vector<QuestionPrediction> predict_batch(const Model& model, const BatchedGraph& batch) {
    const Matrix logits = model_logits(model, batch);
    std::vector<QuestionPrediction> out(batch.graph_count());
    for (std::size_t g = 0; g < out.size(); ++g) {
        out[g].question_id = batch.graph_ids[g];
        out[g].category = batch.categories[g];
        for (std::size_t n = batch.node_offsets[g]; n < batch.node_offsets[g + 1]; ++n) {
            if (!batch.has_label[n]) continue;
            SourcePrediction s;
            s.source_id = batch.source_ids[n];
            s.modality = batch.kinds[n] == NodeKind::ImageSource ? Modality::Image : Modality::Text;
            s.label = batch.labels[n];
            const double a = logits(n, 0);
            const double b = logits(n, 1);
            s.score = 1.0 / (1.0 + std::exp(a - b));
            s.predicted = b > a ? 1 : 0;
            out[g].sources.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<QuestionPrediction> predict(const Model& model, const FeatureSet& features, const FeatureDims& dims,
                                        const std::vector<QuestionInstance>& instances, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("predict: batch size must be positive");
    const std::size_t chunks = (instances.size() + batch_size - 1) / batch_size;
    std::vector<std::vector<QuestionPrediction>> parts(chunks);
    parallel_for(chunks, worker_threads(), [&](std::size_t c) {
        const std::size_t begin = c * batch_size;
        const std::size_t n = std::min(batch_size, instances.size() - begin);
        const auto graphs = build_graphs(model.topology(),
                                         std::span<const QuestionInstance>(instances.data() + begin, n), features, dims);
        parts[c] = predict_batch(model, batch_graphs(graphs));
    });
    std::vector<QuestionPrediction> out;
    out.reserve(instances.size());
    for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    return out;
}

EvalReport make_report(const std::vector<QuestionPrediction>& predictions, bool with_macro) {
    EvalReport r;
    ConfusionCounts combined;
    std::map<std::string, ConfusionCounts> modality;
    std::map<std::string, ConfusionCounts> category;
    std::set<std::string> unknown;
    double macro_sum = 0.0;
    for (const auto& q : predictions) {
        std::string cat = q.category;
        if (!is_known_category(cat)) {
            unknown.insert(cat);
            cat = "other";
        }
        ConfusionCounts per_question;
        for (const auto& s : q.sources) {
            per_question.add(s.label, s.predicted);
            modality[std::string(to_string(s.modality))].add(s.label, s.predicted);
        }
        category[cat] += per_question;
        combined += per_question;
        macro_sum += f1(per_question).f1;
    }
    if (combined.total() == 0) throw EmptyBatchError("evaluate: no labeled sources to score");

    r.questions = predictions.size();
    r.combined = cell_of(combined);
    for (const auto& [k, c] : modality) r.per_modality[k] = cell_of(c);
    for (const auto& [k, c] : category) r.per_category[k] = cell_of(c);
    r.accuracy = ratio(combined.tp + combined.tn, combined.total());
    if (with_macro) r.macro_f1 = macro_sum / static_cast<double>(predictions.size());
    for (const auto& u : unknown) r.warnings.push_back("unknown category '" + u + "' grouped under 'other'");
    return r;
}

EvalReport evaluate(const Model& model, const Dataset& dataset, const std::string& split, bool with_macro,
                    std::size_t batch_size) {
    const auto& instances = dataset.split(split);
    if (instances.empty()) throw ConfigError("evaluate: split '" + split + "' is empty");
    return make_report(predict(model, dataset.features, dataset.meta.dims, instances, batch_size), with_macro);
}

namespace {

nlohmann::ordered_json cell_json(const EvalCell& c) {
    nlohmann::ordered_json j;
    j["precision"] = c.prf.precision;
    j["recall"] = c.prf.recall;
    j["f1"] = c.prf.f1;
    j["tp"] = c.counts.tp;
    j["fp"] = c.counts.fp;
    j["fn"] = c.counts.fn;
    j["tn"] = c.counts.tn;
    return j;
}

std::string fmt(const char* spec, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::string report_json(const EvalReport& r, int indent) {
    nlohmann::ordered_json j;
    j["questions"] = r.questions;
    j["combined"] = cell_json(r.combined);
    j["accuracy"] = r.accuracy;
    if (r.macro_f1) j["macro_f1"] = *r.macro_f1;
    j["per_modality"] = nlohmann::ordered_json::object();
    for (const auto& [k, c] : r.per_modality) j["per_modality"][k] = cell_json(c);
    j["per_category"] = nlohmann::ordered_json::object();
    for (const auto& [k, c] : r.per_category) j["per_category"][k] = cell_json(c);
    j["warnings"] = r.warnings;
    return j.dump(indent);
}

std::string report_table(const EvalReport& r) {
    std::vector<std::pair<std::string, const EvalCell*>> rows;
    rows.emplace_back("combined", &r.combined);
    for (const auto& [k, c] : r.per_modality) rows.emplace_back("modality:" + k, &c);
    for (const auto& [k, c] : r.per_category) rows.emplace_back("category:" + k, &c);

    std::size_t width = 5;
    for (const auto& row : rows) width = std::max(width, row.first.size());

    auto pad = [](std::string s, std::size_t w, bool right) {
        if (s.size() >= w) return s;
        return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
    };
    std::string out = pad("cell", width, false);
    for (const char* h : {"P", "R", "F1", "TP", "FP", "FN", "TN"}) out += "  " + pad(h, 7, true);
    out += '\n';
    for (const auto& [name, c] : rows) {
        out += pad(name, width, false);
        out += "  " + pad(fmt("%.4f", c->prf.precision), 7, true);
        out += "  " + pad(fmt("%.4f", c->prf.recall), 7, true);
        out += "  " + pad(fmt("%.4f", c->prf.f1), 7, true);
        for (std::size_t v : {c->counts.tp, c->counts.fp, c->counts.fn, c->counts.tn})
            out += "  " + pad(std::to_string(v), 7, true);
        out += '\n';
    }
    out += "accuracy " + fmt("%.4f", r.accuracy);
    if (r.macro_f1) out += "  macro_f1 " + fmt("%.4f", *r.macro_f1);
    out += '\n';
    for (const auto& w : r.warnings) out += "warning: " + w + '\n';
    return out;
}

}  // namespace mmgr
