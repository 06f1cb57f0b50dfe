#include <doctest.h>

#include <json.hpp>

#include "mmgr/errors.hpp"
#include "mmgr/lexical.hpp"
#include "mmgr/metrics.hpp"
#include "support.hpp"

using namespace mmgr;

namespace {

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.fn = fn;
    c.tn = tn;
    return c;
}

struct Outcomes {
    std::vector<int> labels;
    std::vector<int> predicted;
};

Outcomes random_outcomes(std::size_t n, Rng& rng) {
    Outcomes o;
    const double pos_rate = rng.uniform01();
    const double hit_rate = rng.uniform01();
    for (std::size_t i = 0; i < n; ++i) {
        o.labels.push_back(rng.uniform01() < pos_rate ? 1 : 0);
        o.predicted.push_back(rng.uniform01() < hit_rate ? o.labels.back() : 1 - o.labels.back());
    }
    return o;
}

// Independent enumeration: counts each of the four outcomes by matching the
// (label, prediction) pair explicitly, then applies the definitions.
Prf brute_force(const Outcomes& o) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < o.labels.size(); ++i) {
        const auto pair = std::make_pair(o.labels[i], o.predicted[i]);
        if (pair == std::make_pair(1, 1)) tp += 1;
        if (pair == std::make_pair(0, 1)) fp += 1;
        if (pair == std::make_pair(1, 0)) fn += 1;
    }
    Prf r;
    r.precision = tp + fp == 0 ? 0.0 : tp / (tp + fp);
    r.recall = tp + fn == 0 ? 0.0 : tp / (tp + fn);
    r.f1 = r.precision + r.recall == 0 ? 0.0 : 2 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

SourcePrediction src(std::string id, Modality m, int label, int predicted) {
    SourcePrediction s;
    s.source_id = std::move(id);
    s.modality = m;
    s.label = label;
    s.predicted = predicted;
    return s;
}

QuestionPrediction question(std::string id, std::string category, std::vector<SourcePrediction> sources) {
    return {std::move(id), std::move(category), std::move(sources)};
}

// Two graph layers and a head whose final layer ignores its input and
// always prefers the negative class.
Model all_negative_model(const FeatureDims& dims) {
    ModelSpec spec = ModelSpec::reference(Topology::Star, false, dims);
    spec.conv_dims = {8, 4};
    spec.head_dims = {4, 2};
    Rng rng(1);
    Model m(spec, rng);
    auto& last = m.head().back();
    last.weight().value.fill(0.0);
    last.bias().value = Matrix::from_rows({{1.0, 0.0}});
    return m;
}

SourceRecord text_source(std::string id, int label, std::string text) {
    SourceRecord s;
    s.source_id = std::move(id);
    s.modality = Modality::Text;
    s.label = label;
    s.feature_ids = {s.source_id + ".snippet"};
    s.raw_text = std::move(text);
    return s;
}

}  // namespace

TEST_CASE("f1 examples") {
    const auto perfect = f1(counts(5, 0, 0));
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const auto half = f1(counts(1, 1, 0));
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 1.0);
    CHECK(half.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(half.f1 == doctest::Approx(0.6667).epsilon(1e-4));

    const auto none = f1(counts(0, 0, 3));
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    const auto empty = f1(counts(0, 0, 0, 7));
    CHECK(empty.precision == 0.0);
    CHECK(empty.recall == 0.0);
    CHECK(empty.f1 == 0.0);
}

TEST_CASE("f1 equals brute-force enumeration") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto o = random_outcomes(1 + rng.below(60), rng);
        ConfusionCounts c;
        for (std::size_t i = 0; i < o.labels.size(); ++i) c.add(o.labels[i], o.predicted[i]);
        CHECK(c.total() == o.labels.size());
        const Prf got = f1(c);
        const Prf want = brute_force(o);
        CHECK(got.precision == want.precision);
        CHECK(got.recall == want.recall);
        CHECK(got.f1 == want.f1);
    }
}

TEST_CASE("counts do not depend on node order") {
    Rng rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        auto o = random_outcomes(20, rng);
        ConfusionCounts a;
        for (std::size_t i = 0; i < 20; ++i) a.add(o.labels[i], o.predicted[i]);
        const std::size_t i = rng.below(20);
        const std::size_t j = rng.below(20);
        std::swap(o.labels[i], o.labels[j]);
        std::swap(o.predicted[i], o.predicted[j]);
        ConfusionCounts b;
        for (std::size_t k = 0; k < 20; ++k) b.add(o.labels[k], o.predicted[k]);
        CHECK(a == b);
    }
}

TEST_CASE("report example: two hits and one false alarm") {
    const auto r = make_report({question("q", "Color",
                                         {src("a", Modality::Image, 1, 1), src("b", Modality::Text, 1, 1),
                                          src("c", Modality::Text, 0, 1), src("d", Modality::Image, 0, 0)})});
    CHECK(r.combined.counts == counts(2, 1, 0, 1));
    CHECK(r.combined.prf.f1 == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.questions == 1);
    CHECK(r.per_category.at("Color").counts == r.combined.counts);
    CHECK(r.accuracy == 0.75);
    CHECK(r.warnings.empty());
}

TEST_CASE("combined counts equal the sum over modalities and categories") {
    Rng rng(19);
    const std::vector<std::string> cats{"Color", "Shape", "text", "YesNo"};
    std::vector<QuestionPrediction> preds;
    for (int q = 0; q < 40; ++q) {
        std::vector<SourcePrediction> sources;
        const auto o = random_outcomes(1 + rng.below(10), rng);
        for (std::size_t i = 0; i < o.labels.size(); ++i)
            sources.push_back(src("s" + std::to_string(i), rng.below(2) ? Modality::Image : Modality::Text,
                                  o.labels[i], o.predicted[i]));
        preds.push_back(question("q" + std::to_string(q), cats[rng.below(cats.size())], std::move(sources)));
    }
    const auto r = make_report(preds, true);
    ConfusionCounts by_modality, by_category;
    for (const auto& [k, c] : r.per_modality) by_modality += c.counts;
    for (const auto& [k, c] : r.per_category) by_category += c.counts;
    CHECK(by_modality == r.combined.counts);
    CHECK(by_category == r.combined.counts);
    for (const auto& [k, c] : r.per_category) {
        CHECK(c.prf.f1 >= 0.0);
        CHECK(c.prf.f1 <= 1.0);
    }
    REQUIRE(r.macro_f1.has_value());
    CHECK(*r.macro_f1 >= 0.0);
    CHECK(*r.macro_f1 <= 1.0);
}

TEST_CASE("macro F1 averages per-question scores") {
    const auto r = make_report({question("a", "text", {src("x", Modality::Text, 1, 1)}),
                                question("b", "text", {src("y", Modality::Text, 1, 0)})},
                               true);
    CHECK(*r.macro_f1 == 0.5);
    CHECK(r.combined.prf.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("unknown categories are grouped under other") {
    const auto r = make_report({question("q", "Weather", {src("a", Modality::Text, 1, 1)}),
                                question("p", "Shape", {src("b", Modality::Text, 0, 0)})});
    CHECK(r.per_category.count("other") == 1);
    CHECK(r.per_category.count("Weather") == 0);
    CHECK(r.per_category.count("Shape") == 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("Weather") != std::string::npos);
}

TEST_CASE("empty predictions are rejected") {
    CHECK_THROWS_AS((void)make_report({}), EmptyBatchError);
    CHECK_THROWS_AS((void)make_report({question("q", "text", {})}), EmptyBatchError);
}

TEST_CASE("evaluate: an all-negative model scores high accuracy and zero F1") {
    const FeatureDims dims{8, 12};
    const Dataset ds = testing::synthetic_dataset(10, 20, 0.1, 3, dims);
    const Model model = all_negative_model(dims);
    const auto r = evaluate(model, ds, "dev");
    CHECK(r.questions == 20);
    CHECK(r.combined.counts.tp == 0);
    CHECK(r.combined.counts.fp == 0);
    CHECK(r.combined.counts.tn == 160);
    CHECK(r.combined.counts.fn == 40);
    CHECK(r.accuracy == 0.8);
    CHECK(r.combined.prf.f1 == 0.0);

    CHECK_THROWS_AS((void)evaluate(model, ds, "test"), ConfigError);
    CHECK_THROWS_AS((void)evaluate(model, ds, "holdout"), ConfigError);
}

TEST_CASE("predictions are argmax and scores are positive-class probabilities") {
    const FeatureDims dims{8, 12};
    const Dataset ds = testing::synthetic_dataset(6, 0, 0.1, 4, dims);
    ModelSpec spec = ModelSpec::reference(Topology::Star, false, dims);
    spec.conv_dims = {8, 4};
    spec.head_dims = {4, 2};
    Rng rng(2);
    const Model model(spec, rng);
    const auto graphs = build_graphs(Topology::Star, ds.train, ds.features, dims);
    const auto batch = batch_graphs(graphs);
    const Matrix logits = model_logits(model, batch);
    const auto preds = predict_batch(model, batch);
    REQUIRE(preds.size() == 6);
    for (std::size_t g = 0; g < preds.size(); ++g) {
        CHECK(preds[g].question_id == ds.train[g].question_id);
        REQUIRE(preds[g].sources.size() == 10);
        for (std::size_t s = 0; s < 10; ++s) {
            const std::size_t n = batch.node_offsets[g] + 1 + s;
            const auto& p = preds[g].sources[s];
            CHECK(p.source_id == ds.train[g].sources[s].source_id);
            CHECK(p.predicted == (logits(n, 1) > logits(n, 0) ? 1 : 0));
            CHECK(p.score == doctest::Approx(softmax_rows(Matrix::from_rows({{logits(n, 0), logits(n, 1)}}))(0, 1)));
        }
    }
    const auto chunked = predict(model, ds.features, dims, ds.train, 4);
    for (std::size_t g = 0; g < preds.size(); ++g)
        for (std::size_t s = 0; s < 10; ++s) CHECK(std::abs(chunked[g].sources[s].score - preds[g].sources[s].score) < 1e-12);
}

TEST_CASE("report rendering") {
    const auto r = make_report({question("q", "Weather",
                                         {src("a", Modality::Image, 1, 1), src("b", Modality::Text, 0, 1)})},
                               true);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["combined"]["tp"] == 1);
    CHECK(j["combined"]["fp"] == 1);
    CHECK(j["combined"]["f1"].get<double>() == r.combined.prf.f1);
    CHECK(j["per_modality"].contains("image"));
    CHECK(j["per_modality"].contains("text"));
    CHECK(j["per_category"].contains("other"));
    CHECK(j["warnings"].size() == 1);
    CHECK(j.contains("macro_f1"));

    const std::string table = report_table(r);
    CHECK(table.find("combined") != std::string::npos);
    CHECK(table.find("modality:image") != std::string::npos);
    CHECK(table.find("category:other") != std::string::npos);
    CHECK(table.find("warning:") != std::string::npos);
}

TEST_CASE("tokenize") {
    CHECK(tokenize("What color is the Eiffel-Tower? what") ==
          std::vector<std::string>{"what", "color", "is", "the", "eiffel", "tower"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("  ,, ").empty());
}

TEST_CASE("lexical overlap examples") {
    QuestionInstance inst;
    inst.question_id = "q";
    inst.category = "text";
    inst.question_text = "a b c";

    SUBCASE("highest overlaps win") {
        inst.sources = {text_source("s0", 1, "a b c"), text_source("s1", 1, "b x"), text_source("s2", 0, "y z")};
        const auto p = lexical_overlap(inst);
        CHECK(p.sources[0].predicted == 1);
        CHECK(p.sources[1].predicted == 1);
        CHECK(p.sources[2].predicted == 0);
        CHECK(p.sources[0].score == 3.0);
        CHECK(p.sources[1].score == 1.0);
        CHECK(p.sources[2].score == 0.0);
    }
    SUBCASE("zero overlaps fall back to manifest order") {
        inst.sources = {text_source("s0", 0, "x"), text_source("s1", 0, "y"), text_source("s2", 1, "z"),
                        text_source("s3", 1, "")};
        const auto p = lexical_overlap(inst);
        CHECK(p.sources[0].predicted == 1);
        CHECK(p.sources[1].predicted == 1);
        CHECK(p.sources[2].predicted == 0);
        CHECK(p.sources[3].predicted == 0);
    }
    SUBCASE("ties keep manifest order") {
        inst.sources = {text_source("s0", 0, "x"), text_source("s1", 0, "a"), text_source("s2", 1, "b"),
                        text_source("s3", 1, "c")};
        const auto p = lexical_overlap(inst);
        CHECK(p.sources[0].predicted == 0);
        CHECK(p.sources[1].predicted == 1);
        CHECK(p.sources[2].predicted == 1);
        CHECK(p.sources[3].predicted == 0);
    }
    SUBCASE("missing text counts as empty") {
        inst.sources = {text_source("s0", 0, "x"), text_source("s1", 1, "c")};
        inst.sources[1].raw_text.reset();
        inst.question_text.reset();
        const auto p = lexical_overlap(inst, 1);
        CHECK(p.sources[0].predicted == 1);
        CHECK(p.sources[1].predicted == 0);
    }
}
