#include "mmgr/synthetic.hpp"

#include <array>
#include <cmath>

#include "mmgr/errors.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {
namespace {

constexpr std::array<const char*, 6> kVisualCategories = {"YesNo", "Number", "Color", "Choose", "Others", "Shape"};
constexpr std::size_t kVocabulary = 60;
constexpr std::size_t kWordsPerText = 6;

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (auto& x : v) x /= norm;
    return v;
}

void add_noise(Rng& rng, std::vector<double>& v, double scale) {
    if (scale == 0.0) return;
    for (auto& x : v) x += scale * rng.normal();
}

// Unit direction of `domain` + a fresh unit Gaussian direction.
std::vector<double> question_topic(Rng& rng, const std::vector<double>& domain) {
    auto v = unit_gaussian(rng, domain.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] += domain[i];
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<double> project(const Matrix& projection, const std::vector<double>& topic) {
    std::vector<double> out(projection.rows(), 0.0);
    for (std::size_t r = 0; r < projection.rows(); ++r) {
        auto row = projection.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * topic[c];
        out[r] = acc;
    }
    return out;
}

std::vector<std::size_t> draw_words(Rng& rng, std::size_t n) {
    std::vector<std::size_t> words(n);
    for (auto& w : words) w = rng.below(kVocabulary);
    return words;
}

std::string render_words(const std::vector<std::size_t>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) s += ' ';
        s += "w" + std::to_string(words[i]);
    }
    return s;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (sources_per_question == 0) throw ConfigError("synthetic: sources_per_question must be positive");
    if (positives_per_question > sources_per_question)
        throw ConfigError("synthetic: positives_per_question exceeds sources_per_question");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
        throw ConfigError("synthetic: noise_scale must be finite and >= 0");
    if (dev_questions + test_questions > n_questions)
        throw ConfigError("synthetic: dev + test questions exceed n_questions");
    if (dims.text == 0 || dims.image == 0) throw ConfigError("synthetic: feature dims must be positive");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticData data{{}, FeatureStore(spec.dims.text), FeatureStore(spec.dims.image)};
    data.manifest.meta.present = true;
    data.manifest.meta.dims = spec.dims;
    data.manifest.meta.extra = {{"generator", "synthetic"},
                                {"seed", std::to_string(spec.seed)},
                                {"noise_scale", std::to_string(spec.noise_scale)}};

    Rng rng(spec.seed);
    Rng projection_rng = rng.split();
    Matrix projection(spec.dims.image, spec.dims.text);
    const double proj_sigma = 1.0 / std::sqrt(static_cast<double>(spec.dims.image));
    for (double& v : projection.data()) v = proj_sigma * projection_rng.normal();
    const auto domain = unit_gaussian(projection_rng, spec.dims.text);

    const std::size_t first_dev = spec.n_questions - spec.dev_questions - spec.test_questions;
    const std::size_t first_test = spec.n_questions - spec.test_questions;

    for (std::size_t qi = 0; qi < spec.n_questions; ++qi) {
        const std::string qid = "q" + std::to_string(qi);
        const Modality question_modality = qi % 2 == 0 ? Modality::Image : Modality::Text;

        QuestionInstance inst;
        inst.question_id = qid;
        inst.category = question_modality == Modality::Image
                            ? kVisualCategories[(qi / 2) % kVisualCategories.size()]
                            : "text";
        inst.split = qi < first_dev ? "train" : qi < first_test ? "dev" : "test";
        inst.question_feature_id = qid + "_q";

        const auto topic = question_topic(rng, domain);
        data.text_store.append(inst.question_feature_id, std::span<const double>(topic));
        const auto question_words = draw_words(rng, kWordsPerText);
        inst.question_text = render_words(question_words);

        // Positives first, then shuffled so position carries no signal.
        std::vector<std::size_t> order(spec.sources_per_question);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        inst.sources.resize(spec.sources_per_question);
        for (std::size_t k = 0; k < spec.sources_per_question; ++k) {
            const bool positive = k < spec.positives_per_question;
            const Modality modality =
                positive ? question_modality : (rng.uniform01() < 0.5 ? Modality::Image : Modality::Text);
            const auto source_topic = positive ? topic : unit_gaussian(rng, spec.dims.text);

            SourceRecord& src = inst.sources[order[k]];
            src.source_id = qid + "_s" + std::to_string(order[k]);
            src.modality = modality;
            src.label = positive ? 1 : 0;

            std::vector<std::size_t> words = draw_words(rng, kWordsPerText);
            if (positive) words[0] = question_words[0];
            src.raw_text = render_words(words);

            if (modality == Modality::Text) {
                auto snippet = source_topic;
                add_noise(rng, snippet, spec.noise_scale);
                src.feature_ids = {src.source_id + "_txt"};
                data.text_store.append(src.feature_ids[0], std::span<const double>(snippet));
            } else {
                auto image = project(projection, source_topic);
                add_noise(rng, image, spec.noise_scale);
                auto caption = source_topic;
                add_noise(rng, caption, spec.noise_scale);
                src.feature_ids = {src.source_id + "_img", src.source_id + "_cap"};
                data.image_store.append(src.feature_ids[0], std::span<const double>(image));
                data.text_store.append(src.feature_ids[1], std::span<const double>(caption));
            }
        }
        data.manifest.instances.push_back(std::move(inst));
    }
    return data;
}

Dataset SyntheticData::to_dataset() const {
    FeatureSet features;
    features.add(text_store);
    features.add(image_store);
    return assemble_dataset(manifest, std::move(features));
}

SyntheticPaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    SyntheticPaths paths{dir / "manifest.jsonl", dir / "text.mmqf", dir / "image.mmqf"};
    std::filesystem::create_directories(dir);
    write_manifest(paths.manifest, data.manifest);
    write_store(paths.text_store, data.text_store);
    write_store(paths.image_store, data.image_store);
    return paths;
}

}  // namespace mmgr
