#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "mmgr/dataset.hpp"
#include "mmgr/feature_store.hpp"

namespace mmgr {

/// Desk-scale stand-in for a real multimodal retrieval dataset.
///
/// Each question has a unit "topic" vector q (text width): the normalized sum
/// of a seeded domain direction shared by all questions and a fresh random
/// direction. Positive sources are about q: text snippets are q plus noise,
/// image sources carry a fixed seeded projection of q (image width) plus
/// noise and a caption of q plus noise. Negatives are built the same way
/// around an isotropic random topic, so at zero noise a linear probe on the
/// domain direction separates them. Noise is i.i.d. N(0, noise_scale^2) per
/// coordinate.
struct SyntheticSpec {
    std::size_t n_questions = 250;
    std::size_t sources_per_question = 10;
    std::size_t positives_per_question = 2;
    double noise_scale = 0.1;
    std::uint64_t seed = 7;
    /// Carved from the end of the question list; the rest is train.
    std::size_t dev_questions = 0;
    std::size_t test_questions = 0;
    FeatureDims dims{};

    /// ConfigError on violated invariants.
    void validate() const;
};

struct SyntheticData {
    Manifest manifest;
    FeatureStore text_store;
    FeatureStore image_store;

    Dataset to_dataset() const;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct SyntheticPaths {
    std::filesystem::path manifest;
    std::filesystem::path text_store;
    std::filesystem::path image_store;
};

/// Writes manifest.jsonl, text.mmqf and image.mmqf (plus sidecars) into `dir`.
SyntheticPaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace mmgr
