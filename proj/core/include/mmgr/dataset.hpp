#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mmgr/feature_store.hpp"
#include "mmgr/types.hpp"

namespace mmgr {

/// Optional first manifest line: `{"_meta": {...}}`. Declares the feature
/// widths the stores must carry and free-form provenance strings (for
/// example the encoder pooling mode).
struct ManifestMeta {
    FeatureDims dims{};
    std::string concat_order{kConcatOrder};
    std::vector<std::pair<std::string, std::string>> extra;
    bool present = false;
};

struct Manifest {
    ManifestMeta meta;
    std::vector<QuestionInstance> instances;
    /// 1-based manifest line of each instance (empty for in-memory manifests).
    std::vector<std::size_t> line_numbers;
};

/// Parses one manifest record. `line_no` is 1-based and only used in error
/// messages. Throws FormatError for malformed JSON or schema violations.
QuestionInstance parse_manifest_line(std::string_view line, std::size_t line_no);
/// Canonical single-line serialization (stable key order).
std::string manifest_line(const QuestionInstance& inst);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// JSON Schema (draft 2020-12) for a manifest record.
std::string manifest_schema_json();

struct Dataset {
    ManifestMeta meta;
    std::vector<QuestionInstance> train;
    std::vector<QuestionInstance> dev;
    std::vector<QuestionInstance> test;
    FeatureSet features;
    /// Non-fatal findings, e.g. categories outside the known taxonomy.
    std::vector<std::string> warnings;

    /// "train", "dev" or "test"; ConfigError otherwise.
    const std::vector<QuestionInstance>& split(std::string_view name) const;
    std::size_t question_count() const { return train.size() + dev.size() + test.size(); }
};

/// Groups instances by split and resolves every feature id eagerly against
/// `features`, checking widths against `meta.dims`. Errors name the
/// offending question.
Dataset assemble_dataset(Manifest manifest, FeatureSet features);

/// Reads the manifest and stores from disk and calls assemble_dataset.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::vector<std::filesystem::path>& store_paths);

}  // namespace mmgr
