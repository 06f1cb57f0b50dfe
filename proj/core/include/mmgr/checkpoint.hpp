#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mmgr/model.hpp"

namespace mmgr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "MMGM" container: format version, topology, gated and bias flags, the
/// concatenation-order tag, feature and layer widths, then every parameter
/// in declaration order as (name, rows, cols, little-endian f64 values).
std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const Model& model);
/// ConfigError when `expected` is set and differs from the stored topology.
Model load_model(const std::filesystem::path& path, std::optional<Topology> expected = std::nullopt);

}  // namespace mmgr
