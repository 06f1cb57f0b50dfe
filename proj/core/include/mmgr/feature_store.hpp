#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmgr {

/// Immutable table of embedding rows addressed by string id.
///
/// On disk ("MMQF" format, little-endian):
///   bytes 0..3   magic "MMQF"
///   u32          format version (1)
///   u32          dim
///   u64          count
///   f32[count*dim] row-major payload
/// plus a sidecar `<path>.ids.json` holding the ordered id list as a JSON
/// array of strings.
///
/// The payload is kept in its 32-bit form so that round trips are bitwise
/// exact; rows are widened to 64-bit when they are read out.
class FeatureStore {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    explicit FeatureStore(std::size_t dim = 0);
    FeatureStore(std::size_t dim, std::vector<std::string> ids, std::vector<float> payload);

    std::size_t dim() const noexcept { return m_dim; }
    std::size_t count() const noexcept { return m_ids.size(); }
    const std::vector<std::string>& ids() const noexcept { return m_ids; }
    std::span<const float> payload() const noexcept { return m_payload; }

    void append(std::string id, std::span<const float> row);
    /// Narrows to 32-bit.
    void append(std::string id, std::span<const double> row);

    std::optional<std::size_t> find(std::string_view id) const;
    std::span<const float> row_f32(std::size_t index) const;
    std::vector<double> row(std::size_t index) const;
    /// Widens row `index` into `out` (which must have length dim()).
    void copy_row(std::size_t index, std::span<double> out) const;

private:
    std::size_t m_dim;
    std::vector<std::string> m_ids;
    std::vector<float> m_payload;
    std::unordered_map<std::string, std::size_t> m_index;
};

std::filesystem::path ids_sidecar_path(const std::filesystem::path& store_path);

void write_store(const std::filesystem::path& path, const FeatureStore& store);
/// Throws FormatError on bad magic, version or truncated payload and
/// ConsistencyError when the sidecar disagrees with the header.
FeatureStore read_store(const std::filesystem::path& path);

/// Several stores resolved through one id namespace.
class FeatureSet {
public:
    struct Ref {
        const FeatureStore* store;
        std::size_t row;
    };

    /// Throws ConsistencyError if an id is already present in another store.
    void add(FeatureStore store);

    std::size_t store_count() const noexcept { return m_stores.size(); }
    const FeatureStore& store(std::size_t i) const { return m_stores[i]; }

    std::optional<Ref> find(std::string_view id) const;
    /// Throws LookupError naming the id.
    Ref resolve(std::string_view id) const;
    /// Resolves `id`, checks its width against `expected_dim` (DimensionError)
    /// and widens it into `out`.
    void copy_feature(std::string_view id, std::size_t expected_dim, std::span<double> out) const;

private:
    std::vector<FeatureStore> m_stores;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> m_index;
};

}  // namespace mmgr
