#include "mmgr/feature_store.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "mmgr/errors.hpp"
#include "io_util.hpp"

namespace mmgr {
namespace {

constexpr char kMagic[4] = {'M', 'M', 'Q', 'F'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8;

}  // namespace

FeatureStore::FeatureStore(std::size_t dim) : m_dim(dim) {}

FeatureStore::FeatureStore(std::size_t dim, std::vector<std::string> ids, std::vector<float> payload)
    : m_dim(dim), m_ids(std::move(ids)), m_payload(std::move(payload)) {
    if (m_payload.size() != m_ids.size() * m_dim) {
        throw ConsistencyError("feature store: " + std::to_string(m_ids.size()) + " ids but payload holds " +
                               std::to_string(m_payload.size()) + " values at dim " + std::to_string(m_dim));
    }
    m_index.reserve(m_ids.size());
    for (std::size_t i = 0; i < m_ids.size(); ++i) {
        if (!m_index.emplace(m_ids[i], i).second)
            throw ConsistencyError("feature store: duplicate id '" + m_ids[i] + "'");
    }
}

void FeatureStore::append(std::string id, std::span<const float> row) {
    if (row.size() != m_dim) {
        throw DimensionError("feature store: row '" + id + "' has dim " + std::to_string(row.size()) +
                             ", store dim is " + std::to_string(m_dim));
    }
    if (!m_index.emplace(id, m_ids.size()).second)
        throw ConsistencyError("feature store: duplicate id '" + id + "'");
    m_ids.push_back(std::move(id));
    m_payload.insert(m_payload.end(), row.begin(), row.end());
}

void FeatureStore::append(std::string id, std::span<const double> row) {
    std::vector<float> narrowed(row.begin(), row.end());
    append(std::move(id), std::span<const float>(narrowed));
}

std::optional<std::size_t> FeatureStore::find(std::string_view id) const {
    auto it = m_index.find(std::string(id));
    if (it == m_index.end()) return std::nullopt;
    return it->second;
}

std::span<const float> FeatureStore::row_f32(std::size_t index) const {
    return {m_payload.data() + index * m_dim, m_dim};
}

std::vector<double> FeatureStore::row(std::size_t index) const {
    auto src = row_f32(index);
    return {src.begin(), src.end()};
}

void FeatureStore::copy_row(std::size_t index, std::span<double> out) const {
    auto src = row_f32(index);
    if (out.size() != src.size()) throw DimensionError("feature store: output span has wrong width");
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<double>(src[i]);
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p += ".ids.json";
    return p;
}

void write_store(const std::filesystem::path& path, const FeatureStore& store) {
    std::string bytes;
    bytes.reserve(kHeaderBytes + store.payload().size() * 4);
    bytes.append(kMagic, 4);
    io::put_u32(bytes, FeatureStore::kFormatVersion);
    io::put_u32(bytes, static_cast<std::uint32_t>(store.dim()));
    io::put_u64(bytes, store.count());
    for (float v : store.payload()) io::put_f32(bytes, v);
    io::write_file(path, bytes);

    nlohmann::json ids = store.ids();
    io::write_file(ids_sidecar_path(path), ids.dump() + "\n");
}

FeatureStore read_store(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("feature store " + path.string() + ": bad magic (expected MMQF)");
    io::Reader in(bytes, 4);
    const std::uint32_t version = in.u32();
    if (version != FeatureStore::kFormatVersion)
        throw FormatError("feature store " + path.string() + ": unsupported version " + std::to_string(version));
    const std::size_t dim = in.u32();
    const std::uint64_t count = in.u64();
    if (dim != 0 && count > (bytes.size() - kHeaderBytes) / (4 * dim))
        throw FormatError("feature store " + path.string() + ": truncated payload");
    const std::uint64_t expected = kHeaderBytes + count * dim * 4;
    if (bytes.size() != expected) {
        throw FormatError("feature store " + path.string() + ": payload is " + std::to_string(bytes.size()) +
                          " bytes, header implies " + std::to_string(expected));
    }
    std::vector<float> payload(count * dim);
    for (auto& v : payload) v = in.f32();

    const auto sidecar = ids_sidecar_path(path);
    nlohmann::json ids_json;
    try {
        ids_json = nlohmann::json::parse(io::read_file(sidecar));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("feature store sidecar " + sidecar.string() + ": " + e.what());
    }
    if (!ids_json.is_array()) throw FormatError("feature store sidecar " + sidecar.string() + ": expected array");
    std::vector<std::string> ids;
    ids.reserve(ids_json.size());
    for (const auto& id : ids_json) {
        if (!id.is_string()) throw FormatError("feature store sidecar " + sidecar.string() + ": non-string id");
        ids.push_back(id.get<std::string>());
    }
    if (ids.size() != count) {
        throw ConsistencyError("feature store " + path.string() + ": header count " + std::to_string(count) +
                               " but sidecar lists " + std::to_string(ids.size()) + " ids");
    }
    return FeatureStore(dim, std::move(ids), std::move(payload));
}

void FeatureSet::add(FeatureStore store) {
    const std::size_t slot = m_stores.size();
    for (std::size_t i = 0; i < store.count(); ++i) {
        if (m_index.contains(store.ids()[i]))
            throw ConsistencyError("feature id '" + store.ids()[i] + "' appears in more than one store");
    }
    for (std::size_t i = 0; i < store.count(); ++i) m_index.emplace(store.ids()[i], std::make_pair(slot, i));
    m_stores.push_back(std::move(store));
}

std::optional<FeatureSet::Ref> FeatureSet::find(std::string_view id) const {
    auto it = m_index.find(std::string(id));
    if (it == m_index.end()) return std::nullopt;
    return Ref{&m_stores[it->second.first], it->second.second};
}

FeatureSet::Ref FeatureSet::resolve(std::string_view id) const {
    auto ref = find(id);
    if (!ref) throw LookupError("unknown feature id '" + std::string(id) + "'");
    return *ref;
}

void FeatureSet::copy_feature(std::string_view id, std::size_t expected_dim, std::span<double> out) const {
    const Ref ref = resolve(id);
    if (ref.store->dim() != expected_dim) {
        throw DimensionError("feature '" + std::string(id) + "' has dim " + std::to_string(ref.store->dim()) +
                             ", expected " + std::to_string(expected_dim));
    }
    ref.store->copy_row(ref.row, out);
}

}  // namespace mmgr
