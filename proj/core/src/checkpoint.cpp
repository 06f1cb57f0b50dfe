#include "mmgr/checkpoint.hpp"

#include "io_util.hpp"
#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

constexpr std::string_view kMagic = "MMGM";

void put_dims(std::string& out, const std::vector<std::size_t>& dims) {
    io::put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) io::put_u64(out, d);
}

std::vector<std::size_t> get_dims(io::Reader& in) {
    const std::uint32_t n = in.u32();
    if (n > 1024) throw FormatError("checkpoint: implausible layer count " + std::to_string(n));
    std::vector<std::size_t> dims(n);
    for (auto& d : dims) d = in.u64();
    return dims;
}

}  // namespace

std::string serialize_model(const Model& model) {
    const ModelSpec& spec = model.spec();
    std::string out(kMagic);
    io::put_u32(out, kCheckpointVersion);
    io::put_u8(out, static_cast<std::uint8_t>(spec.topology));
    io::put_u8(out, spec.gated ? 1 : 0);
    io::put_u8(out, spec.use_bias ? 1 : 0);
    io::put_string(out, spec.concat_order);
    io::put_u64(out, spec.feature_dims.text);
    io::put_u64(out, spec.feature_dims.image);
    put_dims(out, spec.conv_dims);
    put_dims(out, spec.head_dims);

    const auto params = model.parameters();
    io::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        io::put_string(out, p->name);
        io::put_u64(out, p->value.rows());
        io::put_u64(out, p->value.cols());
        for (double v : p->value.data()) io::put_f64(out, v);
    }
    return out;
}

Model deserialize_model(const std::string& bytes) {
    io::Reader in(bytes);
    if (in.raw(kMagic.size()) != kMagic) throw FormatError("checkpoint: bad magic (expected MMGM)");
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));

    ModelSpec spec;
    const std::uint8_t topo = in.u8();
    if (topo > static_cast<std::uint8_t>(Topology::Star)) throw FormatError("checkpoint: bad topology tag");
    spec.topology = static_cast<Topology>(topo);
    spec.gated = in.u8() != 0;
    spec.use_bias = in.u8() != 0;
    spec.concat_order = in.string();
    if (spec.concat_order != kConcatOrder)
        throw ConfigError("checkpoint: feature concatenation order '" + spec.concat_order + "' is not supported");
    spec.feature_dims.text = in.u64();
    spec.feature_dims.image = in.u64();
    spec.conv_dims = get_dims(in);
    spec.head_dims = get_dims(in);
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }

    Rng rng(0);
    Model model(spec, rng);
    auto params = model.parameters();
    const std::uint32_t count = in.u32();
    if (count != params.size())
        throw FormatError("checkpoint: " + std::to_string(count) + " parameters stored, architecture has " +
                          std::to_string(params.size()));
    for (auto* p : params) {
        const std::string name = in.string();
        const std::uint64_t rows = in.u64();
        const std::uint64_t cols = in.u64();
        if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
            throw FormatError("checkpoint: parameter '" + name + "' [" + std::to_string(rows) + "x" +
                              std::to_string(cols) + "] does not match '" + p->name + "' " +
                              p->value.shape_string());
        for (double& v : p->value.data()) v = in.f64();
    }
    if (in.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
    model.bump_version();
    return model;
}

void save_model(const std::filesystem::path& path, const Model& model) { io::write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path, std::optional<Topology> expected) {
    Model model = deserialize_model(io::read_file(path));
    if (expected && *expected != model.topology())
        throw ConfigError("checkpoint " + path.string() + " was trained for the " +
                          std::string(to_string(model.topology())) + " topology, not " +
                          std::string(to_string(*expected)));
    return model;
}

}  // namespace mmgr
