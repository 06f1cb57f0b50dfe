#include "mmgr/dataset.hpp"

#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string at_line(std::size_t line_no) { return "manifest line " + std::to_string(line_no) + ": "; }

const ordered_json& require(const ordered_json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(at_line(line_no) + "missing field '" + key + "'");
    return *it;
}

std::string require_string(const ordered_json& obj, const char* key, std::size_t line_no) {
    const auto& v = require(obj, key, line_no);
    if (!v.is_string()) throw FormatError(at_line(line_no) + "field '" + key + "' must be a string");
    return v.get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FormatError(at_line(line_no) + "field '" + key + "' must be a string");
    return it->get<std::string>();
}

bool is_meta_record(const ordered_json& obj) { return obj.is_object() && obj.contains("_meta"); }

ManifestMeta parse_meta(const ordered_json& obj, std::size_t line_no) {
    const auto& m = obj.at("_meta");
    if (!m.is_object()) throw FormatError(at_line(line_no) + "'_meta' must be an object");
    ManifestMeta meta;
    meta.present = true;
    for (const auto& [key, value] : m.items()) {
        if (key == "text_dim" || key == "image_dim") {
            if (!value.is_number_unsigned() || value.get<std::size_t>() == 0)
                throw FormatError(at_line(line_no) + "'_meta." + key + "' must be a positive integer");
            (key == "text_dim" ? meta.dims.text : meta.dims.image) = value.get<std::size_t>();
        } else if (key == "concat_order") {
            if (!value.is_string()) throw FormatError(at_line(line_no) + "'_meta.concat_order' must be a string");
            meta.concat_order = value.get<std::string>();
        } else {
            meta.extra.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return meta;
}

std::string meta_line(const ManifestMeta& meta) {
    ordered_json m;
    m["text_dim"] = meta.dims.text;
    m["image_dim"] = meta.dims.image;
    m["concat_order"] = meta.concat_order;
    for (const auto& [k, v] : meta.extra) m[k] = v;
    ordered_json line;
    line["_meta"] = std::move(m);
    return line.dump();
}

}  // namespace

QuestionInstance parse_manifest_line(std::string_view line, std::size_t line_no) {
    ordered_json obj;
    try {
        obj = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(at_line(line_no) + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw FormatError(at_line(line_no) + "record must be a JSON object");

    QuestionInstance inst;
    inst.question_id = require_string(obj, "qid", line_no);
    inst.category = require_string(obj, "category", line_no);
    inst.split = require_string(obj, "split", line_no);
    if (inst.split != "train" && inst.split != "dev" && inst.split != "test")
        throw FormatError(at_line(line_no) + "split must be train|dev|test, got '" + inst.split + "'");
    inst.question_feature_id = require_string(obj, "question_feature_id", line_no);
    inst.question_text = optional_string(obj, "question_text", line_no);

    const auto& sources = require(obj, "sources", line_no);
    if (!sources.is_array()) throw FormatError(at_line(line_no) + "'sources' must be an array");
    for (const auto& s : sources) {
        if (!s.is_object()) throw FormatError(at_line(line_no) + "source entries must be objects");
        SourceRecord rec;
        rec.source_id = require_string(s, "sid", line_no);
        const std::string modality = require_string(s, "modality", line_no);
        if (modality != "image" && modality != "text")
            throw FormatError(at_line(line_no) + "modality must be image|text, got '" + modality + "'");
        rec.modality = parse_modality(modality);
        const auto& label = require(s, "label", line_no);
        if (!label.is_number_integer()) throw FormatError(at_line(line_no) + "'label' must be 0 or 1");
        rec.label = label.get<int>();
        const auto& fids = require(s, "feature_ids", line_no);
        if (!fids.is_array()) throw FormatError(at_line(line_no) + "'feature_ids' must be an array");
        for (const auto& f : fids) {
            if (!f.is_string()) throw FormatError(at_line(line_no) + "feature ids must be strings");
            rec.feature_ids.push_back(f.get<std::string>());
        }
        rec.raw_text = optional_string(s, "raw_text", line_no);
        inst.sources.push_back(std::move(rec));
    }
    try {
        validate_instance(inst);
    } catch (const FormatError& e) {
        throw FormatError(at_line(line_no) + e.what());
    }
    return inst;
}

std::string manifest_line(const QuestionInstance& inst) {
    ordered_json obj;
    obj["qid"] = inst.question_id;
    obj["category"] = inst.category;
    obj["split"] = inst.split;
    obj["question_feature_id"] = inst.question_feature_id;
    if (inst.question_text) obj["question_text"] = *inst.question_text;
    ordered_json sources = ordered_json::array();
    for (const auto& src : inst.sources) {
        ordered_json s;
        s["sid"] = src.source_id;
        s["modality"] = std::string(to_string(src.modality));
        s["label"] = src.label;
        s["feature_ids"] = src.feature_ids;
        if (src.raw_text) s["raw_text"] = *src.raw_text;
        sources.push_back(std::move(s));
    }
    obj["sources"] = std::move(sources);
    return obj.dump();
}

Manifest read_manifest(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    Manifest manifest;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line_no == 1 || manifest.instances.empty()) {
            ordered_json probe = ordered_json::parse(line, nullptr, false);
            if (!probe.is_discarded() && is_meta_record(probe)) {
                if (manifest.meta.present || !manifest.instances.empty())
                    throw FormatError(at_line(line_no) + "'_meta' record must be the first line");
                manifest.meta = parse_meta(probe, line_no);
                continue;
            }
        }
        manifest.instances.push_back(parse_manifest_line(line, line_no));
        manifest.line_numbers.push_back(line_no);
    }
    return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::string out;
    if (manifest.meta.present) out += meta_line(manifest.meta) + "\n";
    for (const auto& inst : manifest.instances) out += manifest_line(inst) + "\n";
    io::write_file(path, out);
}

std::string manifest_schema_json() {
    ordered_json source = {
        {"type", "object"},
        {"required", {"sid", "modality", "label", "feature_ids"}},
        {"additionalProperties", false},
        {"properties",
         {{"sid", {{"type", "string"}}},
          {"modality", {{"enum", {"image", "text"}}}},
          {"label", {{"enum", {0, 1}}}},
          {"feature_ids",
           {{"type", "array"},
            {"items", {{"type", "string"}}},
            {"minItems", 1},
            {"maxItems", 2},
            {"description", "image: [image_feature_id, caption_feature_id]; text: [snippet_feature_id]"}}},
          {"raw_text", {{"type", "string"}, {"description", "snippet or caption; lexical baseline only"}}}}},
        {"allOf",
         {{{"if", {{"properties", {{"modality", {{"const", "image"}}}}}}},
           {"then", {{"properties", {{"feature_ids", {{"minItems", 2}, {"maxItems", 2}}}}}}},
           {"else", {{"properties", {{"feature_ids", {{"minItems", 1}, {"maxItems", 1}}}}}}}}}}};

    ordered_json record = {
        {"type", "object"},
        {"required", {"qid", "category", "split", "question_feature_id", "sources"}},
        {"additionalProperties", false},
        {"properties",
         {{"qid", {{"type", "string"}}},
          {"category",
           {{"type", "string"},
            {"description", "YesNo|Number|Color|Choose|Others|Shape for image questions, text for text questions"}}},
          {"split", {{"enum", {"train", "dev", "test"}}}},
          {"question_feature_id", {{"type", "string"}}},
          {"question_text", {{"type", "string"}}},
          {"sources", {{"type", "array"}, {"minItems", 1}, {"items", source}}}}}};

    ordered_json meta = {
        {"type", "object"},
        {"required", {"_meta"}},
        {"properties",
         {{"_meta",
           {{"type", "object"},
            {"properties",
             {{"text_dim", {{"type", "integer"}, {"minimum", 1}, {"default", 768}}},
              {"image_dim", {{"type", "integer"}, {"minimum", 1}, {"default", 2048}}},
              {"concat_order", {{"type", "string"}, {"default", std::string(kConcatOrder)}}}}}}}}}};

    ordered_json schema = {
        {"$schema", "https://json-schema.org/draft/2020-12/schema"},
        {"$id", "mmgr/manifest-record"},
        {"title", "mmgr manifest line"},
        {"description",
         "One JSON object per line. An optional first line {\"_meta\": {...}} declares feature widths."},
        {"oneOf", {record, meta}}};
    return schema.dump(2);
}

const std::vector<QuestionInstance>& Dataset::split(std::string_view name) const {
    if (name == "train") return train;
    if (name == "dev") return dev;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + std::string(name) + "' (expected train|dev|test)");
}

Dataset assemble_dataset(Manifest manifest, FeatureSet features) {
    Dataset ds;
    ds.meta = manifest.meta;
    const FeatureDims dims = manifest.meta.dims;
    std::vector<double> scratch;

    auto check = [&](const std::string& id, std::size_t want, const std::string& where) {
        auto ref = features.find(id);
        if (!ref) throw LookupError(where + "unresolved feature id '" + id + "'");
        if (ref->store->dim() != want) {
            throw DimensionError(where + "feature '" + id + "' has dim " + std::to_string(ref->store->dim()) +
                                 ", manifest declares " + std::to_string(want));
        }
    };

    for (std::size_t i = 0; i < manifest.instances.size(); ++i) {
        auto& inst = manifest.instances[i];
        const std::string where = i < manifest.line_numbers.size()
                                      ? at_line(manifest.line_numbers[i])
                                      : "question '" + inst.question_id + "': ";
        validate_instance(inst);
        check(inst.question_feature_id, dims.text, where);
        for (const auto& src : inst.sources) {
            if (src.modality == Modality::Image) {
                check(src.feature_ids[0], dims.image, where);
                check(src.feature_ids[1], dims.text, where);
            } else {
                check(src.feature_ids[0], dims.text, where);
            }
        }
        if (!is_known_category(inst.category)) {
            ds.warnings.push_back(where + "category '" + inst.category +
                                  "' is outside the known taxonomy; reported under 'other'");
        }
        auto& bucket = inst.split == "train" ? ds.train : inst.split == "dev" ? ds.dev : ds.test;
        bucket.push_back(std::move(inst));
    }
    ds.features = std::move(features);
    return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::vector<std::filesystem::path>& store_paths) {
    Manifest manifest = read_manifest(manifest_path);
    FeatureSet features;
    for (const auto& p : store_paths) features.add(read_store(p));
    return assemble_dataset(std::move(manifest), std::move(features));
}

}  // namespace mmgr
