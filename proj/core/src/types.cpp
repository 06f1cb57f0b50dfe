#include "mmgr/types.hpp"

#include <algorithm>
#include <unordered_set>

#include "mmgr/errors.hpp"

namespace mmgr {

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

std::string_view to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Question: return "question";
        case NodeKind::ImageSource: return "image";
        case NodeKind::TextSource: return "text";
    }
    return "unknown";
}

std::string_view to_string(Topology t) { return t == Topology::Dense ? "dense" : "star"; }

Modality parse_modality(std::string_view name) {
    if (name == "image") return Modality::Image;
    if (name == "text") return Modality::Text;
    throw ConfigError("unknown modality '" + std::string(name) + "' (expected image|text)");
}

Topology parse_topology(std::string_view name) {
    if (name == "dense") return Topology::Dense;
    if (name == "star") return Topology::Star;
    throw ConfigError("unknown topology '" + std::string(name) + "' (expected dense|star)");
}

std::size_t node_input_dim(Topology topology, NodeKind kind, const FeatureDims& dims) {
    if (topology == Topology::Dense) {
        switch (kind) {
            case NodeKind::Question: return 0;
            case NodeKind::ImageSource: return dims.text + dims.image + dims.text;
            case NodeKind::TextSource: return dims.text + dims.text;
        }
    } else {
        switch (kind) {
            case NodeKind::Question: return dims.text;
            case NodeKind::ImageSource: return dims.image + dims.text;
            case NodeKind::TextSource: return dims.text;
        }
    }
    return 0;
}

const std::vector<std::string>& known_categories() {
    static const std::vector<std::string> categories = {"YesNo",  "Number", "Color", "Choose",
                                                        "Others", "Shape",  "text"};
    return categories;
}

bool is_known_category(std::string_view category) {
    const auto& cats = known_categories();
    return std::find(cats.begin(), cats.end(), category) != cats.end();
}

void validate_instance(const QuestionInstance& inst) {
    const std::string where = "question '" + inst.question_id + "'";
    if (inst.sources.empty()) throw FormatError(where + ": no sources");
    std::unordered_set<std::string> seen;
    for (const auto& src : inst.sources) {
        if (!seen.insert(src.source_id).second)
            throw FormatError(where + ": duplicate source id '" + src.source_id + "'");
        const std::size_t want = src.modality == Modality::Image ? 2 : 1;
        if (src.feature_ids.size() != want) {
            throw FormatError(where + ": source '" + src.source_id + "' of modality " +
                              std::string(to_string(src.modality)) + " needs " + std::to_string(want) +
                              " feature ids, has " + std::to_string(src.feature_ids.size()));
        }
        if (src.label != 0 && src.label != 1)
            throw FormatError(where + ": source '" + src.source_id + "' label must be 0 or 1");
    }
}

}  // namespace mmgr
