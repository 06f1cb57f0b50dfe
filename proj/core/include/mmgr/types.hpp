#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

enum class NodeKind : std::uint8_t { Question = 0, ImageSource = 1, TextSource = 2 };
inline constexpr std::size_t kNodeKindCount = 3;
inline constexpr std::array<NodeKind, kNodeKindCount> kAllNodeKinds = {
    NodeKind::Question, NodeKind::ImageSource, NodeKind::TextSource};

enum class Topology : std::uint8_t { Dense = 0, Star = 1 };

std::string_view to_string(Modality m);
std::string_view to_string(NodeKind k);
std::string_view to_string(Topology t);

/// Throws ConfigError on unknown names.
Modality parse_modality(std::string_view name);
Topology parse_topology(std::string_view name);

constexpr std::size_t index_of(NodeKind k) { return static_cast<std::size_t>(k); }
constexpr NodeKind source_kind(Modality m) {
    return m == Modality::Image ? NodeKind::ImageSource : NodeKind::TextSource;
}

/// Widths of the encoder outputs: sentence vectors for questions, snippets
/// and captions; pooled CNN features for images.
struct FeatureDims {
    std::size_t text = 768;
    std::size_t image = 2048;

    bool operator==(const FeatureDims&) const = default;
};

/// Tag recorded in manifests and checkpoints for the node feature layout:
/// dense nodes are (question, image, caption) / (question, snippet), star
/// image nodes are (image, caption).
inline constexpr std::string_view kConcatOrder = "question,image,caption";

/// Input width of a node of `kind` under `topology`; 0 when the kind does
/// not occur in that topology.
std::size_t node_input_dim(Topology topology, NodeKind kind, const FeatureDims& dims);

struct SourceRecord {
    std::string source_id;
    Modality modality = Modality::Text;
    int label = 0;
    /// Image: {image_feature_id, caption_feature_id}; Text: {snippet_feature_id}.
    std::vector<std::string> feature_ids;
    /// Snippet or caption text; only the lexical baseline reads it.
    std::optional<std::string> raw_text;
};

struct QuestionInstance {
    std::string question_id;
    std::string category;
    std::string split;
    std::string question_feature_id;
    std::optional<std::string> question_text;
    std::vector<SourceRecord> sources;
};

/// The six visual question categories plus "text".
const std::vector<std::string>& known_categories();
bool is_known_category(std::string_view category);

/// Checks the per-instance invariants: at least one source, unique source
/// ids, two feature ids for image sources and one for text, labels in {0,1}.
void validate_instance(const QuestionInstance& inst);

}  // namespace mmgr
