#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmgr/feature_store.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/types.hpp"

namespace mmgr {

struct GraphNode {
    NodeKind kind = NodeKind::TextSource;
    std::string source_id;  // empty for the question node
    std::vector<double> features;
    bool has_label = false;
    int label = 0;
};

/// Undirected edge stored once; `first < second`.
using Edge = std::pair<std::uint32_t, std::uint32_t>;

struct QuestionGraph {
    Topology topology = Topology::Star;
    std::string graph_id;
    std::string category;
    std::vector<GraphNode> nodes;
    std::vector<Edge> edges;
};

/// Complete graph over the sources. Every node is a "super node" carrying
/// the question embedding: image nodes are (question, image, caption),
/// text nodes (question, snippet).
QuestionGraph build_dense_graph(const QuestionInstance& inst, const FeatureSet& features,
                                const FeatureDims& dims = {});

/// One unlabeled question node (node 0) joined to every source node. Image
/// nodes are (image, caption), text nodes the snippet alone.
QuestionGraph build_star_graph(const QuestionInstance& inst, const FeatureSet& features,
                               const FeatureDims& dims = {});

QuestionGraph build_graph(Topology topology, const QuestionInstance& inst, const FeatureSet& features,
                          const FeatureDims& dims = {});

std::vector<QuestionGraph> build_graphs(Topology topology, std::span<const QuestionInstance> instances,
                                        const FeatureSet& features, const FeatureDims& dims = {});

/// Checks the structural invariants of a graph (edge counts per topology,
/// no self loops, no duplicates, question node placement). Throws
/// ConsistencyError.
void validate_graph(const QuestionGraph& graph);

/// Disjoint union of several graphs of one topology, with node features
/// regrouped into one table per NodeKind for the heterogeneous first layer.
struct BatchedGraph {
    Topology topology = Topology::Star;

    // Per node.
    std::vector<NodeKind> kinds;
    std::vector<std::uint32_t> graph_of;
    std::vector<std::uint32_t> local_index;
    std::vector<std::uint8_t> has_label;
    std::vector<int> labels;
    std::vector<std::string> source_ids;
    /// Row of the node inside `kind_features[kind]`.
    std::vector<std::uint32_t> kind_row;

    // Per graph.
    std::vector<std::string> graph_ids;
    std::vector<std::string> categories;
    std::vector<std::size_t> node_offsets;  // size graph_count()+1
    std::vector<std::size_t> edge_offsets;  // size graph_count()+1

    /// Global indices, stored once per undirected edge.
    std::vector<Edge> edges;

    std::array<Matrix, kNodeKindCount> kind_features;
    /// Nodes of each kind in row order of kind_features.
    std::array<std::vector<std::uint32_t>, kNodeKindCount> kind_nodes;

    /// Both directions of every edge as CSR: neighbors of i are
    /// adjacency[adjacency_offsets[i] .. adjacency_offsets[i+1]).
    std::vector<std::uint32_t> adjacency_offsets;
    std::vector<std::uint32_t> adjacency;

    std::size_t node_count() const noexcept { return kinds.size(); }
    std::size_t edge_count() const noexcept { return edges.size(); }
    std::size_t graph_count() const noexcept { return graph_ids.size(); }
    std::size_t degree(std::size_t node) const {
        return adjacency_offsets[node + 1] - adjacency_offsets[node];
    }
    std::span<const std::uint32_t> neighbors(std::size_t node) const {
        return {adjacency.data() + adjacency_offsets[node], degree(node)};
    }
    std::span<const double> features(std::size_t node) const {
        return kind_features[index_of(kinds[node])].row(kind_row[node]);
    }
};

/// ConfigError on an empty list or mixed topologies; DimensionError when two
/// nodes of the same kind have different widths.
BatchedGraph batch_graphs(std::span<const QuestionGraph> graphs);
std::vector<QuestionGraph> unbatch(const BatchedGraph& batch);

}  // namespace mmgr
