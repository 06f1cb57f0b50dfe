#include "mmgr/graph.hpp"

#include <algorithm>
#include <set>

#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

// Appends the widened feature `id` to `out`.
void append_feature(std::vector<double>& out, const FeatureSet& features, const std::string& id, std::size_t dim) {
    const std::size_t offset = out.size();
    out.resize(offset + dim);
    features.copy_feature(id, dim, std::span<double>(out.data() + offset, dim));
}

GraphNode make_source_node(const SourceRecord& src) {
    GraphNode node;
    node.kind = source_kind(src.modality);
    node.source_id = src.source_id;
    node.has_label = true;
    node.label = src.label;
    return node;
}

}  // namespace

QuestionGraph build_dense_graph(const QuestionInstance& inst, const FeatureSet& features, const FeatureDims& dims) {
    validate_instance(inst);
    QuestionGraph g;
    g.topology = Topology::Dense;
    g.graph_id = inst.question_id;
    g.category = inst.category;

    std::vector<double> question;
    append_feature(question, features, inst.question_feature_id, dims.text);

    for (const auto& src : inst.sources) {
        GraphNode node = make_source_node(src);
        node.features.reserve(node_input_dim(Topology::Dense, node.kind, dims));
        node.features = question;
        if (src.modality == Modality::Image) {
            append_feature(node.features, features, src.feature_ids[0], dims.image);
            append_feature(node.features, features, src.feature_ids[1], dims.text);
        } else {
            append_feature(node.features, features, src.feature_ids[0], dims.text);
        }
        g.nodes.push_back(std::move(node));
    }
    const auto n = static_cast<std::uint32_t>(g.nodes.size());
    g.edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
    return g;
}

QuestionGraph build_star_graph(const QuestionInstance& inst, const FeatureSet& features, const FeatureDims& dims) {
    validate_instance(inst);
    QuestionGraph g;
    g.topology = Topology::Star;
    g.graph_id = inst.question_id;
    g.category = inst.category;

    GraphNode question;
    question.kind = NodeKind::Question;
    question.has_label = false;
    append_feature(question.features, features, inst.question_feature_id, dims.text);
    g.nodes.push_back(std::move(question));

    for (const auto& src : inst.sources) {
        GraphNode node = make_source_node(src);
        if (src.modality == Modality::Image) {
            append_feature(node.features, features, src.feature_ids[0], dims.image);
            append_feature(node.features, features, src.feature_ids[1], dims.text);
        } else {
            append_feature(node.features, features, src.feature_ids[0], dims.text);
        }
        g.nodes.push_back(std::move(node));
    }
    for (std::uint32_t i = 1; i < g.nodes.size(); ++i) g.edges.emplace_back(0u, i);
    return g;
}

QuestionGraph build_graph(Topology topology, const QuestionInstance& inst, const FeatureSet& features,
                          const FeatureDims& dims) {
    return topology == Topology::Dense ? build_dense_graph(inst, features, dims)
                                       : build_star_graph(inst, features, dims);
}

std::vector<QuestionGraph> build_graphs(Topology topology, std::span<const QuestionInstance> instances,
                                        const FeatureSet& features, const FeatureDims& dims) {
    std::vector<QuestionGraph> graphs;
    graphs.reserve(instances.size());
    for (const auto& inst : instances) graphs.push_back(build_graph(topology, inst, features, dims));
    return graphs;
}

void validate_graph(const QuestionGraph& graph) {
    const std::string where = "graph '" + graph.graph_id + "': ";
    const std::size_t n = graph.nodes.size();
    std::set<Edge> seen;
    for (auto [a, b] : graph.edges) {
        if (a == b) throw ConsistencyError(where + "self loop on node " + std::to_string(a));
        if (a >= n || b >= n) throw ConsistencyError(where + "edge endpoint out of range");
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second)
            throw ConsistencyError(where + "duplicate edge");
    }
    const auto question_nodes = std::count_if(graph.nodes.begin(), graph.nodes.end(),
                                              [](const GraphNode& v) { return v.kind == NodeKind::Question; });
    if (graph.topology == Topology::Dense) {
        if (question_nodes != 0) throw ConsistencyError(where + "dense graph contains a question node");
        if (graph.edges.size() != n * (n - 1) / 2) throw ConsistencyError(where + "dense graph is not complete");
        for (const auto& v : graph.nodes)
            if (!v.has_label) throw ConsistencyError(where + "dense source node without label");
    } else {
        if (question_nodes != 1) throw ConsistencyError(where + "star graph needs exactly one question node");
        if (graph.nodes[0].kind != NodeKind::Question || graph.nodes[0].has_label)
            throw ConsistencyError(where + "star question node must be node 0 and unlabeled");
        if (graph.edges.size() != n - 1) throw ConsistencyError(where + "star graph edge count mismatch");
        for (auto [a, b] : graph.edges)
            if (a != 0 && b != 0) throw ConsistencyError(where + "star edge not incident to the question node");
    }
}

BatchedGraph batch_graphs(std::span<const QuestionGraph> graphs) {
    if (graphs.empty()) throw ConfigError("batch_graphs: empty graph list");
    BatchedGraph b;
    b.topology = graphs.front().topology;

    std::array<std::size_t, kNodeKindCount> width{};
    std::array<std::size_t, kNodeKindCount> rows{};
    std::size_t total_nodes = 0;
    std::size_t total_edges = 0;
    for (const auto& g : graphs) {
        if (g.topology != b.topology)
            throw ConfigError("batch_graphs: mixed topologies ('" + graphs.front().graph_id + "' is " +
                              std::string(to_string(b.topology)) + ", '" + g.graph_id + "' is " +
                              std::string(to_string(g.topology)) + ")");
        for (const auto& v : g.nodes) {
            const std::size_t k = index_of(v.kind);
            if (rows[k] == 0) {
                width[k] = v.features.size();
            } else if (width[k] != v.features.size()) {
                throw DimensionError("batch_graphs: " + std::string(to_string(v.kind)) + " nodes have widths " +
                                     std::to_string(width[k]) + " and " + std::to_string(v.features.size()));
            }
            ++rows[k];
        }
        total_nodes += g.nodes.size();
        total_edges += g.edges.size();
    }
    for (std::size_t k = 0; k < kNodeKindCount; ++k) {
        b.kind_features[k] = Matrix(rows[k], width[k]);
        b.kind_nodes[k].reserve(rows[k]);
    }

    b.kinds.reserve(total_nodes);
    b.edges.reserve(total_edges);
    b.node_offsets.push_back(0);
    b.edge_offsets.push_back(0);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = graphs[gi];
        const auto base = static_cast<std::uint32_t>(b.kinds.size());
        for (std::size_t li = 0; li < g.nodes.size(); ++li) {
            const auto& v = g.nodes[li];
            const std::size_t k = index_of(v.kind);
            const auto node = static_cast<std::uint32_t>(b.kinds.size());
            const auto row = static_cast<std::uint32_t>(b.kind_nodes[k].size());
            std::copy(v.features.begin(), v.features.end(), b.kind_features[k].row(row).begin());
            b.kind_nodes[k].push_back(node);
            b.kind_row.push_back(row);
            b.kinds.push_back(v.kind);
            b.graph_of.push_back(static_cast<std::uint32_t>(gi));
            b.local_index.push_back(static_cast<std::uint32_t>(li));
            b.has_label.push_back(v.has_label ? 1 : 0);
            b.labels.push_back(v.label);
            b.source_ids.push_back(v.source_id);
        }
        for (auto [x, y] : g.edges) {
            if (x >= g.nodes.size() || y >= g.nodes.size() || x == y)
                throw ConsistencyError("batch_graphs: graph '" + g.graph_id + "' has an invalid edge");
            b.edges.emplace_back(base + std::min(x, y), base + std::max(x, y));
        }
        b.graph_ids.push_back(g.graph_id);
        b.categories.push_back(g.category);
        b.node_offsets.push_back(b.kinds.size());
        b.edge_offsets.push_back(b.edges.size());
    }

    const std::size_t n = b.kinds.size();
    std::vector<std::uint32_t> degree(n, 0);
    for (auto [x, y] : b.edges) {
        ++degree[x];
        ++degree[y];
    }
    b.adjacency_offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) b.adjacency_offsets[i + 1] = b.adjacency_offsets[i] + degree[i];
    b.adjacency.resize(b.adjacency_offsets[n]);
    std::vector<std::uint32_t> cursor(b.adjacency_offsets.begin(), b.adjacency_offsets.end() - 1);
    for (auto [x, y] : b.edges) {
        b.adjacency[cursor[x]++] = y;
        b.adjacency[cursor[y]++] = x;
    }
    return b;
}

std::vector<QuestionGraph> unbatch(const BatchedGraph& batch) {
    std::vector<QuestionGraph> graphs(batch.graph_count());
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        auto& g = graphs[gi];
        g.topology = batch.topology;
        g.graph_id = batch.graph_ids[gi];
        g.category = batch.categories[gi];
        const std::size_t base = batch.node_offsets[gi];
        for (std::size_t node = base; node < batch.node_offsets[gi + 1]; ++node) {
            GraphNode v;
            v.kind = batch.kinds[node];
            v.source_id = batch.source_ids[node];
            auto f = batch.features(node);
            v.features.assign(f.begin(), f.end());
            v.has_label = batch.has_label[node] != 0;
            v.label = batch.labels[node];
            g.nodes.push_back(std::move(v));
        }
        for (std::size_t e = batch.edge_offsets[gi]; e < batch.edge_offsets[gi + 1]; ++e) {
            const auto [x, y] = batch.edges[e];
            g.edges.emplace_back(static_cast<std::uint32_t>(x - base), static_cast<std::uint32_t>(y - base));
        }
    }
    return graphs;
}

}  // namespace mmgr
