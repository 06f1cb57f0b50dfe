#include "mmgr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mmgr/errors.hpp"
#include "mmgr/rng.hpp"

namespace mmgr {

QuestionGraph random_star_graph(std::size_t sources, const FeatureDims& dims, std::uint64_t seed) {
    if (sources == 0) throw ConfigError("bench: at least one source node is required");
    Rng rng(seed);
    auto gaussian = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.normal();
        return v;
    };
    QuestionGraph g;
    g.topology = Topology::Star;
    g.graph_id = "bench";
    g.category = "text";
    GraphNode q;
    q.kind = NodeKind::Question;
    q.features = gaussian(node_input_dim(Topology::Star, NodeKind::Question, dims));
    g.nodes.push_back(std::move(q));
    for (std::size_t i = 0; i < sources; ++i) {
        GraphNode s;
        s.kind = i % 2 == 0 ? NodeKind::ImageSource : NodeKind::TextSource;
        s.source_id = "s" + std::to_string(i);
        s.has_label = true;
        s.features = gaussian(node_input_dim(Topology::Star, s.kind, dims));
        g.nodes.push_back(std::move(s));
        g.edges.emplace_back(0u, static_cast<std::uint32_t>(i + 1));
    }
    return g;
}

BenchResult bench_forward(const Model& model, std::size_t sources, std::size_t repeat, std::uint64_t seed) {
    if (model.topology() != Topology::Star) throw ConfigError("bench: the model must use the star topology");
    if (repeat == 0) throw ConfigError("bench: repeat must be positive");
    const QuestionGraph graph = random_star_graph(sources, model.spec().feature_dims, seed);
    const BatchedGraph batch = batch_graphs(std::span<const QuestionGraph>(&graph, 1));

    std::vector<double> ms;
    ms.reserve(repeat);
    const std::uint64_t calls_before = model_forward_calls();
    for (std::size_t r = 0; r < repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Matrix logits = model_logits(model, batch);
        const auto t1 = std::chrono::steady_clock::now();
        if (logits.rows() != batch.node_count()) throw InternalError("bench: logits do not cover every node");
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    const std::uint64_t calls = model_forward_calls() - calls_before;

    std::sort(ms.begin(), ms.end());
    auto quantile = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size()))) - 1;
        return ms[std::min(idx, ms.size() - 1)];
    };
    BenchResult r;
    r.nodes = sources;
    r.repeat = repeat;
    r.min_ms = ms.front();
    r.median_ms = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    r.p95_ms = quantile(0.95);
    r.forwards_per_graph = static_cast<double>(calls) / static_cast<double>(repeat);
    return r;
}

}  // namespace mmgr
