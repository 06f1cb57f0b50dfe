#pragma once

#include <cstddef>
#include <cstdint>

#include "mmgr/graph.hpp"
#include "mmgr/model.hpp"

namespace mmgr {

/// Star graph with `sources` source nodes (alternating image and text) and
/// Gaussian features.
QuestionGraph random_star_graph(std::size_t sources, const FeatureDims& dims, std::uint64_t seed);

struct BenchResult {
    std::size_t nodes = 0;
    std::size_t repeat = 0;
    double min_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    /// model forwards per scored graph
    double forwards_per_graph = 0.0;
};

/// Times `repeat` inference forwards over one star graph of `sources` nodes.
BenchResult bench_forward(const Model& model, std::size_t sources, std::size_t repeat, std::uint64_t seed);

}  // namespace mmgr
