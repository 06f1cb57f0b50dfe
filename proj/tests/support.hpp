#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mmgr/graph.hpp"
#include "mmgr/layers.hpp"
#include "mmgr/model.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/synthetic.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Largest relative error between `analytic` and central differences of
/// `loss` with respect to every entry of `x`.
inline double fd_check(Matrix& x, const Matrix& analytic, const std::function<double()>& loss, double eps = 1e-4) {
    double worst = 0.0;
    auto data = x.data();
    for (std::size_t k = 0; k < data.size(); ++k) {
        const double saved = data[k];
        data[k] = saved + eps;
        const double up = loss();
        data[k] = saved - eps;
        const double down = loss();
        data[k] = saved;
        worst = std::max(worst, relative_error(analytic.data()[k], (up - down) / (2.0 * eps)));
    }
    return worst;
}

/// Sum of elementwise products; a linear probe whose gradient is `c`.
inline double dot(const Matrix& a, const Matrix& c) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a.data()[k] * c.data()[k];
    return s;
}

inline GraphNode random_node(NodeKind kind, std::size_t width, Rng& rng, bool labeled, int label) {
    GraphNode v;
    v.kind = kind;
    v.has_label = labeled;
    v.label = label;
    v.features.resize(width);
    for (double& f : v.features) f = rng.normal();
    return v;
}

/// Star graph with random features: `sources` nodes alternating image and
/// text, labels alternating 1, 0.
inline QuestionGraph star_graph(std::size_t sources, const FeatureDims& dims, Rng& rng, const std::string& id = "g") {
    QuestionGraph g;
    g.topology = Topology::Star;
    g.graph_id = id;
    g.category = "text";
    g.nodes.push_back(random_node(NodeKind::Question, dims.text, rng, false, 0));
    for (std::size_t i = 0; i < sources; ++i) {
        const NodeKind kind = i % 2 == 0 ? NodeKind::ImageSource : NodeKind::TextSource;
        auto v = random_node(kind, node_input_dim(Topology::Star, kind, dims), rng, true, i % 2 == 0 ? 1 : 0);
        v.source_id = id + "_s" + std::to_string(i);
        g.nodes.push_back(std::move(v));
        g.edges.emplace_back(0, static_cast<std::uint32_t>(i + 1));
    }
    return g;
}

inline QuestionGraph dense_graph(std::size_t sources, const FeatureDims& dims, Rng& rng, const std::string& id = "g") {
    QuestionGraph g;
    g.topology = Topology::Dense;
    g.graph_id = id;
    g.category = "text";
    for (std::size_t i = 0; i < sources; ++i) {
        const NodeKind kind = i % 2 == 0 ? NodeKind::ImageSource : NodeKind::TextSource;
        auto v = random_node(kind, node_input_dim(Topology::Dense, kind, dims), rng, true, i % 2 == 0 ? 1 : 0);
        v.source_id = id + "_s" + std::to_string(i);
        g.nodes.push_back(std::move(v));
    }
    for (std::uint32_t i = 0; i < sources; ++i)
        for (std::uint32_t j = i + 1; j < sources; ++j) g.edges.emplace_back(i, j);
    return g;
}

/// Small architecture for gradient checks: two graph layers and a
/// two-layer head.
inline ModelSpec small_spec(Topology topology, bool gated, bool use_bias = true) {
    ModelSpec spec = ModelSpec::reference(topology, gated, FeatureDims{3, 3});
    spec.conv_dims = {5, 4};
    spec.head_dims = {3, 2};
    spec.use_bias = use_bias;
    return spec;
}

/// Gives every zero bias a random value so that bias paths are exercised.
inline void randomize_biases(Model& model, Rng& rng) {
    for (Parameter* p : model.parameters())
        if (p->value.rows() == 1) p->value = random_matrix(1, p->value.cols(), rng, 0.3);
}

/// Worst relative error of model_backward against central differences over
/// every parameter and every input table, for the probe loss sum(C * logits).
inline double model_gradient_error(Model& model, BatchedGraph& batch, Rng& rng) {
    const Matrix probe = random_matrix(batch.node_count(), model.spec().head_dims.back(), rng);
    auto loss = [&] { return dot(model_logits(model, batch), probe); };

    model.zero_grad();
    const auto fwd = model_forward(model, batch);
    const auto input_grads = model_backward(model, batch, fwd.cache, probe, true);

    double worst = 0.0;
    for (Parameter* p : model.parameters()) worst = std::max(worst, fd_check(p->value, p->grad, loss));
    for (std::size_t k = 0; k < kNodeKindCount; ++k) {
        if (batch.kind_features[k].empty()) continue;
        worst = std::max(worst, fd_check(batch.kind_features[k], input_grads.by_kind[k], loss));
    }
    return worst;
}

/// Synthetic dataset with the acceptance-test shape.
inline Dataset synthetic_dataset(std::size_t train, std::size_t dev, double noise, std::uint64_t seed = 7,
                                 FeatureDims dims = {}) {
    SyntheticSpec spec;
    spec.n_questions = train + dev;
    spec.dev_questions = dev;
    spec.noise_scale = noise;
    spec.seed = seed;
    spec.dims = dims;
    return generate_synthetic(spec).to_dataset();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        const auto ticks = std::chrono::steady_clock::now().time_since_epoch().count();
        m_path = std::filesystem::temp_directory_path() / ("mmgr_" + tag + "_" + std::to_string(ticks));
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return m_path; }
    std::filesystem::path operator/(const std::string& name) const { return m_path / name; }

private:
    std::filesystem::path m_path;
};

}  // namespace mmgr::testing
