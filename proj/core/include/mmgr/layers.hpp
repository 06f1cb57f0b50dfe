#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmgr/graph.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Matrix v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

    void zero_grad() { grad.fill(0.0); }
};

enum class LayerKind { GraphConvSage, GraphConvGated, Linear, ReLU };

std::string_view to_string(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::Linear;
    /// Shared input width; 0 when the layer takes per-NodeKind inputs.
    std::size_t in_dim = 0;
    /// Per-NodeKind input widths for the heterogeneous first graph layer
    /// (0 for kinds absent from the topology).
    std::optional<std::array<std::size_t, kNodeKindCount>> kind_in_dims;
    std::size_t out_dim = 0;
};

/// Node features entering a graph layer: one table per NodeKind (rows in
/// BatchedGraph::kind_nodes order) or a single shared-width table.
struct NodeInput {
    const std::array<Matrix, kNodeKindCount>* by_kind = nullptr;
    const Matrix* shared = nullptr;

    static NodeInput per_kind(const BatchedGraph& batch) { return {&batch.kind_features, nullptr}; }
    static NodeInput of(const Matrix& x) { return {nullptr, &x}; }
};

/// Gradient with respect to a NodeInput, in the same layout.
struct NodeInputGrad {
    std::array<Matrix, kNodeKindCount> by_kind;
    Matrix shared;
};

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)).
Matrix init_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Graph convolution in either aggregation flavor.
///
///   SAGE:  x'_i = W1 x_i + mean_{j in N(i)} W2 x_j
///   gated: x'_i = W1 x_i + sum_{j in N(i)} eta_ij * (W2 x_j),
///          eta_ij = sigmoid(W3 x_i + W4 x_j)   (elementwise, out_dim wide)
///
/// A heterogeneous layer keeps one weight set per NodeKind and applies the
/// weights of the node a term comes from (project, then aggregate). Each
/// linear map carries a bias when enabled; the gate pre-activation has a
/// single bias on the W3 term. An empty neighborhood contributes zero.
///
/// SAGE uses linearity of the mean: receivers whose neighbor rows within a
/// sender table coincide share one summed input row, projected once. A star
/// batch then projects two rows per graph instead of one per node. The
/// result equals project-then-aggregate up to rounding.
class GraphConv {
public:
    struct Weights {
        Parameter w1, b1, w2, b2, w3, b3, w4;
    };

    /// SAGE neighbor sums for one sender table (a NodeKind table or the
    /// shared table).
    struct NeighborSums {
        bool grouped = false;
        std::vector<std::vector<std::uint32_t>> members;  // sender rows per group
        std::vector<std::int32_t> group_of;               // per receiver, -1 for none
        Matrix sums;                                      // one summed input row per group
    };

    struct Cache {
        Matrix messages;  // gated: W2 x_j + b2 per node
        Matrix gates;     // gated: one row per directed edge in CSR order
        std::vector<NeighborSums> sage;
    };

    GraphConv() = default;
    GraphConv(const LayerSpec& spec, bool use_bias, Rng& rng, const std::string& name);

    const LayerSpec& spec() const noexcept { return m_spec; }
    bool gated() const noexcept { return m_spec.kind == LayerKind::GraphConvGated; }
    bool per_kind() const noexcept { return m_spec.kind_in_dims.has_value(); }
    bool use_bias() const noexcept { return m_use_bias; }
    std::size_t out_dim() const noexcept { return m_spec.out_dim; }

    /// One entry per NodeKind for heterogeneous layers (absent kinds are
    /// nullopt), otherwise a single shared entry.
    std::vector<std::optional<Weights>>& weights() noexcept { return m_weights; }
    const std::vector<std::optional<Weights>>& weights() const noexcept { return m_weights; }

    Matrix forward(const BatchedGraph& batch, NodeInput x, Cache* cache) const;
    /// Accumulates parameter gradients. Fills the input gradient only when
    /// `input_grad` is non-null.
    void backward(const BatchedGraph& batch, NodeInput x, const Cache& cache, const Matrix& dout,
                  NodeInputGrad* input_grad);

    void collect(std::vector<Parameter*>& out);
    void collect(std::vector<const Parameter*>& out) const;

private:
    void check_input(const BatchedGraph& batch, NodeInput x) const;
    Matrix project(const BatchedGraph& batch, NodeInput x, Parameter Weights::*w, Parameter Weights::*b) const;
    void project_backward(const BatchedGraph& batch, NodeInput x, Parameter Weights::*w, Parameter Weights::*b,
                          const Matrix& dy, NodeInputGrad* input_grad);
    void sage_forward(const BatchedGraph& batch, NodeInput x, Matrix& out, std::vector<NeighborSums>& plan) const;
    void sage_backward(const BatchedGraph& batch, NodeInput x, const std::vector<NeighborSums>& plan,
                       const Matrix& dout, NodeInputGrad* input_grad);

    LayerSpec m_spec;
    bool m_use_bias = true;
    std::string m_name;
    std::vector<std::optional<Weights>> m_weights;
};

/// Affine map y = x W + b with W stored in×out.
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in_dim, std::size_t out_dim, bool use_bias, Rng& rng, const std::string& name);

    std::size_t in_dim() const noexcept { return m_weight.value.rows(); }
    std::size_t out_dim() const noexcept { return m_weight.value.cols(); }

    Parameter& weight() noexcept { return m_weight; }
    Parameter& bias() noexcept { return m_bias; }
    const Parameter& weight() const noexcept { return m_weight; }
    const Parameter& bias() const noexcept { return m_bias; }

    Matrix forward(const Matrix& x) const;
    /// Accumulates dW = xᵀ dy, db = colsum(dy); returns dx = dy Wᵀ.
    Matrix backward(const Matrix& x, const Matrix& dy);

    void collect(std::vector<Parameter*>& out);
    void collect(std::vector<const Parameter*>& out) const;

private:
    Parameter m_weight;
    Parameter m_bias;
};

}  // namespace mmgr
