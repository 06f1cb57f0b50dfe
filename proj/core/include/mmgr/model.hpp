#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmgr/graph.hpp"
#include "mmgr/layers.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/types.hpp"

namespace mmgr {

/// Architecture description. The defaults are the reference stack: five
/// graph convolutions (2048, 1024, 512, 256, 128) followed by
/// Linear 128→128, ReLU, Linear 128→64, ReLU, Linear 64→2. The first graph
/// layer takes per-NodeKind input widths derived from the topology and the
/// feature dims ("lazy" input width).
struct ModelSpec {
    Topology topology = Topology::Star;
    bool gated = false;
    bool use_bias = true;
    FeatureDims feature_dims{};
    std::vector<std::size_t> conv_dims{2048, 1024, 512, 256, 128};
    /// Output widths of the head's Linear layers; ReLU sits between them.
    std::vector<std::size_t> head_dims{128, 64, 2};
    std::string concat_order{kConcatOrder};

    static ModelSpec reference(Topology topology, bool gated, FeatureDims dims = {});

    std::array<std::size_t, kNodeKindCount> input_dims() const;
    /// Full layer list including ReLUs.
    std::vector<LayerSpec> layers() const;
    /// ConfigError when dims do not chain or the head does not end in 2.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

class Model {
public:
    Model() = default;
    /// Weights ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)) drawn in declaration
    /// order from `rng`; biases zero.
    Model(const ModelSpec& spec, Rng& rng);

    const ModelSpec& spec() const noexcept { return m_spec; }
    Topology topology() const noexcept { return m_spec.topology; }

    std::vector<GraphConv>& convs() noexcept { return m_convs; }
    const std::vector<GraphConv>& convs() const noexcept { return m_convs; }
    std::vector<Linear>& head() noexcept { return m_head; }
    const std::vector<Linear>& head() const noexcept { return m_head; }

    /// Parameters in declaration order (the checkpoint order).
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

    void zero_grad();

    /// Incremented whenever parameter values change through the optimizer or
    /// a load; forward caches remember the version they were built against.
    std::uint64_t version() const noexcept { return m_version; }
    void bump_version() noexcept { ++m_version; }

private:
    ModelSpec m_spec;
    std::vector<GraphConv> m_convs;
    std::vector<Linear> m_head;
    std::uint64_t m_version = 0;
};

Model init_model(const ModelSpec& spec, Rng& rng);

/// Activations retained for model_backward.
struct ForwardCache {
    std::uint64_t model_version = 0;
    std::size_t node_count = 0;
    const BatchedGraph* batch = nullptr;
    /// conv_inputs[l] is the input of conv layer l for l >= 1 (layer 0 reads
    /// the batch's per-kind tables).
    std::vector<Matrix> conv_inputs;
    std::vector<GraphConv::Cache> conv_caches;
    /// head_inputs[l] is the input of head Linear l (post-ReLU for l >= 1);
    /// head_preact[l] the output of Linear l before its ReLU.
    std::vector<Matrix> head_inputs;
    std::vector<Matrix> head_preact;
};

struct ForwardResult {
    Matrix logits;
    ForwardCache cache;
};

/// Applies the classifier head (Linear, ReLU, ..., Linear) to node
/// representations of width head input.
Matrix head_forward(const Model& model, const Matrix& x);

/// ConfigError when the batch topology differs from the model's.
ForwardResult model_forward(const Model& model, const BatchedGraph& batch);
/// Inference-only forward without retaining activations.
Matrix model_logits(const Model& model, const BatchedGraph& batch);

/// Gradients of the per-kind input tables.
struct InputGradients {
    std::array<Matrix, kNodeKindCount> by_kind;
};

/// Accumulates dL/dθ into every Parameter::grad (call zero_grad first for
/// fresh gradients). InternalError if the cache is stale or belongs to
/// another batch.
InputGradients model_backward(Model& model, const BatchedGraph& batch, const ForwardCache& cache,
                              const Matrix& dlogits, bool want_input_grads = false);

/// Number of model_forward / model_logits calls made by this process.
std::uint64_t model_forward_calls() noexcept;

}  // namespace mmgr
