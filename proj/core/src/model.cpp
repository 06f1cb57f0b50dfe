#include "mmgr/model.hpp"

#include <atomic>

#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

std::atomic<std::uint64_t> g_forward_calls{0};

}  // namespace

ModelSpec ModelSpec::reference(Topology topology, bool gated, FeatureDims dims) {
    ModelSpec spec;
    spec.topology = topology;
    spec.gated = gated;
    spec.feature_dims = dims;
    return spec;
}

std::array<std::size_t, kNodeKindCount> ModelSpec::input_dims() const {
    std::array<std::size_t, kNodeKindCount> dims{};
    for (NodeKind k : kAllNodeKinds) dims[index_of(k)] = node_input_dim(topology, k, feature_dims);
    return dims;
}

std::vector<LayerSpec> ModelSpec::layers() const {
    std::vector<LayerSpec> out;
    const LayerKind conv_kind = gated ? LayerKind::GraphConvGated : LayerKind::GraphConvSage;
    std::size_t prev = 0;
    for (std::size_t l = 0; l < conv_dims.size(); ++l) {
        LayerSpec s;
        s.kind = conv_kind;
        s.out_dim = conv_dims[l];
        if (l == 0) {
            s.kind_in_dims = input_dims();
        } else {
            s.in_dim = prev;
        }
        out.push_back(s);
        prev = conv_dims[l];
    }
    for (std::size_t l = 0; l < head_dims.size(); ++l) {
        out.push_back(LayerSpec{LayerKind::Linear, prev, std::nullopt, head_dims[l]});
        prev = head_dims[l];
        if (l + 1 < head_dims.size()) out.push_back(LayerSpec{LayerKind::ReLU, prev, std::nullopt, prev});
    }
    return out;
}

void ModelSpec::validate() const {
    if (conv_dims.empty()) throw ConfigError("model: at least one graph convolution is required");
    if (head_dims.empty() || head_dims.back() != 2) throw ConfigError("model: head must end in 2 logits");
    for (auto d : conv_dims)
        if (d == 0) throw ConfigError("model: graph convolution widths must be positive");
    for (auto d : head_dims)
        if (d == 0) throw ConfigError("model: head widths must be positive");
    if (feature_dims.text == 0 || feature_dims.image == 0) throw ConfigError("model: feature dims must be positive");
}

Model::Model(const ModelSpec& spec, Rng& rng) : m_spec(spec) {
    spec.validate();
    const auto layers = spec.layers();
    std::size_t conv = 0;
    std::size_t lin = 0;
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerKind::GraphConvSage:
            case LayerKind::GraphConvGated:
                m_convs.emplace_back(l, spec.use_bias, rng, "conv" + std::to_string(conv++));
                break;
            case LayerKind::Linear:
                m_head.emplace_back(l.in_dim, l.out_dim, spec.use_bias, rng, "head" + std::to_string(lin++));
                break;
            case LayerKind::ReLU:
                break;
        }
    }
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (auto& c : m_convs) c.collect(out);
    for (auto& h : m_head) h.collect(out);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& c : m_convs) c.collect(out);
    for (const auto& h : m_head) h.collect(out);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
}

void Model::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

Model init_model(const ModelSpec& spec, Rng& rng) { return Model(spec, rng); }

Matrix head_forward(const Model& model, const Matrix& x) {
    Matrix h = x;
    const auto& head = model.head();
    for (std::size_t l = 0; l < head.size(); ++l) {
        h = head[l].forward(h);
        if (l + 1 < head.size()) h = relu(h);
    }
    return h;
}

ForwardResult model_forward(const Model& model, const BatchedGraph& batch) {
    if (batch.topology != model.topology()) {
        throw ConfigError("model is " + std::string(to_string(model.topology())) + " but the batch is " +
                          std::string(to_string(batch.topology)));
    }
    g_forward_calls.fetch_add(1, std::memory_order_relaxed);

    ForwardResult result;
    ForwardCache& cache = result.cache;
    cache.model_version = model.version();
    cache.node_count = batch.node_count();
    cache.batch = &batch;

    const auto& convs = model.convs();
    cache.conv_inputs.resize(convs.size());
    cache.conv_caches.resize(convs.size());
    Matrix h;
    for (std::size_t l = 0; l < convs.size(); ++l) {
        const NodeInput in = l == 0 ? NodeInput::per_kind(batch) : NodeInput::of(cache.conv_inputs[l]);
        h = convs[l].forward(batch, in, &cache.conv_caches[l]);
        if (l + 1 < convs.size()) cache.conv_inputs[l + 1] = std::move(h);
    }

    const auto& head = model.head();
    cache.head_inputs.resize(head.size());
    cache.head_preact.resize(head.size());
    cache.head_inputs[0] = std::move(h);
    for (std::size_t l = 0; l < head.size(); ++l) {
        cache.head_preact[l] = head[l].forward(cache.head_inputs[l]);
        if (l + 1 < head.size()) cache.head_inputs[l + 1] = relu(cache.head_preact[l]);
    }
    result.logits = cache.head_preact.back();
    return result;
}

Matrix model_logits(const Model& model, const BatchedGraph& batch) {
    if (batch.topology != model.topology()) {
        throw ConfigError("model is " + std::string(to_string(model.topology())) + " but the batch is " +
                          std::string(to_string(batch.topology)));
    }
    g_forward_calls.fetch_add(1, std::memory_order_relaxed);
    const auto& convs = model.convs();
    Matrix h;
    for (std::size_t l = 0; l < convs.size(); ++l) {
        const NodeInput in = l == 0 ? NodeInput::per_kind(batch) : NodeInput::of(h);
        h = convs[l].forward(batch, in, nullptr);
    }
    return head_forward(model, h);
}

InputGradients model_backward(Model& model, const BatchedGraph& batch, const ForwardCache& cache,
                              const Matrix& dlogits, bool want_input_grads) {
    if (cache.model_version != model.version())
        throw InternalError("model_backward: stale forward cache (parameters changed since the forward pass)");
    if (cache.batch != &batch || cache.node_count != batch.node_count())
        throw InternalError("model_backward: forward cache belongs to a different batch");
    if (dlogits.rows() != batch.node_count() || dlogits.cols() != model.spec().head_dims.back())
        throw ShapeError("model_backward: dlogits " + dlogits.shape_string() + " does not match logits");

    auto& head = model.head();
    Matrix g = dlogits;
    for (std::size_t l = head.size(); l-- > 0;) {
        if (l + 1 < head.size()) g = relu_backward(cache.head_preact[l], g);
        g = head[l].backward(cache.head_inputs[l], g);
    }

    auto& convs = model.convs();
    InputGradients out;
    for (std::size_t l = convs.size(); l-- > 0;) {
        NodeInputGrad dx;
        if (l > 0) {
            convs[l].backward(batch, NodeInput::of(cache.conv_inputs[l]), cache.conv_caches[l], g, &dx);
            g = std::move(dx.shared);
        } else {
            convs[0].backward(batch, NodeInput::per_kind(batch), cache.conv_caches[0], g,
                              want_input_grads ? &dx : nullptr);
            if (want_input_grads) out.by_kind = std::move(dx.by_kind);
        }
    }
    return out;
}

std::uint64_t model_forward_calls() noexcept { return g_forward_calls.load(std::memory_order_relaxed); }

}  // namespace mmgr
