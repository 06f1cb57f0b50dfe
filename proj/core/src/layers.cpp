#include "mmgr/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

Parameter make_bias(const std::string& name, std::size_t out_dim, bool use_bias) {
    if (!use_bias) return Parameter(name, Matrix(), false);
    return Parameter(name, Matrix(1, out_dim));
}

void add_bias_rows(Matrix& y, const Parameter& bias) {
    if (bias.value.empty()) return;
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias.value(0, c);
    }
}

void push_if_present(std::vector<Parameter*>& out, Parameter& p) {
    if (!p.value.empty()) out.push_back(&p);
}

void push_if_present(std::vector<const Parameter*>& out, const Parameter& p) {
    if (!p.value.empty()) out.push_back(&p);
}

}  // namespace

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::GraphConvSage: return "GraphConvSage";
        case LayerKind::GraphConvGated: return "GraphConvGated";
        case LayerKind::Linear: return "Linear";
        case LayerKind::ReLU: return "ReLU";
    }
    return "unknown";
}

Matrix init_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Matrix w(fan_in, fan_out);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    return w;
}

GraphConv::GraphConv(const LayerSpec& spec, bool use_bias, Rng& rng, const std::string& name)
    : m_spec(spec), m_use_bias(use_bias), m_name(name) {
    if (spec.kind != LayerKind::GraphConvSage && spec.kind != LayerKind::GraphConvGated)
        throw ConfigError(name + ": not a graph convolution spec");
    if (spec.out_dim == 0) throw ConfigError(name + ": out_dim must be positive");

    auto make = [&](std::size_t in_dim, const std::string& prefix) {
        const std::size_t out = spec.out_dim;
        Weights w;
        w.w1 = Parameter(prefix + ".w1", init_uniform(in_dim, out, rng));
        w.b1 = make_bias(prefix + ".b1", out, use_bias);
        w.w2 = Parameter(prefix + ".w2", init_uniform(in_dim, out, rng));
        w.b2 = make_bias(prefix + ".b2", out, use_bias);
        if (spec.kind == LayerKind::GraphConvGated) {
            w.w3 = Parameter(prefix + ".w3", init_uniform(in_dim, out, rng));
            w.b3 = make_bias(prefix + ".b3", out, use_bias);
            w.w4 = Parameter(prefix + ".w4", init_uniform(in_dim, out, rng));
        }
        return w;
    };

    if (spec.kind_in_dims) {
        m_weights.resize(kNodeKindCount);
        for (NodeKind k : kAllNodeKinds) {
            const std::size_t in = (*spec.kind_in_dims)[index_of(k)];
            if (in > 0) m_weights[index_of(k)] = make(in, name + "." + std::string(to_string(k)));
        }
    } else {
        if (spec.in_dim == 0) throw ConfigError(name + ": in_dim must be positive");
        m_weights.push_back(make(spec.in_dim, name));
    }
}

void GraphConv::check_input(const BatchedGraph& batch, NodeInput x) const {
    if (per_kind()) {
        if (!x.by_kind) throw ShapeError(m_name + ": heterogeneous layer expects per-kind input");
        for (NodeKind k : kAllNodeKinds) {
            const Matrix& xk = (*x.by_kind)[index_of(k)];
            if (xk.rows() != batch.kind_nodes[index_of(k)].size())
                throw ShapeError(m_name + ": row count mismatch for node kind " + std::string(to_string(k)));
            if (xk.rows() == 0) continue;
            const auto& w = m_weights[index_of(k)];
            if (!w) {
                throw ShapeError(m_name + ": no weights for node kind " + std::string(to_string(k)) +
                                 " in this topology");
            }
            if (xk.cols() != w->w1.value.rows()) {
                throw ShapeError(m_name + ": node kind " + std::string(to_string(k)) + " has input " +
                                 xk.shape_string() + ", layer expects width " + std::to_string(w->w1.value.rows()));
            }
        }
    } else {
        if (!x.shared) throw ShapeError(m_name + ": expects a shared-width input table");
        if (x.shared->rows() != batch.node_count() || x.shared->cols() != m_weights[0]->w1.value.rows()) {
            throw ShapeError(m_name + ": input " + x.shared->shape_string() + " does not match " +
                             std::to_string(batch.node_count()) + " nodes of width " +
                             std::to_string(m_weights[0]->w1.value.rows()));
        }
    }
}

Matrix GraphConv::project(const BatchedGraph& batch, NodeInput x, Parameter Weights::*w, Parameter Weights::*b) const {
    if (!per_kind()) {
        Matrix y = matmul(*x.shared, ((*m_weights[0]).*w).value);
        if (b) add_bias_rows(y, (*m_weights[0]).*b);
        return y;
    }
    Matrix y(batch.node_count(), out_dim());
    for (NodeKind k : kAllNodeKinds) {
        const std::size_t ki = index_of(k);
        const Matrix& xk = (*x.by_kind)[ki];
        if (xk.rows() == 0) continue;
        Matrix yk = matmul(xk, ((*m_weights[ki]).*w).value);
        if (b) add_bias_rows(yk, (*m_weights[ki]).*b);
        const auto& nodes = batch.kind_nodes[ki];
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            auto src = yk.row(r);
            std::copy(src.begin(), src.end(), y.row(nodes[r]).begin());
        }
    }
    return y;
}

void GraphConv::project_backward(const BatchedGraph& batch, NodeInput x, Parameter Weights::*w,
                                 Parameter Weights::*b, const Matrix& dy, NodeInputGrad* input_grad) {
    auto apply = [&](Weights& wt, const Matrix& xin, const Matrix& dyk, Matrix* dx) {
        Parameter& weight = wt.*w;
        matmul_tn_accumulate(weight.grad, xin, dyk);
        if (b && !(wt.*b).value.empty()) add_inplace((wt.*b).grad, column_sum(dyk));
        if (dx) {
            if (dx->empty()) *dx = Matrix(xin.rows(), xin.cols());
            add_inplace(*dx, matmul_nt(dyk, weight.value));
        }
    };

    if (!per_kind()) {
        apply(*m_weights[0], *x.shared, dy, input_grad ? &input_grad->shared : nullptr);
        return;
    }
    for (NodeKind k : kAllNodeKinds) {
        const std::size_t ki = index_of(k);
        const Matrix& xk = (*x.by_kind)[ki];
        if (xk.rows() == 0) continue;
        const auto& nodes = batch.kind_nodes[ki];
        Matrix dyk(nodes.size(), out_dim());
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            auto src = dy.row(nodes[r]);
            std::copy(src.begin(), src.end(), dyk.row(r).begin());
        }
        apply(*m_weights[ki], xk, dyk, input_grad ? &input_grad->by_kind[ki] : nullptr);
    }
}

Matrix GraphConv::forward(const BatchedGraph& batch, NodeInput x, Cache* cache) const {
    check_input(batch, x);
    const std::size_t n = batch.node_count();
    const std::size_t d = out_dim();

    Matrix out = project(batch, x, &Weights::w1, &Weights::b1);
    if (!gated()) {
        std::vector<NeighborSums> plan;
        sage_forward(batch, x, out, plan);
        if (cache) cache->sage = std::move(plan);
        return out;
    }

    Matrix messages = project(batch, x, &Weights::w2, &Weights::b2);
    const Matrix gate_self = project(batch, x, &Weights::w3, &Weights::b3);
    const Matrix gate_neighbor = project(batch, x, &Weights::w4, nullptr);
    Matrix gates(batch.adjacency.size(), d);
    for (std::size_t i = 0; i < n; ++i) {
        auto dst = out.row(i);
        auto gi = gate_self.row(i);
        for (std::size_t p = batch.adjacency_offsets[i]; p < batch.adjacency_offsets[i + 1]; ++p) {
            const auto j = batch.adjacency[p];
            auto gj = gate_neighbor.row(j);
            auto m = messages.row(j);
            auto eta = gates.row(p);
            for (std::size_t c = 0; c < d; ++c) {
                eta[c] = sigmoid(gi[c] + gj[c]);
                dst[c] += eta[c] * m[c];
            }
        }
    }
    if (cache) {
        cache->messages = std::move(messages);
        cache->gates = std::move(gates);
    }
    return out;
}

void GraphConv::backward(const BatchedGraph& batch, NodeInput x, const Cache& cache, const Matrix& dout,
                         NodeInputGrad* input_grad) {
    const std::size_t n = batch.node_count();
    const std::size_t d = out_dim();
    if (dout.rows() != n || dout.cols() != d)
        throw ShapeError(m_name + ": upstream gradient " + dout.shape_string() + " does not match output");
    if (input_grad) {
        if (per_kind()) {
            for (std::size_t k = 0; k < kNodeKindCount; ++k) {
                const Matrix& xk = (*x.by_kind)[k];
                input_grad->by_kind[k] = Matrix(xk.rows(), xk.cols());
            }
        } else {
            input_grad->shared = Matrix(x.shared->rows(), x.shared->cols());
        }
    }

    if (!gated()) {
        if (cache.sage.size() != (per_kind() ? kNodeKindCount : 1))
            throw InternalError(m_name + ": cache does not match the batch");
        project_backward(batch, x, &Weights::w1, &Weights::b1, dout, input_grad);
        sage_backward(batch, x, cache.sage, dout, input_grad);
        return;
    }

    Matrix dmessages(n, d);
    if (cache.gates.rows() != batch.adjacency.size() || cache.messages.rows() != n)
        throw InternalError(m_name + ": cache does not match the batch");
    Matrix dgate_self(n, d);
    Matrix dgate_neighbor(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto g = dout.row(i);
        auto dgs = dgate_self.row(i);
        for (std::size_t p = batch.adjacency_offsets[i]; p < batch.adjacency_offsets[i + 1]; ++p) {
            const auto j = batch.adjacency[p];
            auto eta = cache.gates.row(p);
            auto m = cache.messages.row(j);
            auto dm = dmessages.row(j);
            auto dgn = dgate_neighbor.row(j);
            for (std::size_t c = 0; c < d; ++c) {
                dm[c] += eta[c] * g[c];
                const double dz = g[c] * m[c] * eta[c] * (1.0 - eta[c]);
                dgs[c] += dz;
                dgn[c] += dz;
            }
        }
    }
    project_backward(batch, x, &Weights::w1, &Weights::b1, dout, input_grad);
    project_backward(batch, x, &Weights::w2, &Weights::b2, dmessages, input_grad);
    project_backward(batch, x, &Weights::w3, &Weights::b3, dgate_self, input_grad);
    project_backward(batch, x, &Weights::w4, nullptr, dgate_neighbor, input_grad);
}

namespace {

// Row of node j inside sender table t, or -1 when j belongs to another table.
std::int64_t sender_row(const BatchedGraph& batch, bool per_kind, std::size_t t, std::uint32_t j) {
    if (!per_kind) return j;
    return index_of(batch.kinds[j]) == t ? static_cast<std::int64_t>(batch.kind_row[j]) : -1;
}

double inverse_degree(const BatchedGraph& batch, std::size_t i) {
    return 1.0 / static_cast<double>(batch.degree(i));
}

}  // namespace

void GraphConv::sage_forward(const BatchedGraph& batch, NodeInput x, Matrix& out,
                             std::vector<NeighborSums>& plan) const {
    const std::size_t n = batch.node_count();
    const std::size_t d = out_dim();
    const std::size_t tables = per_kind() ? kNodeKindCount : 1;
    plan.assign(tables, {});
    std::vector<std::uint32_t> key;

    for (std::size_t t = 0; t < tables; ++t) {
        const Matrix& xt = per_kind() ? (*x.by_kind)[t] : *x.shared;
        if (xt.rows() == 0) continue;
        const Weights& w = *m_weights[t];
        NeighborSums& ns = plan[t];

        ns.group_of.assign(n, -1);
        std::map<std::vector<std::uint32_t>, std::int32_t> groups;
        for (std::size_t i = 0; i < n; ++i) {
            key.clear();
            for (auto j : batch.neighbors(i)) {
                const auto r = sender_row(batch, per_kind(), t, j);
                if (r >= 0) key.push_back(static_cast<std::uint32_t>(r));
            }
            if (key.empty()) continue;
            std::sort(key.begin(), key.end());
            auto [it, inserted] = groups.try_emplace(key, static_cast<std::int32_t>(ns.members.size()));
            if (inserted) ns.members.push_back(key);
            ns.group_of[i] = it->second;
        }
        ns.grouped = ns.members.size() < xt.rows();

        if (ns.grouped) {
            ns.sums = Matrix(ns.members.size(), xt.cols());
            for (std::size_t g = 0; g < ns.members.size(); ++g) {
                auto dst = ns.sums.row(g);
                for (auto r : ns.members[g]) {
                    auto src = xt.row(r);
                    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                }
            }
            const Matrix m = matmul(ns.sums, w.w2.value);
            const bool bias = !w.b2.value.empty();
            for (std::size_t i = 0; i < n; ++i) {
                const auto g = ns.group_of[i];
                if (g < 0) continue;
                const double inv = inverse_degree(batch, i);
                const double count = static_cast<double>(ns.members[static_cast<std::size_t>(g)].size());
                auto dst = out.row(i);
                auto src = m.row(static_cast<std::size_t>(g));
                for (std::size_t c = 0; c < d; ++c)
                    dst[c] += inv * (src[c] + (bias ? count * w.b2.value(0, c) : 0.0));
            }
            continue;
        }

        Matrix messages = matmul(xt, w.w2.value);
        add_bias_rows(messages, w.b2);
        for (std::size_t i = 0; i < n; ++i) {
            if (ns.group_of[i] < 0) continue;
            const double inv = inverse_degree(batch, i);
            auto dst = out.row(i);
            for (auto j : batch.neighbors(i)) {
                const auto r = sender_row(batch, per_kind(), t, j);
                if (r < 0) continue;
                auto m = messages.row(static_cast<std::size_t>(r));
                for (std::size_t c = 0; c < d; ++c) dst[c] += inv * m[c];
            }
        }
        ns.members.clear();
    }
}

void GraphConv::sage_backward(const BatchedGraph& batch, NodeInput x, const std::vector<NeighborSums>& plan,
                              const Matrix& dout, NodeInputGrad* input_grad) {
    const std::size_t n = batch.node_count();
    const std::size_t d = out_dim();
    for (std::size_t t = 0; t < plan.size(); ++t) {
        const Matrix& xt = per_kind() ? (*x.by_kind)[t] : *x.shared;
        if (xt.rows() == 0) continue;
        Weights& w = *m_weights[t];
        const NeighborSums& ns = plan[t];
        if (ns.group_of.size() != n) throw InternalError(m_name + ": cache does not match the batch");
        Matrix* dx = input_grad ? (per_kind() ? &input_grad->by_kind[t] : &input_grad->shared) : nullptr;

        if (ns.grouped) {
            Matrix dm(ns.members.size(), d);
            for (std::size_t i = 0; i < n; ++i) {
                const auto g = ns.group_of[i];
                if (g < 0) continue;
                const double inv = inverse_degree(batch, i);
                auto dst = dm.row(static_cast<std::size_t>(g));
                auto src = dout.row(i);
                for (std::size_t c = 0; c < d; ++c) dst[c] += inv * src[c];
            }
            matmul_tn_accumulate(w.w2.grad, ns.sums, dm);
            if (!w.b2.value.empty()) {
                for (std::size_t g = 0; g < ns.members.size(); ++g) {
                    const double count = static_cast<double>(ns.members[g].size());
                    auto src = dm.row(g);
                    for (std::size_t c = 0; c < d; ++c) w.b2.grad(0, c) += count * src[c];
                }
            }
            if (dx) {
                const Matrix ds = matmul_nt(dm, w.w2.value);
                for (std::size_t g = 0; g < ns.members.size(); ++g) {
                    auto src = ds.row(g);
                    for (auto r : ns.members[g]) {
                        auto dst = dx->row(r);
                        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                    }
                }
            }
            continue;
        }

        Matrix dmessages(xt.rows(), d);
        for (std::size_t i = 0; i < n; ++i) {
            if (ns.group_of[i] < 0) continue;
            const double inv = inverse_degree(batch, i);
            auto g = dout.row(i);
            for (auto j : batch.neighbors(i)) {
                const auto r = sender_row(batch, per_kind(), t, j);
                if (r < 0) continue;
                auto dst = dmessages.row(static_cast<std::size_t>(r));
                for (std::size_t c = 0; c < d; ++c) dst[c] += inv * g[c];
            }
        }
        matmul_tn_accumulate(w.w2.grad, xt, dmessages);
        if (!w.b2.value.empty()) add_inplace(w.b2.grad, column_sum(dmessages));
        if (dx) add_inplace(*dx, matmul_nt(dmessages, w.w2.value));
    }
}

void GraphConv::collect(std::vector<Parameter*>& out) {
    for (auto& w : m_weights) {
        if (!w) continue;
        for (Parameter* p : {&w->w1, &w->b1, &w->w2, &w->b2, &w->w3, &w->b3, &w->w4}) push_if_present(out, *p);
    }
}

void GraphConv::collect(std::vector<const Parameter*>& out) const {
    for (const auto& w : m_weights) {
        if (!w) continue;
        for (const Parameter* p : {&w->w1, &w->b1, &w->w2, &w->b2, &w->w3, &w->b3, &w->w4})
            push_if_present(out, *p);
    }
}

Linear::Linear(std::size_t in_dim, std::size_t out_dim, bool use_bias, Rng& rng, const std::string& name)
    : m_weight(name + ".weight", init_uniform(in_dim, out_dim, rng)),
      m_bias(make_bias(name + ".bias", out_dim, use_bias)) {
    if (in_dim == 0 || out_dim == 0) throw ConfigError(name + ": dims must be positive");
}

Matrix Linear::forward(const Matrix& x) const {
    if (x.cols() != in_dim())
        throw ShapeError("linear: input " + x.shape_string() + " vs weight " + m_weight.value.shape_string());
    Matrix y = matmul(x, m_weight.value);
    add_bias_rows(y, m_bias);
    return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
    matmul_tn_accumulate(m_weight.grad, x, dy);
    if (!m_bias.value.empty()) add_inplace(m_bias.grad, column_sum(dy));
    return matmul_nt(dy, m_weight.value);
}

void Linear::collect(std::vector<Parameter*>& out) {
    push_if_present(out, m_weight);
    push_if_present(out, m_bias);
}

void Linear::collect(std::vector<const Parameter*>& out) const {
    push_if_present(out, m_weight);
    push_if_present(out, m_bias);
}

}  // namespace mmgr
