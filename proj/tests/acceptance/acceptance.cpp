// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmgr/checkpoint.hpp"
#include "mmgr/bench.hpp"
#include "mmgr/errors.hpp"
#include "mmgr/feature_store.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/synthetic.hpp"
#include "mmgr/training.hpp"
#include "support.hpp"

using namespace mmgr;
using namespace mmgr::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// ---- gradients -------------------------------------------------------------

double layer_error(GraphConv& layer, BatchedGraph& batch, Rng& rng) {
    const NodeInput in = NodeInput::per_kind(batch);
    const Matrix probe = random_matrix(batch.node_count(), layer.out_dim(), rng);
    auto loss = [&] { return dot(layer.forward(batch, in, nullptr), probe); };
    std::vector<Parameter*> params;
    layer.collect(params);
    for (Parameter* p : params) p->zero_grad();
    GraphConv::Cache cache;
    (void)layer.forward(batch, in, &cache);
    NodeInputGrad dx;
    layer.backward(batch, in, cache, probe, &dx);
    double worst = 0.0;
    for (Parameter* p : params) worst = std::max(worst, fd_check(p->value, p->grad, loss));
    for (std::size_t k = 0; k < kNodeKindCount; ++k)
        if (!batch.kind_features[k].empty())
            worst = std::max(worst, fd_check(batch.kind_features[k], dx.by_kind[k], loss));
    return worst;
}

LayerSpec first_layer(LayerKind kind, const FeatureDims& dims, std::size_t out) {
    LayerSpec s;
    s.kind = kind;
    s.kind_in_dims = std::array<std::size_t, kNodeKindCount>{};
    for (NodeKind k : kAllNodeKinds) (*s.kind_in_dims)[index_of(k)] = node_input_dim(Topology::Star, k, dims);
    s.out_dim = out;
    return s;
}

void randomize(std::vector<Parameter*> params, Rng& rng) {
    for (Parameter* p : params) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.5);
}

double head_error(Rng& rng) {
    Linear a(5, 4, true, rng, "a");
    Linear b(4, 2, true, rng, "b");
    randomize({&a.weight(), &a.bias(), &b.weight(), &b.bias()}, rng);
    Matrix x = random_matrix(6, 5, rng);
    const Matrix probe = random_matrix(6, 2, rng);
    auto loss = [&] { return dot(b.forward(relu(a.forward(x))), probe); };
    for (Parameter* p : {&a.weight(), &a.bias(), &b.weight(), &b.bias()}) p->zero_grad();
    const Matrix h = a.forward(x);
    const Matrix dh = b.backward(relu(h), probe);
    const Matrix dx = a.backward(x, relu_backward(h, dh));
    double worst = fd_check(x, dx, loss);
    for (Parameter* p : {&a.weight(), &a.bias(), &b.weight(), &b.bias()})
        worst = std::max(worst, fd_check(p->value, p->grad, loss));
    return worst;
}

double loss_error(Rng& rng) {
    Matrix logits = random_matrix(6, 2, rng, 2.0);
    std::vector<int> labels(6);
    std::vector<std::uint8_t> mask(6, 1);
    mask[0] = 0;
    for (auto& l : labels) l = static_cast<int>(rng.below(2));
    const std::array<double, 2> w{1.0, 10.0};
    const auto r = weighted_ce(logits, labels, mask, w);
    return fd_check(logits, r.dlogits, [&] { return weighted_ce(logits, labels, mask, w).loss; });
}

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    const FeatureDims dims{3, 3};
    double sage = 0.0, gated = 0.0, model = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<QuestionGraph> graphs{star_graph(5, dims, rng, "a"), star_graph(2, dims, rng, "b")};
        auto batch = batch_graphs(graphs);
        for (LayerKind kind : {LayerKind::GraphConvSage, LayerKind::GraphConvGated}) {
            GraphConv layer(first_layer(kind, dims, 4), true, rng, "conv");
            std::vector<Parameter*> params;
            layer.collect(params);
            randomize(params, rng);
            (kind == LayerKind::GraphConvSage ? sage : gated) =
                std::max(kind == LayerKind::GraphConvSage ? sage : gated, layer_error(layer, batch, rng));
        }
        for (bool g : {false, true}) {
            Model m(small_spec(Topology::Star, g), rng);
            randomize_biases(m, rng);
            model = std::max(model, model_gradient_error(m, batch, rng));
        }
    }
    const double head = head_error(rng);
    const double ce = loss_error(rng);
    const double worst = std::max({sage, gated, head, ce, model});
    const double secs = seconds_since(t0);
    return {worst < 1e-3 && secs < 60.0,
            "max rel err sage " + fmt("%.1e", sage) + ", gated " + fmt("%.1e", gated) + ", head " + fmt("%.1e", head) +
                ", weighted_ce " + fmt("%.1e", ce) + ", 2-layer star model " + fmt("%.1e", model) + " (< 1e-3); " +
                fmt("%.1f", secs) + " s (< 60 s)"};
}

// ---- metrics ---------------------------------------------------------------

Outcome metric_oracle() {
    Rng rng(99);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        const double pos = rng.uniform01();
        ConfusionCounts c;
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int y = rng.uniform01() < pos ? 1 : 0;
            const int p = rng.uniform01() < 0.5 ? y : 1 - y;
            c.add(y, p);
            if (y == 1 && p == 1) tp += 1;
            if (y == 0 && p == 1) fp += 1;
            if (y == 1 && p == 0) fn += 1;
        }
        const double prec = tp + fp == 0 ? 0.0 : tp / (tp + fp);
        const double rec = tp + fn == 0 ? 0.0 : tp / (tp + fn);
        const double f = prec + rec == 0 ? 0.0 : 2 * prec * rec / (prec + rec);
        const Prf got = f1(c);
        if (got.precision != prec || got.recall != rec || got.f1 != f) ++mismatches;
    }
    ConfusionCounts zero;
    ConfusionCounts only_fn;
    only_fn.fn = 3;
    ConfusionCounts only_tn;
    only_tn.tn = 4;
    bool degenerate = true;
    for (const auto& c : {zero, only_fn, only_tn}) {
        const Prf r = f1(c);
        degenerate = degenerate && r.precision == 0.0 && r.recall == 0.0 && r.f1 == 0.0;
    }
    return {mismatches == 0 && degenerate, std::to_string(mismatches) + " mismatches in 1000 vectors (exact); 0/0 cases " +
                                               (degenerate ? "return 0" : "do not return 0")};
}

// ---- topology ---------------------------------------------------------------

Outcome topology_invariants() {
    std::size_t bad = 0;
    for (std::size_t n = 1; n <= 64; ++n) {
        SyntheticSpec spec;
        spec.n_questions = 1;
        spec.sources_per_question = n;
        spec.positives_per_question = 1;
        spec.dims = {4, 6};
        spec.seed = n;
        const Dataset ds = generate_synthetic(spec).to_dataset();
        const auto dense = build_dense_graph(ds.train[0], ds.features, spec.dims);
        const auto star = build_star_graph(ds.train[0], ds.features, spec.dims);
        bool ok = dense.edges.size() == n * (n - 1) / 2 && star.edges.size() == n && star.nodes.size() == n + 1;
        for (auto [a, b] : star.edges) ok = ok && ((a == 0) != (b == 0));
        try {
            validate_graph(dense);
            validate_graph(star);
        } catch (const Error&) {
            ok = false;
        }
        bad += ok ? 0 : 1;
    }
    return {bad == 0, "dense n(n-1)/2 and star n question-incident edges for n = 1..64; " + std::to_string(bad) +
                          " violations"};
}

// ---- multihop ---------------------------------------------------------------

double multihop_delta(std::size_t graph_layers, std::uint64_t seed) {
    const FeatureDims dims{16, 24};
    Rng rng(seed);
    ModelSpec spec = ModelSpec::reference(Topology::Star, false, dims);
    spec.conv_dims = graph_layers == 1 ? std::vector<std::size_t>{8} : std::vector<std::size_t>{8, 6};
    spec.head_dims = {4, 2};
    Model model(spec, rng);
    const QuestionGraph g = star_graph(4, dims, rng);
    const auto base = model_logits(model, batch_graphs(std::vector<QuestionGraph>{g}));

    // Source A is node 1, source B is node 2.
    QuestionGraph moved = g;
    auto& fa = moved.nodes[1].features;
    std::vector<double> dir(fa.size());
    double norm = 0.0;
    for (double& d : dir) {
        d = rng.normal();
        norm += d * d;
    }
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] += dir[i] / std::sqrt(norm);
    const auto after = model_logits(model, batch_graphs(std::vector<QuestionGraph>{moved}));
    return std::max(std::abs(after(2, 0) - base(2, 0)), std::abs(after(2, 1) - base(2, 1)));
}

Outcome multihop() {
    const double two = multihop_delta(2, 5);
    const double one = multihop_delta(1, 5);
    return {two > 1e-8 && one == 0.0,
            "star graph, unit perturbation of source A: max |dlogits(B)| = " + fmt("%.3e", two) +
                " with 2 graph layers (> 1e-8), " + fmt("%.1e", one) + " with 1 (== 0)"};
}

// ---- batching -----------------------------------------------------------------

Outcome batching() {
    Rng rng(31);
    const FeatureDims dims{};
    std::vector<QuestionGraph> graphs;
    for (int i = 0; i < 32; ++i) graphs.push_back(star_graph(1 + rng.below(12), dims, rng, "g" + std::to_string(i)));
    const auto batch = batch_graphs(graphs);
    double worst = 0.0;
    for (bool gated : {false, true}) {
        const Model model(ModelSpec::reference(Topology::Star, gated, dims), rng);
        const Matrix all = model_logits(model, batch);
        for (std::size_t g = 0; g < graphs.size(); ++g) {
            const Matrix one = model_logits(model, batch_graphs(std::span<const QuestionGraph>(&graphs[g], 1)));
            for (std::size_t n = 0; n < one.rows(); ++n)
                for (std::size_t c = 0; c < 2; ++c)
                    worst = std::max(worst, std::abs(one(n, c) - all(batch.node_offsets[g] + n, c)));
        }
    }
    return {worst <= 1e-6, "32 star graphs, reference sage and gated models: max |batched - per-graph| = " +
                               fmt("%.2e", worst) + " (<= 1e-6)"};
}

// ---- learning -----------------------------------------------------------------

Dataset learning_dataset() {
    SyntheticSpec spec;
    spec.n_questions = 300;
    spec.dev_questions = 50;
    spec.test_questions = 50;
    spec.noise_scale = 0.1;
    spec.seed = 7;
    return generate_synthetic(spec).to_dataset();
}

std::vector<std::string> log_lines(const std::vector<EpochLog>& log, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(n, log.size()); ++i) out.push_back(epoch_log_json(log[i], false));
    return out;
}

Outcome learning() {
    const Dataset ds = learning_dataset();
    TrainConfig config;
    config.target_f1 = 0.95;

    struct Run {
        const char* name;
        Topology topology;
        bool gated;
    };
    bool ok = true;
    std::string detail;
    double total = 0.0;
    std::vector<EpochLog> star_log;
    for (const Run& run : {Run{"dense", Topology::Dense, false}, Run{"star", Topology::Star, false},
                           Run{"star-gated", Topology::Star, true}}) {
        const auto t0 = Clock::now();
        const FitResult r = fit(ds, config, run.topology, run.gated);
        const double secs = seconds_since(t0);
        total += secs;
        const double test_f1 = evaluate(r.model, ds, "test").combined.prf.f1;
        ok = ok && r.best_val_f1 >= 0.95 && r.log.size() <= 200;
        detail += std::string(run.name) + " dev F1 " + fmt("%.3f", r.best_val_f1) + " at epoch " +
                  std::to_string(r.best_epoch + 1) + " (test " + fmt("%.3f", test_f1) + ", " + fmt("%.0f", secs) +
                  " s); ";
        if (run.topology == Topology::Star && !run.gated) star_log = r.log;
    }

    TrainConfig rerun = config;
    rerun.epochs = std::min<std::size_t>(2, star_log.size());
    const bool same = log_lines(fit(ds, rerun, Topology::Star, false).log, rerun.epochs) ==
                      log_lines(star_log, rerun.epochs);
    ok = ok && total < 600.0 && same;
    detail += "total " + fmt("%.0f", total) + " s (< 600 s); same-seed rerun " +
              (same ? "reproduces the log" : "DIVERGES");
    return {ok, detail};
}

// ---- imbalance ------------------------------------------------------------------

Outcome imbalance() {
    // Reduced-width star model: six runs at reference width would not fit the
    // suite's time budget.
    std::size_t wins = 0;
    std::string detail = "recall at best-dev-F1 checkpoint, w_pos 10 vs 1:";
    for (std::uint64_t seed : {1, 2, 3}) {
        SyntheticSpec s;
        s.n_questions = 250;
        s.dev_questions = 50;
        s.noise_scale = 0.5;
        s.seed = 100 + seed;
        const Dataset ds = generate_synthetic(s).to_dataset();
        double recall[2];
        for (int weighted = 0; weighted < 2; ++weighted) {
            ModelSpec spec = ModelSpec::reference(Topology::Star, false, ds.meta.dims);
            spec.conv_dims = {64, 32};
            spec.head_dims = {32, 2};
            TrainConfig c;
            c.epochs = 30;
            c.base_lr = 1e-3;
            c.seed = seed;
            c.class_weights = {1.0, weighted ? 10.0 : 1.0};
            const FitResult r = fit(ds, c, spec);
            recall[weighted] = evaluate(r.model, ds, "dev").combined.prf.recall;
        }
        wins += recall[1] >= recall[0] ? 1 : 0;
        detail += " seed " + std::to_string(seed) + " " + fmt("%.2f", recall[1]) + " vs " + fmt("%.2f", recall[0]) + ";";
    }
    detail += " weighted >= unweighted in " + std::to_string(wins) + "/3 (need 2)";
    return {wins >= 2, detail};
}

// ---- single pass ------------------------------------------------------------------

Outcome single_pass() {
    Rng rng(0);
    const Model model(ModelSpec::reference(Topology::Star, false), rng);
    const std::size_t repeat = 50;
    const std::uint64_t before = model_forward_calls();
    const BenchResult r = bench_forward(model, 50, repeat, 0);
    const std::uint64_t calls = model_forward_calls() - before;
    const bool one = calls == repeat && r.forwards_per_graph == 1.0;
    return {one && r.median_ms < 50.0,
            std::to_string(calls) + " forwards for " + std::to_string(repeat) + " scorings of a 50-source graph (" +
                fmt("%.0f", r.forwards_per_graph) + " per graph); median " + fmt("%.1f", r.median_ms) +
                " ms (< 50 ms), min " + fmt("%.1f", r.min_ms) + ", p95 " + fmt("%.1f", r.p95_ms)};
}

// ---- serialization ------------------------------------------------------------------

Outcome serialization() {
    TempDir dir("acceptance");
    Rng rng(12);
    bool params_equal = true;
    bool bytes_equal = true;
    for (bool gated : {false, true}) {
        Model m(ModelSpec::reference(Topology::Star, gated), rng);
        randomize_biases(m, rng);
        save_model(dir / "m.mmgm", m);
        const Model back = load_model(dir / "m.mmgm", Topology::Star);
        const auto a = m.parameters();
        const auto b = back.parameters();
        params_equal = params_equal && a.size() == b.size();
        for (std::size_t i = 0; params_equal && i < a.size(); ++i)
            params_equal = a[i]->value.same_shape(b[i]->value) &&
                           std::memcmp(a[i]->value.data().data(), b[i]->value.data().data(),
                                       a[i]->value.size() * sizeof(double)) == 0;
        bytes_equal = bytes_equal && serialize_model(back) == serialize_model(m);
    }

    FeatureStore store(7);
    for (int i = 0; i < 20; ++i) {
        std::vector<float> row(7);
        for (auto& v : row) v = static_cast<float>(rng.normal() * 1e3);
        store.append("row" + std::to_string(i), row);
    }
    write_store(dir / "s.mmqf", store);
    const FeatureStore back = read_store(dir / "s.mmqf");
    const bool store_equal = back.ids() == store.ids() && back.payload().size() == store.payload().size() &&
                             std::memcmp(back.payload().data(), store.payload().data(),
                                         store.payload().size() * sizeof(float)) == 0;

    bool refused = false;
    try {
        (void)load_model(dir / "m.mmgm", Topology::Dense);
    } catch (const ConfigError&) {
        refused = true;
    }
    const bool ok = params_equal && bytes_equal && store_equal && refused;
    return {ok, std::string("checkpoint ") + (params_equal && bytes_equal ? "bitwise" : "NOT bitwise") +
                    ", store " + (store_equal ? "bitwise" : "NOT bitwise") + ", star checkpoint " +
                    (refused ? "refused" : "ACCEPTED") + " under dense"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradients", gradient_suite}, {"metric-oracle", metric_oracle}, {"topology", topology_invariants},
        {"multihop", multihop},        {"batching", batching},           {"learning", learning},
        {"imbalance", imbalance},      {"single-pass", single_pass},     {"serialization", serialization},
    };
    std::set<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && !only.count(name)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s %-14s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
