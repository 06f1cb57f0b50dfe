#include <benchmark/benchmark.h>

#include "mmgr/bench.hpp"
#include "mmgr/model.hpp"
#include "mmgr/training.hpp"

namespace {

// Inference over one star graph with range(0) sources, reference model.
void BM_StarForward(benchmark::State& state) {
    const bool gated = state.range(1) != 0;
    mmgr::Rng rng(1);
    const mmgr::Model model(mmgr::ModelSpec::reference(mmgr::Topology::Star, gated), rng);
    const auto graph = mmgr::random_star_graph(static_cast<std::size_t>(state.range(0)), {}, 2);
    const auto batch = mmgr::batch_graphs(std::span<const mmgr::QuestionGraph>(&graph, 1));
    for (auto _ : state) benchmark::DoNotOptimize(mmgr::model_logits(model, batch));
    state.SetLabel(gated ? "gated" : "sage");
}
BENCHMARK(BM_StarForward)->Args({10, 0})->Args({50, 0})->Args({50, 1})->Unit(benchmark::kMillisecond);

// One optimizer step on a 32-question batch of 10-source star graphs.
void BM_TrainStep(benchmark::State& state) {
    const bool gated = state.range(0) != 0;
    mmgr::Rng rng(3);
    mmgr::Model model(mmgr::ModelSpec::reference(mmgr::Topology::Star, gated), rng);
    std::vector<mmgr::QuestionGraph> graphs;
    for (std::uint64_t i = 0; i < 32; ++i) graphs.push_back(mmgr::random_star_graph(10, {}, 10 + i));
    auto batch = mmgr::batch_graphs(graphs);
    for (std::size_t n = 0; n < batch.node_count(); ++n) batch.labels[n] = n % 5 == 0 ? 1 : 0;
    const mmgr::TrainConfig config;
    mmgr::TrainState opt;
    auto params = model.parameters();
    for (auto _ : state) {
        model.zero_grad();
        const auto fwd = mmgr::model_forward(model, batch);
        const auto loss = mmgr::weighted_ce(fwd.logits, batch.labels, batch.has_label, config.class_weights);
        mmgr::model_backward(model, batch, fwd.cache, loss.dlogits);
        mmgr::adamw_step(params, opt, config.base_lr, config.adamw);
        model.bump_version();
    }
    state.SetLabel(gated ? "gated" : "sage");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
