#include <benchmark/benchmark.h>

#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace {

mmgr::Matrix filled(std::size_t r, std::size_t c, mmgr::Rng& rng) {
    mmgr::Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

// Node rows times a layer's weight matrix, at the reference layer widths.
void BM_Matmul(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto inner = static_cast<std::size_t>(state.range(1));
    const auto cols = static_cast<std::size_t>(state.range(2));
    mmgr::Rng rng(1);
    const auto a = filled(rows, inner, rng);
    const auto b = filled(inner, cols, rng);
    for (auto _ : state) benchmark::DoNotOptimize(mmgr::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * inner * cols));
}
BENCHMARK(BM_Matmul)
    ->Args({51, 2816, 2048})
    ->Args({51, 2048, 1024})
    ->Args({51, 1024, 512})
    ->Args({8, 8, 8})
    ->Unit(benchmark::kMicrosecond);

void BM_MatmulTn(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    mmgr::Rng rng(2);
    const auto a = filled(rows, 1024, rng);
    const auto b = filled(rows, 512, rng);
    for (auto _ : state) benchmark::DoNotOptimize(mmgr::matmul_tn(a, b));
}
BENCHMARK(BM_MatmulTn)->Arg(51)->Arg(320)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxRows(benchmark::State& state) {
    mmgr::Rng rng(3);
    const auto x = filled(static_cast<std::size_t>(state.range(0)), 2, rng);
    for (auto _ : state) benchmark::DoNotOptimize(mmgr::softmax_rows(x));
}
BENCHMARK(BM_SoftmaxRows)->Arg(320)->Arg(4096);

}  // namespace
