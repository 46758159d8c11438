#include <benchmark/benchmark.h>

#include "graphda/diffusion.hpp"
#include "graphda/synth.hpp"

namespace {

graphda::Graph make_graph(std::size_t n) {
  graphda::SbmSpec spec;
  spec.num_nodes = n;
  spec.num_classes = 4;
  spec.intra_prob = 0.04;
  spec.inter_prob = 0.01;
  spec.attr_dim = 32;
  spec.seed = 11;
  return graphda::generate_pair(spec).source;
}

void BM_TransitionMatrix(benchmark::State& state) {
  const auto g = make_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(graphda::transition_matrix(g));
}
BENCHMARK(BM_TransitionMatrix)->Arg(200)->Arg(600);

void BM_DiffuseDense(benchmark::State& state) {
  const auto g = make_graph(static_cast<std::size_t>(state.range(0)));
  const auto t = graphda::transition_matrix(g);
  for (auto _ : state)
    benchmark::DoNotOptimize(graphda::diffuse(t, 0.1));
}
BENCHMARK(BM_DiffuseDense)->Arg(200)->Arg(600);

void BM_DiffuseSeries(benchmark::State& state) {
  const auto g = make_graph(static_cast<std::size_t>(state.range(0)));
  const auto t = graphda::transition_matrix(g);
  for (auto _ : state)
    benchmark::DoNotOptimize(graphda::diffuse_series(t, 0.1, 200));
}
BENCHMARK(BM_DiffuseSeries)->Arg(200);

void BM_SparsifyTopk(benchmark::State& state) {
  const auto g = make_graph(600);
  const auto p = graphda::diffuse(graphda::transition_matrix(g), 0.1);
  for (auto _ : state)
    benchmark::DoNotOptimize(graphda::sparsify_topk(p, 20, 0.1));
}
BENCHMARK(BM_SparsifyTopk);

}  // namespace
