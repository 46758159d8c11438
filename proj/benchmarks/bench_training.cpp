#include <benchmark/benchmark.h>

#include "graphda/synth.hpp"
#include "graphda/trainer.hpp"

namespace {

struct Fixture {
  graphda::SynthPair pair;
  graphda::Graph target;
  graphda::DiffusionMatrix ds, dt;
  graphda::TrainConfig config;

  Fixture() {
    graphda::SbmSpec spec;
    spec.num_nodes = 400;
    spec.num_classes = 3;
    spec.intra_prob = 0.05;
    spec.inter_prob = 0.01;
    spec.attr_dim = 48;
    spec.domain_shift = 0.4;
    spec.seed = 5;
    pair = graphda::generate_pair(spec);
    config.batch_size = 64;
    config.sample_sizes = {5, 5};
    config.layer_dims = {64, 32};
    config.topk = 10;
    config.n_labeled = 5;
    config.epochs = 1;
    ds = graphda::build_diffusion(pair.source, config.alpha, config.topk);
    dt = graphda::build_diffusion(pair.target, config.alpha, config.topk);
    target = pair.target.with_label_partition(
        graphda::select_labeled_per_class(pair.target, config.n_labeled, 1));
  }
};

void BM_SampleNeighborhoods(benchmark::State& state) {
  static Fixture f;
  std::vector<int> batch(64);
  for (int i = 0; i < 64; ++i) batch[i] = i * 3;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(graphda::sample_neighborhoods(
        f.pair.source, batch, f.config.sample_sizes, ++seed));
}
BENCHMARK(BM_SampleNeighborhoods);

void BM_TrainStep(benchmark::State& state) {
  static Fixture f;
  graphda::Trainer trainer(f.pair.source, f.target, f.ds, f.dt, f.config);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_TrainStep);

void BM_Evaluate(benchmark::State& state) {
  static Fixture f;
  graphda::Trainer trainer(f.pair.source, f.target, f.ds, f.dt, f.config);
  trainer.train_step();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.evaluate());
}
BENCHMARK(BM_Evaluate);

}  // namespace
