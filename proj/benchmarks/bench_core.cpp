#include <benchmark/benchmark.h>

#include "plastigen/cgp.hpp"
#include "plastigen/evolve.hpp"
#include "plastigen/fitness.hpp"
#include "plastigen/plasticity.hpp"
#include "plastigen/tasks.hpp"

namespace {

using namespace plastigen;

void bm_kernel_evaluate(benchmark::State& state) {
  const PlasticityRule rule = builtin_rule("lr1");
  double w = 0.3, x = 1.2, y = -0.4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rule.kernel.evaluate(w, x, y));
    w += 1e-9;  // defeat constant folding across iterations
  }
}
BENCHMARK(bm_kernel_evaluate);

void bm_decode(benchmark::State& state) {
  Rng rng(7);
  const Genome genome = random_genome(CgpLayout{}, OperatorSet{}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(decode(genome));
}
BENCHMARK(bm_decode);

void bm_mutate(benchmark::State& state) {
  Rng rng(7);
  const Genome genome = random_genome(CgpLayout{}, OperatorSet{}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mutate(genome, 0.1, rng));
}
BENCHMARK(bm_mutate);

void bm_train_oja(benchmark::State& state) {
  const PlasticityRule rule = builtin_rule("oja");
  const Dataset dataset = make_dataset(Family::T0, 2, static_cast<int>(state.range(0)), 11);
  const auto order = presentation_order(dataset.sample_count(),
                                        derive_seed(dataset.spec.seed, "order", 0));
  for (auto _ : state)
    benchmark::DoNotOptimize(train(rule, dataset, dataset.w0, 0.01, order));
}
BENCHMARK(bm_train_oja)->Arg(1000);

void bm_dataset_fitness(benchmark::State& state) {
  const PlasticityRule rule = builtin_rule("oja");
  const Dataset dataset = make_dataset(Family::T0, 2, 1000, 11);
  const FitnessConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(dataset_fitness(rule, dataset, cfg).dataset_score);
}
BENCHMARK(bm_dataset_fitness);

void bm_evolve_generation(benchmark::State& state) {
  EvolutionConfig cfg;
  cfg.generations = 10;
  cfg.fitness.k = 10;
  cfg.fitness.m = 1000;
  cfg.master_seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(run(cfg, 1));
}
BENCHMARK(bm_evolve_generation)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
