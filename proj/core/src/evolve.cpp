#include "plastigen/evolve.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "plastigen/parallel.hpp"

namespace plastigen {

std::string generation_record_json(const GenerationRecord& record) {
  nlohmann::json j;
  j["generation"] = record.generation;
  j["best_fitness"] = record.best_fitness;
  j["best_expression"] = record.best_expression;
  j["evaluations"] = record.evaluations;
  return j.dump();
}

std::string champion_json(const Genome& genome, const std::string& expression,
                          double fitness) {
  nlohmann::json j;
  j["genome"] = nlohmann::json::parse(genome_to_json(genome));
  j["expression"] = expression;
  j["fitness"] = fitness;
  return j.dump(2) + "\n";
}

std::vector<int> select_survivors(const std::vector<double>& fitness,
                                  const std::vector<bool>& is_offspring, int mu,
                                  double tie_tol) {
  const int n = static_cast<int>(fitness.size());
  if (fitness.size() != is_offspring.size())
    throw std::invalid_argument("select_survivors: size mismatch");
  if (mu < 1 || mu > n)
    throw std::invalid_argument("select_survivors: mu out of range");
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(mu));
  for (int s = 0; s < mu; ++s) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      if (fitness[static_cast<std::size_t>(i)] > fitness[static_cast<std::size_t>(best)] + tie_tol) {
        best = i;
      } else if (std::abs(fitness[static_cast<std::size_t>(i)] -
                          fitness[static_cast<std::size_t>(best)]) <= tie_tol &&
                 is_offspring[static_cast<std::size_t>(i)] &&
                 !is_offspring[static_cast<std::size_t>(best)]) {
        best = i;
      }
    }
    taken[static_cast<std::size_t>(best)] = 1;
    out.push_back(best);
  }
  return out;
}

namespace {

void validate_config(const EvolutionConfig& cfg) {
  if (cfg.mu < 1) throw std::invalid_argument("evolve: mu must be >= 1");
  if (cfg.lambda < 1) throw std::invalid_argument("evolve: lambda must be >= 1");
  if (cfg.generations < 0) throw std::invalid_argument("evolve: generations must be >= 0");
  if (!(cfg.per_gene_rate > 0.0) || cfg.per_gene_rate > 1.0)
    throw std::invalid_argument("evolve: per_gene_rate must be in (0, 1]");
  if (cfg.dim < 2) throw std::invalid_argument("evolve: dim must be >= 2");
  validate_fitness_config(cfg.fitness);
}

}  // namespace

std::vector<Dataset> evolution_datasets(const EvolutionConfig& cfg, int generation_block) {
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(cfg.fitness.k));
  for (int i = 0; i < cfg.fitness.k; ++i) {
    const std::uint64_t ds_seed =
        derive_seed(cfg.master_seed, "dataset",
                    static_cast<std::uint64_t>(generation_block) *
                            static_cast<std::uint64_t>(cfg.fitness.k) +
                        static_cast<std::uint64_t>(i));
    out.push_back(make_dataset(cfg.family, cfg.dim, cfg.fitness.m, ds_seed, cfg.pc_ref));
  }
  return out;
}

EvolutionResult run_with_evaluator(const EvolutionConfig& cfg,
                                   const BatchEvaluator& evaluate_batch,
                                   const GenerationCallback& on_generation) {
  validate_config(cfg);

  std::vector<Genome> parents;
  if (!cfg.initial_genomes.empty()) {
    if (static_cast<int>(cfg.initial_genomes.size()) != cfg.mu)
      throw std::invalid_argument("evolve: initial_genomes size must equal mu");
    for (const auto& g : cfg.initial_genomes) validate_genome(g, cfg.ops);
    parents = cfg.initial_genomes;
  } else {
    Rng init_rng(derive_seed(cfg.master_seed, "init", 0));
    parents.reserve(static_cast<std::size_t>(cfg.mu));
    for (int i = 0; i < cfg.mu; ++i)
      parents.push_back(random_genome(cfg.layout, cfg.ops, init_rng));
  }

  std::vector<double> parent_fitness = evaluate_batch(0, parents);
  std::int64_t evaluations = cfg.mu;

  // Keep parents ranked best-first so parents[0] is always the incumbent.
  auto rank_parents = [&] {
    const std::vector<bool> flags(parents.size(), false);
    const auto order = select_survivors(parent_fitness, flags, cfg.mu);
    std::vector<Genome> g;
    std::vector<double> f;
    g.reserve(parents.size());
    f.reserve(parents.size());
    for (const int idx : order) {
      g.push_back(std::move(parents[static_cast<std::size_t>(idx)]));
      f.push_back(parent_fitness[static_cast<std::size_t>(idx)]);
    }
    parents = std::move(g);
    parent_fitness = std::move(f);
  };
  rank_parents();

  Rng mut_rng(derive_seed(cfg.master_seed, "mutation", 0));
  Rng choice_rng(derive_seed(cfg.master_seed, "parent-choice", 0));

  EvolutionResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.generations));

  for (int g = 1; g <= cfg.generations; ++g) {
    if (cfg.reseed_datasets_every_generation) {
      parent_fitness = evaluate_batch(g, parents);
      evaluations += cfg.mu;
      rank_parents();
    }

    std::vector<Genome> offspring;
    offspring.reserve(static_cast<std::size_t>(cfg.lambda));
    for (int o = 0; o < cfg.lambda; ++o) {
      const auto pick = static_cast<std::size_t>(choice_rng.below(static_cast<std::uint64_t>(cfg.mu)));
      offspring.push_back(mutate(parents[pick], cfg.per_gene_rate, mut_rng, cfg.ops));
    }
    const std::vector<double> offspring_fitness = evaluate_batch(g, offspring);
    evaluations += cfg.lambda;

    std::vector<double> pool_fitness = parent_fitness;
    pool_fitness.insert(pool_fitness.end(), offspring_fitness.begin(), offspring_fitness.end());
    std::vector<bool> pool_offspring(parents.size(), false);
    pool_offspring.insert(pool_offspring.end(), offspring.size(), true);

    const auto survivors = select_survivors(pool_fitness, pool_offspring, cfg.mu);
    std::vector<Genome> next;
    std::vector<double> next_fitness;
    next.reserve(static_cast<std::size_t>(cfg.mu));
    next_fitness.reserve(static_cast<std::size_t>(cfg.mu));
    for (const int idx : survivors) {
      if (idx < cfg.mu) {
        next.push_back(std::move(parents[static_cast<std::size_t>(idx)]));
      } else {
        next.push_back(std::move(offspring[static_cast<std::size_t>(idx - cfg.mu)]));
      }
      next_fitness.push_back(pool_fitness[static_cast<std::size_t>(idx)]);
    }
    parents = std::move(next);
    parent_fitness = std::move(next_fitness);

    GenerationRecord record;
    record.generation = g;
    record.best_fitness = parent_fitness[0];
    record.best_expression = to_infix(decode(parents[0], cfg.ops));
    record.evaluations = evaluations;
    result.history.push_back(record);
    if (on_generation) on_generation(record);
  }

  result.champion_genome = parents[0];
  result.champion = PlasticityRule{decode(parents[0], cfg.ops), "champion"};
  result.champion_fitness = parent_fitness[0];
  return result;
}

EvolutionResult run(const EvolutionConfig& cfg, int threads,
                    const GenerationCallback& on_generation) {
  validate_config(cfg);
  const int workers = worker_count(threads);

  std::vector<Dataset> batch = evolution_datasets(cfg, 0);
  int batch_block = 0;

  const BatchEvaluator evaluate = [&](int generation, const std::vector<Genome>& genomes) {
    if (cfg.reseed_datasets_every_generation && generation != batch_block) {
      batch = evolution_datasets(cfg, generation);
      batch_block = generation;
    }
    const auto k = static_cast<std::int64_t>(batch.size());
    std::vector<PlasticityRule> rules;
    rules.reserve(genomes.size());
    for (const auto& genome : genomes)
      rules.push_back(PlasticityRule{decode(genome, cfg.ops), std::string()});

    std::vector<double> cell(genomes.size() * static_cast<std::size_t>(k));
    parallel_for(static_cast<std::int64_t>(cell.size()), workers, [&](std::int64_t c) {
      const auto gi = static_cast<std::size_t>(c / k);
      const auto di = static_cast<std::size_t>(c % k);
      cell[static_cast<std::size_t>(c)] =
          dataset_fitness(rules[gi], batch[di], cfg.fitness).dataset_score;
    });

    // Reduce in dataset order so results are independent of scheduling.
    std::vector<double> scores(genomes.size());
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      double acc = 0.0;
      for (std::int64_t d = 0; d < k; ++d)
        acc += cell[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(d)];
      scores[i] = acc / static_cast<double>(k);
    }
    return scores;
  };

  return run_with_evaluator(cfg, evaluate, on_generation);
}

}  // namespace plastigen
