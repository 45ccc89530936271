#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plastigen/cgp.hpp"
#include "plastigen/fitness.hpp"
#include "plastigen/tasks.hpp"

namespace plastigen {

/// Regularizer strength used while searching. Softer than the scoring
/// default: a full-strength norm penalty walls off the Hebbian-like
/// intermediates the search climbs through.
inline constexpr double kSearchAlpha = 0.3;

struct EvolutionConfig {
  int mu = 4;
  int lambda = 16;
  int generations = 1000;
  double per_gene_rate = 0.03;
  std::uint64_t master_seed = 1;
  Family family = Family::T0;
  FitnessConfig fitness{.alpha = kSearchAlpha};
  bool reseed_datasets_every_generation = false;

  int dim = 2;
  CgpLayout layout;
  OperatorSet ops;
  PcReference pc_ref = PcReference::Generator;
  /// Optional fixed initial population (size mu); empty draws random genomes.
  std::vector<Genome> initial_genomes;
};

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  std::string best_expression;
  std::int64_t evaluations = 0;
};

std::string generation_record_json(const GenerationRecord& record);
std::string champion_json(const Genome& genome, const std::string& expression,
                          double fitness);

struct EvolutionResult {
  std::vector<GenerationRecord> history;  // generations 1..G
  Genome champion_genome;
  PlasticityRule champion;
  double champion_fitness = 0.0;
};

/// Fitness ties within this tolerance count as neutral.
inline constexpr double kTieTolerance = 1e-12;

/// Ranks candidates by fitness and returns the indices of the best mu.
/// On ties within tie_tol an offspring outranks a parent (neutral drift);
/// ties within the same class keep the lower index.
std::vector<int> select_survivors(const std::vector<double>& fitness,
                                  const std::vector<bool>& is_offspring, int mu,
                                  double tie_tol = kTieTolerance);

using GenerationCallback = std::function<void(const GenerationRecord&)>;

/// Batch evaluator: scores a set of genomes for the given generation index.
/// The index only matters when datasets are reseeded per generation.
using BatchEvaluator =
    std::function<std::vector<double>(int generation, const std::vector<Genome>&)>;

/// (mu+lambda) search over the family fitness. With reseeding off (default)
/// the K datasets, their initial weights and presentation orders stay fixed
/// for the whole run, so every individual in every generation is scored on
/// identical tasks. Offspring are evaluated in parallel across
/// (genome, dataset) cells; results do not depend on the thread count.
EvolutionResult run(const EvolutionConfig& config, int threads = 0,
                    const GenerationCallback& on_generation = {});

/// Same loop with an injected evaluator (used by tests and custom pipelines).
EvolutionResult run_with_evaluator(const EvolutionConfig& config,
                                   const BatchEvaluator& evaluate_batch,
                                   const GenerationCallback& on_generation = {});

/// The fixed dataset batch a run with this config evaluates against
/// (generation_block 0 unless reseeding is on).
std::vector<Dataset> evolution_datasets(const EvolutionConfig& config,
                                        int generation_block = 0);

}  // namespace plastigen
