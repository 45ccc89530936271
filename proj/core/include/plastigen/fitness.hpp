#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plastigen/plasticity.hpp"
#include "plastigen/tasks.hpp"

namespace plastigen {

struct FitnessConfig {
  double alpha = 1.0;  // weight-norm regularizer strength
  double eta = 0.01;   // learning rate
  int k = 10;          // datasets per family evaluation
  int m = 1000;        // trials per dataset
};

void validate_fitness_config(const FitnessConfig& cfg);

/// Norm penalties saturate here so one pathological rule cannot reach -inf.
inline constexpr double kNormPenaltyCap = 10.0;

/// Weights below this norm score alignment 0 and penalty 1.
inline constexpr double kZeroNormEps = 1e-12;

/// Per-trial term: |cos(angle(w, pc0))| - alpha * min(| ||w|| - 1 |, cap),
/// with the zero-norm case defined as 0 - alpha.
double trial_score(const Eigen::VectorXd& w, const Eigen::VectorXd& pc0, double alpha);

struct FitnessReport {
  std::vector<double> alignment;     // per trial 1..M
  std::vector<double> norm_penalty;  // per trial 1..M
  double dataset_score = 0.0;
  std::optional<int> diverged_at;

  /// CSV columns: trial, alignment, norm_penalty.
  void save_csv(const std::filesystem::path& path) const;
  std::string summary_json() const;
};

/// Scores the M post-update weight vectors w_1..w_M. Trials at or after a
/// divergence contribute alignment 0 and the saturated norm penalty.
FitnessReport score_trajectory(const WeightTrajectory& traj,
                               const Eigen::VectorXd& pc0, const FitnessConfig& cfg);

/// Trains from dataset.w0 with the presentation order derived from the
/// dataset seed, then scores the trajectory. Divergence is scored, not raised.
FitnessReport dataset_fitness(const PlasticityRule& rule, const Dataset& dataset,
                              const FitnessConfig& cfg);

/// Arithmetic mean of dataset scores, accumulated in dataset order.
double family_fitness(const PlasticityRule& rule, const std::vector<Dataset>& datasets,
                      const FitnessConfig& cfg);

}  // namespace plastigen
