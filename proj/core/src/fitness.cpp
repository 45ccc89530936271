#include "plastigen/fitness.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plastigen/format.hpp"

namespace plastigen {

namespace {

void alignment_and_penalty(const Eigen::VectorXd& w, const Eigen::VectorXd& pc0,
                           double& alignment, double& penalty) {
  const double nrm = w.norm();
  if (nrm < kZeroNormEps) {
    alignment = 0.0;
    penalty = 1.0;
    return;
  }
  alignment = std::abs(w.dot(pc0)) / nrm;
  penalty = std::min(std::abs(nrm - 1.0), kNormPenaltyCap);
}

}  // namespace

void validate_fitness_config(const FitnessConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("fitness: alpha must be >= 0");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("fitness: eta must be > 0");
  if (cfg.k < 1) throw std::invalid_argument("fitness: K must be >= 1");
  if (cfg.m < 1) throw std::invalid_argument("fitness: M must be >= 1");
}

double trial_score(const Eigen::VectorXd& w, const Eigen::VectorXd& pc0, double alpha) {
  double alignment = 0.0;
  double penalty = 0.0;
  alignment_and_penalty(w, pc0, alignment, penalty);
  return alignment - alpha * penalty;
}

void FitnessReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << "trial,alignment,norm_penalty\n";
  for (std::size_t i = 0; i < alignment.size(); ++i)
    out << (i + 1) << ',' << format_double(alignment[i]) << ','
        << format_double(norm_penalty[i]) << '\n';
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

std::string FitnessReport::summary_json() const {
  nlohmann::json j;
  j["dataset_score"] = dataset_score;
  j["trials"] = alignment.size();
  if (diverged_at)
    j["diverged_at"] = *diverged_at;
  else
    j["diverged_at"] = nullptr;
  return j.dump();
}

FitnessReport score_trajectory(const WeightTrajectory& traj,
                               const Eigen::VectorXd& pc0, const FitnessConfig& cfg) {
  validate_fitness_config(cfg);
  if (pc0.size() != traj.dim())
    throw std::invalid_argument("score_trajectory: pc0 dimension mismatch");
  const int m = traj.trials();
  FitnessReport report;
  report.alignment.reserve(static_cast<std::size_t>(m));
  report.norm_penalty.reserve(static_cast<std::size_t>(m));
  report.diverged_at = traj.diverged_at;
  double acc = 0.0;
  for (int i = 1; i <= m; ++i) {
    double alignment = 0.0;
    double penalty = kNormPenaltyCap;
    if (!traj.diverged_at || i < *traj.diverged_at)
      alignment_and_penalty(traj.weights.row(i).transpose(), pc0, alignment, penalty);
    report.alignment.push_back(alignment);
    report.norm_penalty.push_back(penalty);
    acc += alignment - cfg.alpha * penalty;
  }
  report.dataset_score = acc / m;
  return report;
}

FitnessReport dataset_fitness(const PlasticityRule& rule, const Dataset& dataset,
                              const FitnessConfig& cfg) {
  validate_fitness_config(cfg);
  const auto order = presentation_order(dataset.sample_count(),
                                        derive_seed(dataset.spec.seed, "order", 0));
  const WeightTrajectory traj = train(rule, dataset, dataset.w0, cfg.eta, order);
  return score_trajectory(traj, dataset.pc0, cfg);
}

double family_fitness(const PlasticityRule& rule, const std::vector<Dataset>& datasets,
                      const FitnessConfig& cfg) {
  if (datasets.empty()) throw std::invalid_argument("family_fitness: K must be >= 1");
  double acc = 0.0;
  for (const auto& dataset : datasets)
    acc += dataset_fitness(rule, dataset, cfg).dataset_score;
  return acc / static_cast<double>(datasets.size());
}

}  // namespace plastigen
