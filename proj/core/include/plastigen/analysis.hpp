#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plastigen/fitness.hpp"
#include "plastigen/plasticity.hpp"
#include "plastigen/tasks.hpp"

namespace plastigen {

/// Map w -> E[dw], the per-trial expected update with the learning rate
/// factored out.
struct VectorField {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::string provenance;
};

/// Closed form for lr3: E[dw_j] = (w_j^2 - 1) Var[x_j] + w_j sum_{i!=j} w_i Cov[x_i, x_j].
Eigen::VectorXd expected_update_lr3(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& w);
VectorField lr3_closed_form_field(const Eigen::MatrixXd& sigma);

struct McEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_of_mean;
};

/// Monte-Carlo estimate of E[f(w_j, x_j, y)] per component for x ~ N(0, sigma),
/// y = w.x. Requires samples >= 1000.
McEstimate expected_update_mc(const PlasticityRule& rule, const Eigen::MatrixXd& sigma,
                              const Eigen::VectorXd& w, int samples, std::uint64_t seed);

/// Deterministic field averaging the kernel over one frozen Gaussian sample
/// set, so the map is smooth in w and usable by Newton iterations.
VectorField monte_carlo_field(const PlasticityRule& rule, const Eigen::MatrixXd& sigma,
                              int samples, std::uint64_t seed);

enum class Stability { Stable, Unstable, Saddle };
std::string_view stability_name(Stability s);

struct FixedPointReport {
  Eigen::VectorXd location;
  double residual = 0.0;
  Stability stability = Stability::Saddle;
};

struct Box {
  Eigen::Vector2d lo{-2.0, -2.0};
  Eigen::Vector2d hi{2.0, 2.0};
  static Box centered(double half) { return {{-half, -half}, {half, half}}; }
};

/// Seeds Newton iterations from every cell of a grid x grid lattice over the
/// box, polishes to residual <= 1e-10, deduplicates within 1e-6 and
/// classifies stability from the central-difference Jacobian (step 1e-6).
/// Planar fields only. Results are sorted by location.
std::vector<FixedPointReport> find_fixed_points(const VectorField& field, const Box& box,
                                                int grid);

std::string fixed_points_json(const std::vector<FixedPointReport>& points);

struct PhasePlaneSample {
  double w1 = 0.0, w2 = 0.0, dw1 = 0.0, dw2 = 0.0;
};

/// Uniform grid sampling of the field over the box, endpoints included.
/// Symmetric boxes produce exactly mirrored +-w coordinate pairs.
std::vector<PhasePlaneSample> phase_plane(const VectorField& field, const Box& box,
                                          int grid);
void save_phase_plane_csv(const std::vector<PhasePlaneSample>& samples,
                          const std::filesystem::path& path);

struct TrajectoryResult {
  Eigen::MatrixXd path;  // one row per visited point, starting at w0
  bool converged = false;
  bool diverged = false;

  int steps() const { return static_cast<int>(path.rows()); }
};

/// Explicit Euler on the expected dynamics; stops when ||E[dw]|| < 1e-8,
/// flags divergence when ||w|| exceeds 1e3.
TrajectoryResult integrate_trajectory(const VectorField& field, const Eigen::VectorXd& w0,
                                      double step, int max_steps);
void save_trajectory_csv(const TrajectoryResult& traj, const std::filesystem::path& path);

struct GeneralizationEntry {
  std::string rule;
  Family family = Family::T0;
  std::uint64_t dataset_seed = 0;
  double score = 0.0;
};

/// Scores every rule on n_eval fresh datasets per family. Dataset seeds are
/// derived under a dedicated purpose label, so they are disjoint from every
/// training batch.
std::vector<GeneralizationEntry> generalization_matrix(
    const std::vector<PlasticityRule>& rules, const std::vector<Family>& families,
    int n_eval, const FitnessConfig& cfg, std::uint64_t master_seed, int dim = 2,
    int threads = 0, PcReference pc_ref = PcReference::Generator);

void save_generalization_csv(const std::vector<GeneralizationEntry>& entries,
                             const std::filesystem::path& path);

}  // namespace plastigen
