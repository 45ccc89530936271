#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "plastigen/cgp.hpp"
#include "plastigen/tasks.hpp"

namespace plastigen {

/// A plasticity rule is the scalar kernel f applied elementwise per trial:
///   w_j <- w_j + eta * f(w_j, x_j, y).
/// The learning rate eta is a training parameter, not part of the rule.
struct PlasticityRule {
  RuleExpression kernel;
  std::string name;
};

/// Closed-form kernels: oja, lr1, lr2, lr3, lr4.
PlasticityRule builtin_rule(std::string_view name);
const std::vector<std::string>& builtin_rule_names();

/// Output of the linear unit: y = w . x (no activation nonlinearity).
double forward(const Eigen::VectorXd& w, const Eigen::VectorXd& x);

struct WeightTrajectory {
  Eigen::MatrixXd weights;         // (M+1) x n; row i is w_i
  Eigen::VectorXd outputs;         // M; outputs[i-1] is y of trial i
  std::optional<int> diverged_at;  // first trial with non-finite weights

  int trials() const { return static_cast<int>(outputs.size()); }
  int dim() const { return static_cast<int>(weights.cols()); }

  /// CSV columns: trial, w_0..w_{n-1}, y. Row 0 holds w0 with an empty y.
  void save_csv(const std::filesystem::path& path) const;
};

/// Seeded permutation of 0..m-1 used as a presentation order.
std::vector<int> presentation_order(int m, std::uint64_t seed);

/// Presents each dataset row exactly once in the permuted order. Every
/// component update within a trial reads the pre-update weights. Non-finite
/// weights freeze the trajectory and set diverged_at; scoring is left to the
/// fitness layer.
WeightTrajectory train(const PlasticityRule& rule, const Dataset& dataset,
                       const Eigen::VectorXd& w0, double eta,
                       const std::vector<int>& order);

}  // namespace plastigen
