#include "plastigen/plasticity.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "plastigen/format.hpp"

namespace plastigen {

namespace {

struct BuiltinEntry {
  const char* name;
  const char* source;
};

constexpr std::array<BuiltinEntry, 5> kBuiltins{{
    {"oja", "y*(x - w*y)"},
    {"lr1", "(2.0*y + 1.0 + w)*(x - w*y)"},
    {"lr2", "2.0*y*(x - w*y)"},
    {"lr3", "(-x)*(x - w*y)"},
    {"lr4", "(y + w*x)*(x - w*y)"},
}};

}  // namespace

PlasticityRule builtin_rule(std::string_view name) {
  for (const auto& entry : kBuiltins)
    if (name == entry.name) return {parse_rule(entry.source), std::string(name)};
  std::string valid;
  for (const auto& entry : kBuiltins) {
    if (!valid.empty()) valid += ", ";
    valid += entry.name;
  }
  throw std::invalid_argument("unknown rule '" + std::string(name) +
                              "'; valid names: " + valid);
}

const std::vector<std::string>& builtin_rule_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : kBuiltins) out.emplace_back(entry.name);
    return out;
  }();
  return names;
}

double forward(const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("forward: dimension mismatch (" +
                                std::to_string(w.size()) + " vs " +
                                std::to_string(x.size()) + ")");
  return w.dot(x);
}

void WeightTrajectory::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << "trial";
  for (int j = 0; j < dim(); ++j) out << ",w_" << j;
  out << ",y\n";
  for (int i = 0; i < static_cast<int>(weights.rows()); ++i) {
    out << i;
    for (int j = 0; j < dim(); ++j) out << ',' << format_double(weights(i, j));
    out << ',';
    if (i > 0) out << format_double(outputs[i - 1]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

std::vector<int> presentation_order(int m, std::uint64_t seed) {
  return random_permutation(m, seed);
}

WeightTrajectory train(const PlasticityRule& rule, const Dataset& dataset,
                       const Eigen::VectorXd& w0, double eta,
                       const std::vector<int>& order) {
  const int m = dataset.sample_count();
  const int n = dataset.dim();
  if (w0.size() != n) throw std::invalid_argument("train: w0 dimension mismatch");
  if (std::abs(w0.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("train: initial weights must have unit norm");
  if (!(eta > 0.0)) throw std::invalid_argument("train: eta must be positive");
  if (static_cast<int>(order.size()) != m)
    throw std::invalid_argument("train: order must cover every dataset row");
  {
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    for (const int idx : order) {
      if (idx < 0 || idx >= m || seen[static_cast<std::size_t>(idx)])
        throw std::invalid_argument("train: order is not a permutation of the rows");
      seen[static_cast<std::size_t>(idx)] = 1;
    }
  }

  WeightTrajectory traj;
  traj.weights.resize(m + 1, n);
  traj.outputs.resize(m);
  traj.weights.row(0) = w0.transpose();

  Eigen::VectorXd w = w0;
  Eigen::VectorXd dw(n);
  for (int i = 0; i < m; ++i) {
    const auto x = dataset.inputs.row(order[static_cast<std::size_t>(i)]);
    const double y = w.dot(x);
    traj.outputs[i] = y;
    // Synchronous update: every component reads the pre-update weights.
    for (int j = 0; j < n; ++j) dw[j] = rule.kernel.evaluate(w[j], x[j], y);
    w += eta * dw;
    traj.weights.row(i + 1) = w.transpose();
    if (!w.allFinite()) {
      traj.diverged_at = i + 1;
      for (int rest = i + 2; rest <= m; ++rest) traj.weights.row(rest) = w.transpose();
      for (int rest = i + 1; rest < m; ++rest) traj.outputs[rest] = traj.outputs[i];
      break;
    }
  }
  return traj;
}

}  // namespace plastigen
