#include "plastigen/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plastigen/format.hpp"
#include "plastigen/parallel.hpp"
#include "plastigen/rng.hpp"

namespace plastigen {

Eigen::VectorXd expected_update_lr3(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& w) {
  const int n = static_cast<int>(w.size());
  if (sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("expected_update_lr3: dimension mismatch");
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    double acc = (w[j] * w[j] - 1.0) * sigma(j, j);
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      acc += w[j] * w[i] * sigma(i, j);
    }
    out[j] = acc;
  }
  return out;
}

VectorField lr3_closed_form_field(const Eigen::MatrixXd& sigma) {
  VectorField field;
  field.dim = static_cast<int>(sigma.rows());
  field.provenance = "closed_form_lr3";
  field.eval = [sigma](const Eigen::VectorXd& w) { return expected_update_lr3(sigma, w); };
  return field;
}

namespace {

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& sigma) {
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("covariance not positive definite");
  return llt.matrixL();
}

}  // namespace

McEstimate expected_update_mc(const PlasticityRule& rule, const Eigen::MatrixXd& sigma,
                              const Eigen::VectorXd& w, int samples, std::uint64_t seed) {
  if (samples < 1000)
    throw std::invalid_argument("expected_update_mc: samples must be >= 1000");
  const int n = static_cast<int>(w.size());
  if (sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("expected_update_mc: dimension mismatch");
  const Eigen::MatrixXd l = cholesky_lower(sigma);

  Rng rng(seed);
  Eigen::VectorXd z(n);
  Eigen::VectorXd x(n);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < samples; ++s) {
    for (int j = 0; j < n; ++j) z[j] = rng.normal();
    x = l * z;
    const double y = w.dot(x);
    for (int j = 0; j < n; ++j) {
      const double v = rule.kernel.evaluate(w[j], x[j], y);
      sum[j] += v;
      sum_sq[j] += v * v;
    }
  }
  McEstimate est;
  est.mean = sum / static_cast<double>(samples);
  est.stderr_of_mean.resize(n);
  for (int j = 0; j < n; ++j) {
    const double var =
        std::max(0.0, (sum_sq[j] - static_cast<double>(samples) * est.mean[j] * est.mean[j]) /
                          (static_cast<double>(samples) - 1.0));
    est.stderr_of_mean[j] = std::sqrt(var / static_cast<double>(samples));
  }
  return est;
}

VectorField monte_carlo_field(const PlasticityRule& rule, const Eigen::MatrixXd& sigma,
                              int samples, std::uint64_t seed) {
  if (samples < 1000)
    throw std::invalid_argument("monte_carlo_field: samples must be >= 1000");
  const int n = static_cast<int>(sigma.rows());
  const Eigen::MatrixXd l = cholesky_lower(sigma);

  Rng rng(seed);
  auto data = std::make_shared<Eigen::MatrixXd>(samples, n);
  Eigen::VectorXd z(n);
  for (int s = 0; s < samples; ++s) {
    for (int j = 0; j < n; ++j) z[j] = rng.normal();
    data->row(s) = (l * z).transpose();
  }
  auto kernel = std::make_shared<RuleExpression>(rule.kernel);

  VectorField field;
  field.dim = n;
  field.provenance = "monte_carlo(rule=" + (rule.name.empty() ? to_infix(rule.kernel) : rule.name) +
                     ", samples=" + std::to_string(samples) +
                     ", seed=" + std::to_string(seed) + ")";
  field.eval = [data, kernel, n, samples](const Eigen::VectorXd& w) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < samples; ++s) {
      const auto x = data->row(s);
      const double y = x.dot(w);
      for (int j = 0; j < n; ++j) acc[j] += kernel->evaluate(w[j], x[j], y);
    }
    return Eigen::VectorXd(acc / static_cast<double>(samples));
  };
  return field;
}

std::string_view stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Saddle: return "saddle";
  }
  return "?";
}

namespace {

constexpr double kResidualTarget = 1e-11;
constexpr double kResidualReport = 1e-10;
constexpr double kDedupDistance = 1e-6;
constexpr double kClassifyStep = 1e-6;
constexpr int kNewtonMaxIters = 80;

Eigen::Matrix2d central_jacobian(const VectorField& field, const Eigen::Vector2d& w,
                                 double h) {
  Eigen::Matrix2d j;
  for (int a = 0; a < 2; ++a) {
    Eigen::Vector2d hi = w;
    Eigen::Vector2d lo = w;
    hi[a] += h;
    lo[a] -= h;
    j.col(a) = (field.eval(hi) - field.eval(lo)) / (2.0 * h);
  }
  return j;
}

// Newton iteration with a forward-difference Jacobian. Returns true when
// polished to the residual target.
bool newton_polish(const VectorField& field, Eigen::Vector2d& w) {
  for (int iter = 0; iter < kNewtonMaxIters; ++iter) {
    const Eigen::Vector2d f = field.eval(w);
    if (!f.allFinite()) return false;
    if (f.norm() <= kResidualTarget) return true;
    Eigen::Matrix2d j;
    const double h = 1e-7;
    for (int a = 0; a < 2; ++a) {
      Eigen::Vector2d shifted = w;
      shifted[a] += h;
      j.col(a) = (field.eval(shifted) - f) / h;
    }
    const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
    if (!std::isfinite(det) || std::abs(det) < 1e-13) return false;
    const Eigen::Vector2d step{(j(1, 1) * f[0] - j(0, 1) * f[1]) / det,
                               (j(0, 0) * f[1] - j(1, 0) * f[0]) / det};
    w -= step;
    if (!w.allFinite() || w.norm() > 1e6) return false;
  }
  return false;
}

Stability classify(const Eigen::Matrix2d& j) {
  const double tr = j(0, 0) + j(1, 1);
  const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
  if (det < 0.0) return Stability::Saddle;
  if (tr < 0.0) return Stability::Stable;
  if (tr > 0.0) return Stability::Unstable;
  return Stability::Saddle;
}

std::vector<double> axis_coords(double lo, double hi, int g) {
  std::vector<double> t(static_cast<std::size_t>(g));
  if (g == 1) {
    t[0] = (lo + hi) / 2.0;
    return t;
  }
  if (lo == -hi) {
    // Mirrored fill keeps +-pairs exact for symmetric boxes.
    for (int i = 0; i < g / 2; ++i) {
      const double v = lo + (hi - lo) * static_cast<double>(i) / (g - 1);
      t[static_cast<std::size_t>(i)] = v;
      t[static_cast<std::size_t>(g - 1 - i)] = -v;
    }
    if (g % 2 == 1) t[static_cast<std::size_t>(g / 2)] = 0.0;
  } else {
    for (int i = 0; i < g; ++i)
      t[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (g - 1);
  }
  return t;
}

}  // namespace

std::vector<FixedPointReport> find_fixed_points(const VectorField& field, const Box& box,
                                                int grid) {
  if (field.dim != 2)
    throw std::invalid_argument("find_fixed_points: planar fields only (n = 2)");
  if (grid < 1) throw std::invalid_argument("find_fixed_points: grid must be >= 1");

  std::vector<Eigen::Vector2d> points;
  const double margin = 1e-9;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Eigen::Vector2d w{
          box.lo.x() + (box.hi.x() - box.lo.x()) * (i + 0.5) / grid,
          box.lo.y() + (box.hi.y() - box.lo.y()) * (j + 0.5) / grid};
      if (!newton_polish(field, w)) continue;
      if (w.x() < box.lo.x() - margin || w.x() > box.hi.x() + margin ||
          w.y() < box.lo.y() - margin || w.y() > box.hi.y() + margin)
        continue;
      bool duplicate = false;
      for (const auto& p : points)
        if ((p - w).norm() <= kDedupDistance) duplicate = true;
      if (!duplicate) points.push_back(w);
    }
  }
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });

  std::vector<FixedPointReport> reports;
  for (const auto& p : points) {
    const double residual = field.eval(p).norm();
    if (residual > kResidualReport) continue;
    FixedPointReport r;
    r.location = p;
    r.residual = residual;
    r.stability = classify(central_jacobian(field, p, kClassifyStep));
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string fixed_points_json(const std::vector<FixedPointReport>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json j;
    nlohmann::json loc = nlohmann::json::array();
    for (int i = 0; i < p.location.size(); ++i) loc.push_back(p.location[i]);
    j["location"] = std::move(loc);
    j["residual"] = p.residual;
    j["stability"] = std::string(stability_name(p.stability));
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::vector<PhasePlaneSample> phase_plane(const VectorField& field, const Box& box,
                                          int grid) {
  if (field.dim != 2) throw std::invalid_argument("phase_plane: planar fields only (n = 2)");
  if (grid < 1) throw std::invalid_argument("phase_plane: grid must be >= 1");
  const auto xs = axis_coords(box.lo.x(), box.hi.x(), grid);
  const auto ys = axis_coords(box.lo.y(), box.hi.y(), grid);
  std::vector<PhasePlaneSample> out;
  out.reserve(xs.size() * ys.size());
  for (const double w1 : xs) {
    for (const double w2 : ys) {
      const Eigen::VectorXd f = field.eval(Eigen::Vector2d{w1, w2});
      out.push_back({w1, w2, f[0], f[1]});
    }
  }
  return out;
}

void save_phase_plane_csv(const std::vector<PhasePlaneSample>& samples,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "w1,w2,dw1,dw2\n";
  for (const auto& s : samples)
    out << format_double(s.w1) << ',' << format_double(s.w2) << ','
        << format_double(s.dw1) << ',' << format_double(s.dw2) << '\n';
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

TrajectoryResult integrate_trajectory(const VectorField& field, const Eigen::VectorXd& w0,
                                      double step, int max_steps) {
  if (!(step > 0.0)) throw std::invalid_argument("integrate_trajectory: step must be > 0");
  if (max_steps < 0) throw std::invalid_argument("integrate_trajectory: max_steps must be >= 0");
  constexpr double kStopResidual = 1e-8;
  constexpr double kDivergenceNorm = 1e3;

  std::vector<Eigen::VectorXd> visited{w0};
  Eigen::VectorXd w = w0;
  TrajectoryResult result;
  for (int s = 0; s < max_steps; ++s) {
    const Eigen::VectorXd f = field.eval(w);
    if (f.norm() < kStopResidual) {
      result.converged = true;
      break;
    }
    w += step * f;
    visited.push_back(w);
    if (!w.allFinite() || w.norm() > kDivergenceNorm) {
      result.diverged = true;
      break;
    }
  }
  if (!result.converged && !result.diverged)
    result.converged = field.eval(w).norm() < kStopResidual;

  result.path.resize(static_cast<int>(visited.size()), w0.size());
  for (std::size_t i = 0; i < visited.size(); ++i)
    result.path.row(static_cast<int>(i)) = visited[i].transpose();
  return result;
}

void save_trajectory_csv(const TrajectoryResult& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "step";
  for (int j = 0; j < traj.path.cols(); ++j) out << ",w" << (j + 1);
  out << '\n';
  for (int i = 0; i < traj.path.rows(); ++i) {
    out << i;
    for (int j = 0; j < traj.path.cols(); ++j)
      out << ',' << format_double(traj.path(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

namespace {

int canonical_family_index(Family f) {
  switch (f) {
    case Family::T0: return 0;
    case Family::T1: return 1;
    case Family::T2: return 2;
  }
  return 0;
}

}  // namespace

std::vector<GeneralizationEntry> generalization_matrix(
    const std::vector<PlasticityRule>& rules, const std::vector<Family>& families,
    int n_eval, const FitnessConfig& cfg, std::uint64_t master_seed, int dim,
    int threads, PcReference pc_ref) {
  if (n_eval < 1) throw std::invalid_argument("generalization_matrix: n_eval must be >= 1");
  if (rules.empty()) throw std::invalid_argument("generalization_matrix: no rules");
  if (families.empty()) throw std::invalid_argument("generalization_matrix: no families");
  validate_fitness_config(cfg);

  struct Cell {
    std::size_t rule = 0;
    std::size_t dataset = 0;
  };
  std::vector<Dataset> datasets;
  std::vector<Family> dataset_family;
  std::vector<std::uint64_t> dataset_seed;
  datasets.reserve(families.size() * static_cast<std::size_t>(n_eval));
  for (const Family family : families) {
    const int base = canonical_family_index(family) * n_eval;
    for (int i = 0; i < n_eval; ++i) {
      const std::uint64_t seed =
          derive_seed(master_seed, "heldout", static_cast<std::uint64_t>(base + i));
      datasets.push_back(make_dataset(family, dim, cfg.m, seed, pc_ref));
      dataset_family.push_back(family);
      dataset_seed.push_back(seed);
    }
  }

  const std::size_t per_rule = datasets.size();
  std::vector<double> scores(rules.size() * per_rule);
  const int workers = worker_count(threads);
  parallel_for(static_cast<std::int64_t>(scores.size()), workers, [&](std::int64_t c) {
    const std::size_t ri = static_cast<std::size_t>(c) / per_rule;
    const std::size_t di = static_cast<std::size_t>(c) % per_rule;
    scores[static_cast<std::size_t>(c)] =
        dataset_fitness(rules[ri], datasets[di], cfg).dataset_score;
  });

  std::vector<GeneralizationEntry> entries;
  entries.reserve(scores.size());
  for (std::size_t ri = 0; ri < rules.size(); ++ri) {
    for (std::size_t di = 0; di < per_rule; ++di) {
      GeneralizationEntry e;
      e.rule = rules[ri].name.empty() ? to_infix(rules[ri].kernel) : rules[ri].name;
      e.family = dataset_family[di];
      e.dataset_seed = dataset_seed[di];
      e.score = scores[ri * per_rule + di];
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

void save_generalization_csv(const std::vector<GeneralizationEntry>& entries,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "rule,family,dataset_seed,score\n";
  for (const auto& e : entries)
    out << e.rule << ',' << family_name(e.family) << ',' << e.dataset_seed << ','
        << format_double(e.score) << '\n';
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace plastigen
