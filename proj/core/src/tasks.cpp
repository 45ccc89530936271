#include "plastigen/tasks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "plastigen/format.hpp"

namespace plastigen {

std::string_view family_name(Family family) {
  switch (family) {
    case Family::T0: return "t0";
    case Family::T1: return "t1";
    case Family::T2: return "t2";
  }
  return "?";
}

Family family_from_name(std::string_view name) {
  if (name == "t0" || name == "T0") return Family::T0;
  if (name == "t1" || name == "T1") return Family::T1;
  if (name == "t2" || name == "T2") return Family::T2;
  throw std::invalid_argument("unknown task family '" + std::string(name) +
                              "'; valid names: t0, t1, t2");
}

namespace {

constexpr double kEigengapFloor = 1.1;
constexpr double kMaxT1AngleRad = 5.0 * std::numbers::pi / 180.0;

Eigen::VectorXd draw_eigenvalues(int n, Rng& rng) {
  Eigen::VectorXd lam(n);
  for (;;) {
    for (int i = 0; i < n; ++i) lam[i] = rng.uniform(0.1, 2.0);
    std::sort(lam.data(), lam.data() + n, std::greater<>());
    if (lam[0] / lam[1] < kEigengapFloor) continue;
    bool distinct = true;
    for (int i = 0; i + 1 < n; ++i)
      if (lam[i] == lam[i + 1]) distinct = false;
    if (distinct) return lam;
  }
}

Eigen::VectorXd gaussian_vector(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

Eigen::VectorXd random_unit(int n, Rng& rng) {
  for (;;) {
    Eigen::VectorXd v = gaussian_vector(n, rng);
    const double nrm = v.norm();
    if (nrm > 1e-8) return v / nrm;
  }
}

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
// of diag(R) fixed.
Eigen::MatrixXd haar_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Orthonormal basis whose first column is `first`.
Eigen::MatrixXd basis_with_first(const Eigen::VectorXd& first, Rng& rng) {
  const int n = static_cast<int>(first.size());
  Eigen::MatrixXd b(n, n);
  b.col(0) = first;
  for (int j = 1; j < n; ++j) {
    for (;;) {
      Eigen::VectorXd g = gaussian_vector(n, rng);
      for (int k = 0; k < j; ++k) g -= b.col(k).dot(g) * b.col(k);
      const double nrm = g.norm();
      if (nrm > 1e-8) {
        b.col(j) = g / nrm;
        break;
      }
    }
  }
  return b;
}

void apply_sign_convention(Eigen::VectorXd& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

bool exactly_diagonal(const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("failed to read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<int>(j.size());
  const auto cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

void validate_covariance(const CovarianceSpec& spec) {
  const auto& s = spec.sigma;
  if (s.rows() != s.cols() || s.rows() < 2)
    throw std::invalid_argument("covariance: must be square with n >= 2");
  for (int i = 0; i < s.rows(); ++i)
    for (int j = 0; j < s.cols(); ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-12)
        throw std::invalid_argument("covariance: not symmetric within 1e-12");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const auto& eigs = es.eigenvalues();  // ascending
  const int n = static_cast<int>(eigs.size());
  if (eigs[0] <= 0.0)
    throw std::invalid_argument("covariance: not positive definite");
  if (eigs[n - 1] / eigs[n - 2] < kEigengapFloor * (1.0 - 1e-9))
    throw std::invalid_argument(
        "covariance: eigengap below 1.1, leading eigenvector is degenerate");
}

CovarianceSpec sample_covariance(Family family, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_covariance: n must be >= 2");
  Rng rng(derive_seed(seed, "covariance", 0));
  const Eigen::VectorXd lam = draw_eigenvalues(n, rng);
  Eigen::MatrixXd sigma;
  switch (family) {
    case Family::T0: {
      const Eigen::MatrixXd q = haar_orthogonal(n, rng);
      sigma = q * lam.asDiagonal() * q.transpose();
      break;
    }
    case Family::T1: {
      Eigen::VectorXd d(n);
      for (int i = 0; i < n; ++i) d[i] = rng.coin() ? 1.0 : -1.0;
      d /= std::sqrt(static_cast<double>(n));
      Eigen::VectorXd u;
      for (;;) {
        u = random_unit(n, rng);
        u -= u.dot(d) * d;
        const double nrm = u.norm();
        if (nrm > 1e-8) {
          u /= nrm;
          break;
        }
      }
      const double theta = rng.uniform(0.0, kMaxT1AngleRad);
      const Eigen::VectorXd top = std::cos(theta) * d + std::sin(theta) * u;
      const Eigen::MatrixXd b = basis_with_first(top, rng);
      sigma = b * lam.asDiagonal() * b.transpose();
      break;
    }
    case Family::T2: {
      const int axis = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      std::vector<int> rest;
      for (int i = 0; i < n; ++i)
        if (i != axis) rest.push_back(i);
      for (int i = static_cast<int>(rest.size()) - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(j)]);
      }
      sigma = Eigen::MatrixXd::Zero(n, n);
      sigma(axis, axis) = lam[0];
      for (std::size_t i = 0; i < rest.size(); ++i)
        sigma(rest[i], rest[i]) = lam[static_cast<int>(i) + 1];
      break;
    }
  }
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();
  return {std::move(sigma), family, seed};
}

Eigen::VectorXd top_eigenvector(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v;
  if (exactly_diagonal(m)) {
    int axis = 0;
    for (int i = 1; i < n; ++i)
      if (m(i, i) > m(axis, axis)) axis = i;
    v = Eigen::VectorXd::Zero(n);
    v[axis] = 1.0;
  } else {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    v = es.eigenvectors().col(n - 1);
    v.normalize();
  }
  apply_sign_convention(v);
  return v;
}

Eigen::VectorXd principal_component(const CovarianceSpec& spec) {
  validate_covariance(spec);
  return top_eigenvector(spec.sigma);
}

Dataset generate_dataset(const CovarianceSpec& spec, int m, std::uint64_t seed,
                         PcReference ref) {
  if (m < 1) throw std::invalid_argument("generate_dataset: M must be >= 1");
  const int n = static_cast<int>(spec.sigma.rows());
  const Eigen::LLT<Eigen::MatrixXd> llt(spec.sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("generate_dataset: covariance not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();

  Rng sample_rng(derive_seed(seed, "samples", 0));
  Eigen::MatrixXd inputs(m, n);
  Eigen::VectorXd z(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) z[j] = sample_rng.normal();
    inputs.row(i) = (l * z).transpose();
  }

  Rng w0_rng(derive_seed(seed, "w0", 0));

  Dataset d;
  d.inputs = std::move(inputs);
  d.spec = spec;
  if (ref == PcReference::Generator) {
    d.pc0 = principal_component(spec);
  } else {
    const Eigen::MatrixXd empirical = (d.inputs.transpose() * d.inputs) / static_cast<double>(m);
    d.pc0 = top_eigenvector(empirical);
  }
  d.w0 = random_unit(n, w0_rng);
  return d;
}

Dataset make_dataset(Family family, int n, int m, std::uint64_t seed, PcReference ref) {
  const CovarianceSpec spec = sample_covariance(family, n, seed);
  return generate_dataset(spec, m, derive_seed(seed, "data", 0), ref);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["family"] = std::string(family_name(dataset.spec.family));
  meta["seed"] = dataset.spec.seed;
  meta["n"] = dataset.dim();
  meta["m"] = dataset.sample_count();
  meta["sigma"] = matrix_to_json(dataset.spec.sigma);
  meta["pc0"] = vector_to_json(dataset.pc0);
  meta["w0"] = vector_to_json(dataset.w0);
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");

  std::string csv;
  for (int j = 0; j < dataset.dim(); ++j) {
    if (j > 0) csv += ',';
    csv += "x" + std::to_string(j);
  }
  csv += '\n';
  for (int i = 0; i < dataset.sample_count(); ++i) {
    for (int j = 0; j < dataset.dim(); ++j) {
      if (j > 0) csv += ',';
      csv += format_double(dataset.inputs(i, j));
    }
    csv += '\n';
  }
  write_text_file(dir / "inputs.csv", csv);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
  Dataset d;
  d.spec.family = family_from_name(meta.at("family").get<std::string>());
  d.spec.seed = meta.at("seed").get<std::uint64_t>();
  d.spec.sigma = matrix_from_json(meta.at("sigma"));
  d.pc0 = vector_from_json(meta.at("pc0"));
  d.w0 = vector_from_json(meta.at("w0"));
  const int n = meta.at("n").get<int>();
  const int m = meta.at("m").get<int>();

  const std::string csv = read_text_file(dir / "inputs.csv");
  std::istringstream lines(csv);
  std::string line;
  if (!std::getline(lines, line)) throw std::runtime_error("inputs.csv: missing header");
  Eigen::MatrixXd inputs(m, n);
  int row = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (row >= m) throw std::runtime_error("inputs.csv: more rows than meta.json declares");
    std::istringstream cells(line);
    std::string cell;
    for (int j = 0; j < n; ++j) {
      if (!std::getline(cells, cell, ','))
        throw std::runtime_error("inputs.csv: short row " + std::to_string(row));
      const auto value = parse_double(cell);
      if (!value) throw std::runtime_error("inputs.csv: bad number '" + cell + "'");
      inputs(row, j) = *value;
    }
    ++row;
  }
  if (row != m) throw std::runtime_error("inputs.csv: fewer rows than meta.json declares");
  d.inputs = std::move(inputs);
  return d;
}

}  // namespace plastigen
