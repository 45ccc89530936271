#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plastigen/plasticity.hpp"
#include "plastigen/tasks.hpp"

namespace test_support {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("plastigen_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline int count_lines(const std::string& text) {
  int lines = 0;
  for (const char c : text)
    if (c == '\n') ++lines;
  return lines;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary with the given argument string.
inline CliResult run_cli(const std::string& args) {
  static const std::string binary = PLASTIGEN_BIN_PATH;
  const TempDir io("cli_io");
  const auto out_path = io.path() / "out.txt";
  const auto err_path = io.path() / "err.txt";
  const std::string cmd =
      binary + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

// Independent Oja trainer: closed-form arithmetic, no expression machinery.
// Serves as the oracle for the plasticity and fitness paths.
inline Eigen::MatrixXd reference_oja_weights(const Eigen::MatrixXd& inputs,
                                             const Eigen::VectorXd& w0, double eta,
                                             const std::vector<int>& order) {
  const int m = static_cast<int>(inputs.rows());
  const int n = static_cast<int>(inputs.cols());
  Eigen::MatrixXd weights(m + 1, n);
  weights.row(0) = w0.transpose();
  Eigen::VectorXd w = w0;
  for (int i = 0; i < m; ++i) {
    double y = 0.0;
    for (int j = 0; j < n; ++j) y += w[j] * inputs(order[static_cast<std::size_t>(i)], j);
    Eigen::VectorXd next(n);
    for (int j = 0; j < n; ++j) {
      const double x = inputs(order[static_cast<std::size_t>(i)], j);
      next[j] = w[j] + eta * (y * (x - w[j] * y));
    }
    w = next;
    weights.row(i + 1) = w.transpose();
  }
  return weights;
}

// Direct trial-averaged score of a weight trajectory: |cos| minus the capped
// norm deviation.
inline double reference_score(const Eigen::MatrixXd& weights, const Eigen::VectorXd& pc0,
                              double alpha) {
  const int m = static_cast<int>(weights.rows()) - 1;
  double acc = 0.0;
  for (int i = 1; i <= m; ++i) {
    const Eigen::VectorXd w = weights.row(i).transpose();
    const double nrm = w.norm();
    double alignment = 0.0;
    double penalty = 1.0;
    if (nrm >= 1e-12) {
      alignment = std::abs(w.dot(pc0)) / nrm;
      penalty = std::min(std::abs(nrm - 1.0), 10.0);
    }
    acc += alignment - alpha * penalty;
  }
  return acc / m;
}

// Power iteration, used to cross-check eigenvector golden values.
inline Eigen::VectorXd power_iteration(const Eigen::MatrixXd& m, int iters = 10000) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
  for (int i = 0; i < iters; ++i) v = (m * v).normalized();
  const double scale = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0) v = -v;
      break;
    }
  }
  return v;
}

}  // namespace test_support
