#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <Eigen/Dense>

#include "plastigen/rng.hpp"

namespace plastigen {

enum class Family { T0, T1, T2 };

std::string_view family_name(Family family);
Family family_from_name(std::string_view name);

/// Covariance matrix of a task, tagged with the family and the seed that
/// produced it. The seed reconstructs the whole dataset deterministically.
struct CovarianceSpec {
  Eigen::MatrixXd sigma;
  Family family = Family::T0;
  std::uint64_t seed = 0;
};

/// Symmetry within 1e-12, positive definiteness and an eigengap
/// lambda1/lambda2 >= 1.1; throws std::invalid_argument otherwise.
void validate_covariance(const CovarianceSpec& spec);

/// Draws a covariance from the family. Eigenvalues are uniform(0.1, 2.0),
/// redrawn until the eigengap holds. T0 pairs them with a Haar-random
/// orthonormal basis; T1 aligns the top eigenvector with a random signed
/// diagonal perturbed by at most 5 degrees; T2 is diagonal with the top
/// eigenvalue on a random axis.
CovarianceSpec sample_covariance(Family family, int n, std::uint64_t seed);

/// Unit top eigenvector of sigma, first nonzero component positive.
/// Throws on eigengap below 1.1.
Eigen::VectorXd principal_component(const CovarianceSpec& spec);

/// Top eigenvector with the sign convention but no validation; exact basis
/// vector for exactly-diagonal matrices.
Eigen::VectorXd top_eigenvector(const Eigen::MatrixXd& m);

/// Which covariance the reference PC0 is computed from: the generating sigma
/// (default) or the empirical covariance of the sampled inputs.
enum class PcReference { Generator, Empirical };

struct Dataset {
  Eigen::MatrixXd inputs;  // M x n
  CovarianceSpec spec;
  Eigen::VectorXd pc0;
  Eigen::VectorXd w0;

  int sample_count() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

/// M iid draws x = L z with L the lower Cholesky factor of spec.sigma and z
/// standard normal; attaches pc0 and a w0 drawn uniformly on the unit sphere.
Dataset generate_dataset(const CovarianceSpec& spec, int m, std::uint64_t seed,
                         PcReference ref = PcReference::Generator);

/// sample_covariance + generate_dataset with the data seed derived from the
/// dataset seed, so (family, n, m, seed) pins the dataset completely.
Dataset make_dataset(Family family, int n, int m, std::uint64_t seed,
                     PcReference ref = PcReference::Generator);

/// Directory format: meta.json {family, seed, n, m, sigma, pc0, w0} plus
/// inputs.csv with one row per sample.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace plastigen
