#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace plastigen {

/// Derives a child seed from (master_seed, purpose, index). Streams derived
/// with different purposes or indices never alias, so dataset generation,
/// mutation, initial weights etc. stay statistically independent.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view purpose,
                          std::uint64_t index = 0);

/// mt19937_64 engine with hand-rolled distributions. The engine output is
/// pinned by the C++ standard; std:: distributions are not, so frozen test
/// values stay valid across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). Unbiased (Lemire rejection).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  bool coin(double p_true = 0.5);

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates permutation of 0..n-1.
std::vector<int> random_permutation(int n, std::uint64_t seed);

}  // namespace plastigen
