#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "plastigen/plasticity.hpp"
#include "support.hpp"

using namespace plastigen;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Dataset diag_dataset(double v1, double v2, int m, std::uint64_t seed) {
  CovarianceSpec spec;
  spec.sigma = Eigen::MatrixXd::Zero(2, 2);
  spec.sigma(0, 0) = v1;
  spec.sigma(1, 1) = v2;
  spec.family = Family::T2;
  spec.seed = seed;
  return generate_dataset(spec, m, derive_seed(seed, "data", 0));
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_SUITE_BEGIN("plasticity");

TEST_CASE("builtin kernels match the closed forms") {
  const PlasticityRule oja = builtin_rule("oja");
  CHECK(oja.kernel.evaluate(0.2, 1.0, 0.2) == doctest::Approx(0.192).epsilon(1e-14));

  const PlasticityRule lr2 = builtin_rule("lr2");
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double w = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    CHECK(std::abs(lr2.kernel.evaluate(w, x, y) - 2.0 * oja.kernel.evaluate(w, x, y)) <= 1e-12);
  }

  const PlasticityRule lr4 = builtin_rule("lr4");
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    CHECK(lr4.kernel.evaluate(0.0, x, y) == doctest::Approx(y * x).epsilon(1e-14));
  }
}

TEST_CASE("builtin rejects unknown names listing the valid ones") {
  CHECK_THROWS_WITH_AS(builtin_rule("hebb"), doctest::Contains("oja, lr1, lr2, lr3, lr4"),
                       std::invalid_argument);
  CHECK(builtin_rule_names().size() == 5);
}

TEST_CASE("forward is a plain dot product") {
  CHECK(forward(vec2(1, 0), vec2(3, 5)) == 3.0);
  CHECK(forward(vec2(0.6, 0.8), vec2(0.6, 0.8)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(forward(vec2(1, 1), vec2(2, -2)) == 0.0);
  Eigen::VectorXd w3(3);
  w3 << 1, 2, 3;
  CHECK_THROWS_AS(forward(w3, vec2(1, 2)), std::invalid_argument);
}

TEST_CASE("null rule leaves the weights untouched") {
  const Dataset ds = make_dataset(Family::T0, 2, 200, 31);
  const PlasticityRule null_rule{parse_rule("0.0"), "null"};
  const auto order = presentation_order(200, 5);
  const WeightTrajectory traj = train(null_rule, ds, ds.w0, 0.01, order);
  CHECK((traj.weights.row(200).transpose() - ds.w0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(traj.diverged_at.has_value());
}

TEST_CASE("Oja converges to the dominant axis") {
  const Dataset ds = diag_dataset(1.0, 0.1, 1000, 67);
  // w0 near the weak axis, slightly rotated off it
  const Eigen::VectorXd w0 = vec2(std::sin(0.1), std::cos(0.1));
  const auto order = presentation_order(1000, 9);
  const WeightTrajectory traj = train(builtin_rule("oja"), ds, w0, 0.01, order);
  const Eigen::VectorXd w_final = traj.weights.row(1000).transpose();
  CHECK(std::abs(w_final[0]) / w_final.norm() > 0.99);
  CHECK(std::abs(w_final.norm() - 1.0) < 0.05);
}

TEST_CASE("training is deterministic given the seed chain") {
  const Dataset a = make_dataset(Family::T0, 2, 300, 12);
  const Dataset b = make_dataset(Family::T0, 2, 300, 12);
  const auto order = presentation_order(300, derive_seed(12, "order", 0));
  const WeightTrajectory ta = train(builtin_rule("oja"), a, a.w0, 0.01, order);
  const WeightTrajectory tb = train(builtin_rule("oja"), b, b.w0, 0.01, order);
  CHECK(bitwise_equal(ta.weights, tb.weights));
  CHECK(bitwise_equal(ta.outputs, tb.outputs));
}

TEST_CASE("train agrees with the independent Oja oracle") {
  const Dataset ds = make_dataset(Family::T0, 2, 500, 44);
  const auto order = presentation_order(500, 3);
  const WeightTrajectory traj = train(builtin_rule("oja"), ds, ds.w0, 0.01, order);
  const Eigen::MatrixXd expected =
      test_support::reference_oja_weights(ds.inputs, ds.w0, 0.01, order);
  CHECK((traj.weights - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("every dataset row is presented exactly once") {
  // Kernel "x" makes the recovered input (w_{i+1} - w_i) / eta per trial.
  const Dataset ds = make_dataset(Family::T0, 2, 128, 21);
  const PlasticityRule probe{parse_rule("x"), "probe"};
  const auto order = presentation_order(128, 77);
  const WeightTrajectory traj = train(probe, ds, ds.w0, 0.5, order);
  std::vector<std::pair<double, double>> presented;
  std::vector<std::pair<double, double>> rows;
  for (int i = 0; i < 128; ++i) {
    const Eigen::VectorXd dw =
        (traj.weights.row(i + 1) - traj.weights.row(i)).transpose() / 0.5;
    presented.emplace_back(dw[0], dw[1]);
    rows.emplace_back(ds.inputs(i, 0), ds.inputs(i, 1));
  }
  std::sort(presented.begin(), presented.end());
  std::sort(rows.begin(), rows.end());
  for (int i = 0; i < 128; ++i) {
    CHECK(presented[i].first == doctest::Approx(rows[i].first).epsilon(1e-12));
    CHECK(presented[i].second == doctest::Approx(rows[i].second).epsilon(1e-12));
  }
}

TEST_CASE("Oja keeps the weight norm near one in the long run") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset ds = make_dataset(Family::T0, 2, 1000, derive_seed(900, "norm-check", seed));
    const auto order = presentation_order(1000, derive_seed(ds.spec.seed, "order", 0));
    const WeightTrajectory traj = train(builtin_rule("oja"), ds, ds.w0, 0.01, order);
    REQUIRE_FALSE(traj.diverged_at.has_value());
    for (int i = 501; i <= 1000; ++i) {
      const double nrm = traj.weights.row(i).norm();
      CHECK(std::abs(nrm - 1.0) <= 0.1);
    }
  }
}

TEST_CASE("train validates its contract") {
  const Dataset ds = make_dataset(Family::T0, 2, 100, 1);
  const auto order = presentation_order(100, 2);
  CHECK_THROWS_AS(train(builtin_rule("oja"), ds, vec2(1.0, 1.0), 0.01, order),
                  std::invalid_argument);
  CHECK_THROWS_AS(train(builtin_rule("oja"), ds, ds.w0, 0.0, order), std::invalid_argument);
  std::vector<int> bad(100, 0);
  CHECK_THROWS_AS(train(builtin_rule("oja"), ds, ds.w0, 0.01, bad), std::invalid_argument);
  auto short_order = order;
  short_order.pop_back();
  CHECK_THROWS_AS(train(builtin_rule("oja"), ds, ds.w0, 0.01, short_order),
                  std::invalid_argument);
}

TEST_CASE("divergent rules freeze the trajectory instead of throwing") {
  const Dataset ds = make_dataset(Family::T0, 2, 1000, 8);
  const PlasticityRule cubic{parse_rule("y*y*y"), "cubic"};
  const auto order = presentation_order(1000, 4);
  const WeightTrajectory traj = train(cubic, ds, ds.w0, 0.01, order);
  REQUIRE(traj.diverged_at.has_value());
  const int at = *traj.diverged_at;
  CHECK(at >= 1);
  CHECK(at <= 1000);
  // frozen rows replicate the diverged row
  for (int i = at; i <= 1000; ++i)
    CHECK(bitwise_equal(traj.weights.row(i), traj.weights.row(at)));
  CHECK_FALSE(traj.weights.row(at).allFinite());
}

TEST_CASE("trajectory CSV export round-trips through the header") {
  const Dataset ds = make_dataset(Family::T0, 2, 5, 3);
  const auto order = presentation_order(5, 6);
  const WeightTrajectory traj = train(builtin_rule("oja"), ds, ds.w0, 0.01, order);
  test_support::TempDir dir("traj");
  traj.save_csv(dir.path() / "traj.csv");
  const std::string text = test_support::read_file(dir.path() / "traj.csv");
  CHECK(text.starts_with("trial,w_0,w_1,y\n"));
  CHECK(test_support::count_lines(text) == 7);  // header + M+1 rows
}

TEST_SUITE_END();
