#include "apiesn/dual.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace apiesn;

TEST_CASE("dual arithmetic") {
  CHECK(Dual{2, 3} * Dual{4, 5} == Dual{8, 22});
  CHECK(Dual{1, 0} + Dual{0, 1} == Dual{1, 1});
  CHECK(-1.0 * Dual{2.5, -4.0} == Dual{-2.5, 4.0});
  CHECK(Dual{5, 1} - Dual{2, 3} == Dual{3, -2});
}

TEST_CASE("dual tanh") {
  CHECK(tanh(Dual{0, 1}) == Dual{0, 1});
  CHECK(tanh(Dual{40, 1}).tangent == doctest::Approx(0.0));

  const double v = 0.7, h = 1e-6;
  const double fd = (std::tanh(v + h) - std::tanh(v - h)) / (2 * h);
  CHECK(std::abs(tanh(Dual{v, 1}).tangent - fd) < 1e-9);
}

TEST_CASE("tangent part obeys the ring axioms") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 200; ++k) {
    const Dual a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const Dual lhs = a * (b + c);
    const Dual rhs = a * b + a * c;
    CHECK(lhs.value == doctest::Approx(rhs.value).epsilon(1e-12));
    CHECK(lhs.tangent == doctest::Approx(rhs.tangent).epsilon(1e-12));
    CHECK(a * b == b * a);
    CHECK(a + b == b + a);
  }
}

namespace {

HyperParams small_hp(Eigen::Index n, std::uint64_t seed) {
  HyperParams hp;
  hp.n_reservoir = n;
  hp.avg_degree = std::min<double>(20.0, static_cast<double>(n));
  hp.seed = seed;
  return hp;
}

double rel_dev(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("dual reservoir step agrees with the closed-form tangent") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (Eigen::Index n : {10, 50, 200}) {
    for (int trial = 0; trial < 34; ++trial, ++cases) {
      const EsnWeights w = EsnWeights::build(small_hp(n, static_cast<std::uint64_t>(trial)), 2);
      Eigen::VectorXd r_prev(n), rdot_prev(n), x(2), xdot(2);
      for (Eigen::Index i = 0; i < n; ++i) {
        r_prev(i) = std::tanh(normal(rng));
        rdot_prev(i) = 5.0 * normal(rng);
      }
      x << 15.0 * normal(rng), 25.0 + 10.0 * normal(rng);
      xdot << 50.0 * normal(rng), 50.0 * normal(rng);

      const DualVector out = reservoir_step_dual(w, make_duals(r_prev, rdot_prev), make_duals(x, xdot));
      const Eigen::VectorXd r = step(w, r_prev, x);
      const Eigen::VectorXd rdot = step_tangent(w, r, rdot_prev, xdot);
      Eigen::VectorXd dual_value(n), dual_tangent(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        dual_value(i) = out[static_cast<std::size_t>(i)].value;
        dual_tangent(i) = out[static_cast<std::size_t>(i)].tangent;
      }
      // Same operations in the same order: values match bitwise.
      REQUIRE(dual_value == r);
      worst = std::max(worst, rel_dev(dual_tangent, rdot));
    }
  }
  MESSAGE(cases << " cases, max relative deviation " << worst);
  CHECK(cases >= 100);
  CHECK(worst < 1e-12);
}

TEST_CASE("dual reservoir step with zero tangents") {
  const EsnWeights w = EsnWeights::build(small_hp(30, 1), 3);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(30, 0.2);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 4.0);
  const DualVector out = reservoir_step_dual(w, make_duals(r, Eigen::VectorXd::Zero(30)),
                                             make_duals(x, Eigen::VectorXd::Zero(3)));
  for (const Dual& d : out) CHECK(d.tangent == 0.0);

  CHECK_THROWS_AS(reservoir_step_dual(w, DualVector(29), DualVector(3)), std::invalid_argument);
}
