#include "apiesn/ode.hpp"
#include "apiesn/reservoir.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace apiesn;

namespace {

SparseMatrix sparse_from(const Eigen::MatrixXd& dense) { return dense.sparseView(); }

HyperParams hp_with(Eigen::Index n, std::uint64_t seed) {
  HyperParams hp;
  hp.n_reservoir = n;
  hp.avg_degree = std::min<double>(20.0, static_cast<double>(n));
  hp.seed = seed;
  return hp;
}

double dense_radius(const SparseMatrix& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(m), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Smooth synthetic input: sinusoids with their exact derivatives.
void sinusoid_inputs(Eigen::Index n, double dt, Eigen::MatrixXd& x, Eigen::MatrixXd& xdot) {
  x.resize(2, n);
  xdot.resize(2, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) * dt;
    x(0, j) = 8.0 * std::sin(1.3 * t);
    x(1, j) = 5.0 * std::cos(0.7 * t) + 2.0;
    xdot(0, j) = 8.0 * 1.3 * std::cos(1.3 * t);
    xdot(1, j) = -5.0 * 0.7 * std::sin(0.7 * t);
  }
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  hp.avg_degree = 101;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.sigma_in = 0.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.tikhonov = -1.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("input matrix") {
  HyperParams hp = hp_with(500, 4);
  const SparseMatrix a = build_input_matrix(hp, 3);
  REQUIRE(a.rows() == 500);
  REQUIRE(a.cols() == 4);
  std::vector<int> per_column(4, 0);
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    int nnz = 0;
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      ++nnz;
      ++per_column[static_cast<std::size_t>(it.col())];
      CHECK(std::abs(it.value()) <= 0.1);
    }
    REQUIRE(nnz == 1);
  }
  // Every column, including the bias column, gets a share of the rows.
  for (int c : per_column) CHECK(c > 60);

  const SparseMatrix b = build_input_matrix(hp, 3);
  CHECK(Eigen::MatrixXd(a) == Eigen::MatrixXd(b));
  hp.seed = 5;
  CHECK(Eigen::MatrixXd(a) != Eigen::MatrixXd(build_input_matrix(hp, 3)));
}

TEST_CASE("spectral radius estimate on known matrices") {
  const SpectralRadius id = spectral_radius_estimate(sparse_from(Eigen::MatrixXd::Identity(5, 5)));
  CHECK(id.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.converged);

  const SpectralRadius diag = spectral_radius_estimate(sparse_from(Eigen::Vector3d(3, -1, 0.5).asDiagonal()));
  CHECK(diag.value == doctest::Approx(3.0).epsilon(1e-8));

  Eigen::MatrixXd rot(2, 2);
  rot << 0, 1, -1, 0;
  const SpectralRadius r = spectral_radius_estimate(sparse_from(rot));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-8));

  CHECK_THROWS_AS(spectral_radius_estimate(SparseMatrix(2, 3)), std::invalid_argument);
}

TEST_CASE("spectral radius estimate agrees with a dense eigensolver") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd m(40, 40);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
    const SpectralRadius est = spectral_radius_estimate(sparse_from(m), 1e-12, 200, 30, seed);
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(dense_radius(sparse_from(m))).epsilon(1e-10));
  }
}

TEST_CASE("rescaling to a target radius") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 0.5, 0.5, 0;
  const Eigen::MatrixXd scaled(rescale_to_radius(sparse_from(m), 0.9));
  Eigen::MatrixXd want(2, 2);
  want << 0, 0.9, 0.9, 0;
  CHECK((scaled - want).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(rescale_to_radius(SparseMatrix(3, 3), 0.9), NumericalError);
}

TEST_CASE("state matrix at the reference size") {
  const HyperParams hp = hp_with(1000, 0);
  const SparseMatrix w = build_state_matrix(hp);
  REQUIRE(w.rows() == 1000);
  const double mean_degree = static_cast<double>(w.nonZeros()) / 1000.0;
  MESSAGE("mean row degree " << mean_degree);
  CHECK(mean_degree >= 18.0);
  CHECK(mean_degree <= 22.0);

  const SpectralRadius est = spectral_radius_estimate(w, 1e-12, 200, 80, 99);
  CHECK(est.value == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("state matrix radius matches a dense eigensolver") {
  const SparseMatrix w = build_state_matrix(hp_with(200, 3));
  CHECK(dense_radius(w) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(Eigen::MatrixXd(w) == Eigen::MatrixXd(build_state_matrix(hp_with(200, 3))));
}

TEST_CASE("step") {
  const Eigen::Index n = 50;
  HyperParams hp = hp_with(n, 2);
  hp.b_in = 0.0;
  const EsnWeights zero_bias = EsnWeights::build(hp, 3);
  CHECK(step(zero_bias, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(3)).cwiseAbs().maxCoeff() == 0.0);

  const EsnWeights w = EsnWeights::build(hp_with(n, 2), 3);
  const Eigen::VectorXd r = step(w, Eigen::VectorXd::Constant(n, 0.99), Eigen::Vector3d(300, -300, 300));
  CHECK(r.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(r.allFinite());

  CHECK_THROWS_AS(step(w, Eigen::VectorXd::Zero(n + 1), Eigen::VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(step(w, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("step tangent") {
  const Eigen::Index n = 40;
  const EsnWeights w = EsnWeights::build(hp_with(n, 6), 2);
  const Eigen::VectorXd r = step(w, Eigen::VectorXd::Constant(n, 0.3), Eigen::Vector2d(1, 2));
  CHECK(step_tangent(w, r, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(step_tangent(w, r, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("tangent matches a finite difference along the input history") {
  // Shifting the whole input history by delta * xdot moves the final state by
  // delta * rdot + O(delta^2); the central difference removes the even terms.
  const Eigen::Index n = 100, n_cols = 400;
  const EsnWeights w = EsnWeights::build(hp_with(n, 8), 2);
  Eigen::MatrixXd x, xdot;
  sinusoid_inputs(n_cols, 0.05, x, xdot);

  const ReservoirRun run = run_teacher_forced(w, x, xdot, n_cols - 1);
  REQUIRE(run.size() == 1);
  const Eigen::VectorXd rdot = run.tangents.col(0).head(n);

  auto fd_error = [&](double delta) {
    const ReservoirRun up = run_teacher_forced(w, x + delta * xdot, xdot, n_cols - 1);
    const ReservoirRun down = run_teacher_forced(w, x - delta * xdot, xdot, n_cols - 1);
    const Eigen::VectorXd fd = (up.states.col(0) - down.states.col(0)).head(n) / (2.0 * delta);
    return (fd - rdot).norm() / rdot.norm();
  };
  const double e4 = fd_error(1e-4);
  const double e5 = fd_error(1e-5);
  MESSAGE("relative fd error: delta=1e-4 " << e4 << ", delta=1e-5 " << e5);
  CHECK(e4 < 1e-6);
  CHECK(e5 < 1e-7);
  CHECK(e5 < e4 / 20.0);
}

TEST_CASE("teacher-forced run") {
  const Eigen::Index n = 60;
  const EsnWeights w = EsnWeights::build(hp_with(n, 1), 2);
  Eigen::MatrixXd x, xdot;
  sinusoid_inputs(300, 0.02, x, xdot);

  SUBCASE("washout over every column leaves nothing") {
    const ReservoirRun run = run_teacher_forced(w, x, xdot, 300);
    CHECK(run.size() == 0);
    CHECK(run.states.rows() == w.augmented_size());
  }

  SUBCASE("augmented rows") {
    const ReservoirRun run = run_teacher_forced(w, x, xdot, 100);
    REQUIRE(run.size() == 200);
    CHECK((run.states.row(n + 2).array() == 1.0).all());
    CHECK((run.tangents.row(n + 2).array() == 0.0).all());
    CHECK(run.states.middleRows(n, 2) == x.rightCols(200));
    CHECK(run.tangents.middleRows(n, 2) == xdot.rightCols(200));
    CHECK(run.states.topRows(n).cwiseAbs().maxCoeff() < 1.0);
  }

  SUBCASE("constant input has zero tangents") {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 150, 3.0);
    const ReservoirRun run = run_teacher_forced(w, c, Eigen::MatrixXd::Zero(2, 150), 20);
    CHECK(run.tangents.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("deterministic") {
    const ReservoirRun a = run_teacher_forced(w, x, xdot, 50);
    const ReservoirRun b = run_teacher_forced(EsnWeights::build(hp_with(n, 1), 2), x, xdot, 50);
    CHECK(a.states == b.states);
    CHECK(a.tangents == b.tangents);
  }

  SUBCASE("echo state property") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::VectorXd r0(n);
    for (Eigen::Index i = 0; i < n; ++i) r0(i) = u(rng);
    const ReservoirRun from_zero = run_teacher_forced(w, x, xdot, 250);
    const ReservoirRun from_random = run_teacher_forced(w, x, xdot, 250, r0);
    CHECK((from_zero.states - from_random.states).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((from_zero.tangents - from_random.tangents).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("bad shapes") {
    CHECK_THROWS_AS(run_teacher_forced(w, x, xdot.leftCols(10), 0), std::invalid_argument);
    CHECK_THROWS_AS(run_teacher_forced(w, x, xdot, 301), std::invalid_argument);
    CHECK_THROWS_AS(run_teacher_forced(w, x.topRows(1), xdot.topRows(1), 0), std::invalid_argument);
  }

  SUBCASE("non-finite input is reported") {
    Eigen::MatrixXd bad = x;
    bad(0, 123) = NAN;
    CHECK_THROWS_AS(run_teacher_forced(w, bad, xdot, 0), NumericalError);
  }
}

TEST_CASE("readout") {
  const Eigen::VectorXd z = (Eigen::VectorXd(5) << 0.1, -0.2, 3.0, 4.0, 1.0).finished();
  CHECK(readout(Eigen::MatrixXd::Zero(3, 5), z).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd bias_only = Eigen::MatrixXd::Zero(2, 5);
  bias_only.col(4) << 7.0, -1.0;
  CHECK(readout(bias_only, z) == Eigen::Vector2d(7.0, -1.0));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd w_out(3, 5);
  for (Eigen::Index i = 0; i < w_out.size(); ++i) w_out(i) = u(rng);
  Eigen::VectorXd a = z, b = z;
  a(4) = 0.0;
  b(4) = 0.0;
  b.head(4) *= -0.5;
  CHECK((readout(w_out, a + b) - readout(w_out, a) - readout(w_out, b)).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(readout(w_out, Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("readout derivative") {
  Eigen::MatrixXd w_out = Eigen::MatrixXd::Ones(2, 4);
  CHECK(readout_derivative(w_out, Eigen::VectorXd::Zero(4)).cwiseAbs().maxCoeff() == 0.0);

  // Bias column never contributes to the derivative.
  Eigen::MatrixXd big_bias = w_out;
  big_bias.col(3).setConstant(1e6);
  const Eigen::Vector4d d(1, 2, 3, 0);
  CHECK(readout_derivative(w_out, d) == readout_derivative(big_bias, d));
  CHECK(readout_derivative(w_out, d) == Eigen::Vector2d(6, 6));

  CHECK_THROWS_AS(readout_derivative(w_out, Eigen::Vector4d(1, 2, 3, 1)), std::invalid_argument);
}

TEST_CASE("forward-Euler output derivative") {
  const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(2, 10, 4.5);
  CHECK(fe_output_derivative(constant, 0.1).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd linear(1, 20);
  for (Eigen::Index j = 0; j < 20; ++j) linear(0, j) = 2.0 + 3.0 * 0.25 * static_cast<double>(j);
  const Eigen::MatrixXd slope = fe_output_derivative(linear, 0.25);
  REQUIRE(slope.cols() == 19);
  CHECK((slope.array() - 3.0).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(fe_output_derivative(Eigen::MatrixXd::Zero(2, 1), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(fe_output_derivative(constant, 0.0), std::invalid_argument);

  SUBCASE("fe tangents commute with the readout") {
    const EsnWeights w = EsnWeights::build(hp_with(30, 2), 2);
    Eigen::MatrixXd x, xdot;
    sinusoid_inputs(100, 0.05, x, xdot);
    const ReservoirRun run = run_teacher_forced(w, x, xdot, 20);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd w_out(2, w.augmented_size());
    for (Eigen::Index i = 0; i < w_out.size(); ++i) w_out(i) = u(rng);
    const Eigen::MatrixXd via_tangents = w_out * fe_tangents(run.states, 0.05);
    const Eigen::MatrixXd via_outputs = fe_output_derivative(w_out * run.states, 0.05);
    CHECK((via_tangents - via_outputs).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fe_tangents(run.states, 0.05).bottomRows(1).array() == 0.0).all());
  }
}

TEST_CASE("forward-Euler error is first order in the sampling step") {
  // Same network and readout driven by one Lorenz orbit sampled at dt and dt/2
  // over the same time window: the FE error against the exact output
  // derivative should halve.
  const SystemParams p;
  const double dt = 0.01;
  const double horizon = 40.0;
  const EsnWeights w = EsnWeights::build(hp_with(200, 0), 3);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd w_out(3, w.augmented_size());
  for (Eigen::Index i = 0; i < w_out.size(); ++i) w_out(i) = u(rng);

  auto fe_error = [&](double h, int substeps) {
    const auto n_steps = static_cast<Eigen::Index>(std::lround(horizon / h));
    const auto discard = static_cast<Eigen::Index>(std::lround(10.0 / h));
    const Trajectory traj = integrate(p, State(1, 1, 1), h, n_steps, substeps, discard);
    const Eigen::Index washout = n_steps / 4;
    const ReservoirRun run = run_teacher_forced(w, traj.states, traj.derivs, washout);
    const Eigen::MatrixXd fe = fe_output_derivative(w_out * run.states, h);
    const Eigen::MatrixXd exact = (w_out * run.tangents).leftCols(fe.cols());
    return std::sqrt((fe - exact).squaredNorm() / static_cast<double>(fe.cols()));
  };
  const double coarse = fe_error(dt, 10);
  const double fine = fe_error(dt / 2.0, 5);
  MESSAGE("rms FE error " << coarse << " -> " << fine << ", ratio " << coarse / fine);
  CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("weights constructor validation") {
  CHECK_THROWS_AS(EsnWeights(SparseMatrix(3, 2), SparseMatrix(3, 4), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(EsnWeights(SparseMatrix(4, 2), SparseMatrix(3, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(EsnWeights(SparseMatrix(3, 1), SparseMatrix(3, 3), 1.0), std::invalid_argument);
}
