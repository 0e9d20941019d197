#pragma once

// Lorenz system, fixed-step RK4 trajectory generation and Lyapunov
// exponent estimation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace apiesn {

using State = Eigen::Vector3d;
using Jacobian = Eigen::Matrix3d;

struct SystemParams {
  double sigma = 10.0;
  double beta = 8.0 / 3.0;
  double rho = 28.0;
};

State lorenz_rhs(const State& y, const SystemParams& p);
Jacobian lorenz_jacobian(const State& y, const SystemParams& p);

/// Anything with a right-hand side y' = rhs(y) on a three-dimensional state.
template <typename S>
concept OdeSystem = requires(const S& s, const State& y) {
  { s.rhs(y) } -> std::convertible_to<State>;
};

struct Lorenz {
  SystemParams params;

  State rhs(const State& y) const { return lorenz_rhs(y, params); }
  Jacobian jacobian(const State& y) const { return lorenz_jacobian(y, params); }
};

/// y' = -rate * y. Contracting; used as a non-chaotic reference.
struct LinearDecay {
  double rate = 1.0;

  State rhs(const State& y) const { return -rate * y; }
};

/// Runs an inner system `factor` times faster.
template <OdeSystem S>
struct TimeScaled {
  S inner;
  double factor = 1.0;

  State rhs(const State& y) const { return factor * inner.rhs(y); }
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniformly sampled states with their exact time derivatives.
///
/// `derivs.col(j)` is always the system right-hand side evaluated at
/// `states.col(j)`; it is never obtained by differencing the states.
struct Trajectory {
  double dt = 0.0;
  Eigen::Matrix3Xd states;
  Eigen::Matrix3Xd derivs;

  Eigen::Index size() const { return states.cols(); }
};

/// Ordered observed/hidden partition of the state components.
class StateSplit {
 public:
  /// Indices are zero-based. Throws std::invalid_argument on duplicates,
  /// out-of-range entries, or an empty observed set.
  static StateSplit from_observed(std::vector<int> observed, int n_state = 3);

  int n_state() const { return n_state_; }
  int n_observed() const { return static_cast<int>(observed_.size()); }
  int n_hidden() const { return static_cast<int>(hidden_.size()); }
  const std::vector<int>& observed() const { return observed_; }
  const std::vector<int>& hidden() const { return hidden_; }

  /// Position of natural component `k` in the [observed; hidden] ordering.
  int split_position(int k) const { return position_[static_cast<std::size_t>(k)]; }

  /// Reorders a [observed; hidden] vector into natural component order.
  State to_natural(const Eigen::Ref<const Eigen::VectorXd>& split_ordered) const;
  /// Reorders a natural-order state into [observed; hidden].
  Eigen::VectorXd to_split(const State& natural) const;

 private:
  int n_state_ = 0;
  std::vector<int> observed_;
  std::vector<int> hidden_;
  std::vector<int> position_;
};

/// Rows `indices` of `m`, in the given order.
Eigen::MatrixXd select_rows(const Eigen::Ref<const Eigen::MatrixXd>& m,
                            const std::vector<int>& indices);

/// Observed rows of the exact derivatives, N_x x N.
Eigen::MatrixXd exact_input_derivative(const Trajectory& traj, const StateSplit& split);
/// Observed rows of the states, N_x x N.
Eigen::MatrixXd observed_states(const Trajectory& traj, const StateSplit& split);

template <OdeSystem S>
State rk4_step(const S& sys, const State& y, double h) {
  const State k1 = sys.rhs(y);
  const State k2 = sys.rhs(y + 0.5 * h * k1);
  const State k3 = sys.rhs(y + 0.5 * h * k2);
  const State k4 = sys.rhs(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {
constexpr double kDivergenceBound = 1e12;

inline bool is_sane(const State& y) {
  return y.allFinite() && y.cwiseAbs().maxCoeff() < kDivergenceBound;
}
}  // namespace detail

/// Advances `y` by `dt` using `substeps` equal RK4 steps.
template <OdeSystem S>
State advance(const S& sys, State y, double dt, std::size_t substeps) {
  const double h = dt / static_cast<double>(substeps);
  for (std::size_t k = 0; k < substeps; ++k) y = rk4_step(sys, y, h);
  return y;
}

/// Samples n_steps + 1 states spaced by dt, after first discarding
/// `n_discard` samples of transient. Each sample is produced by `substeps`
/// RK4 steps of size dt / substeps.
template <OdeSystem S>
Trajectory integrate(const S& sys, State y0, double dt, std::size_t n_steps,
                     std::size_t substeps, std::size_t n_discard = 0) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrate: dt must be positive");
  if (substeps < 1) throw std::invalid_argument("integrate: substeps must be >= 1");
  if (!y0.allFinite()) throw std::invalid_argument("integrate: non-finite initial state");

  State y = y0;
  for (std::size_t i = 0; i < n_discard; ++i) {
    y = advance(sys, y, dt, substeps);
    if (!detail::is_sane(y)) {
      throw DivergenceError("integrate: trajectory diverged during transient at sample " +
                            std::to_string(i + 1));
    }
  }

  Trajectory traj;
  traj.dt = dt;
  const auto n_cols = static_cast<Eigen::Index>(n_steps + 1);
  traj.states.resize(3, n_cols);
  traj.derivs.resize(3, n_cols);
  traj.states.col(0) = y;
  traj.derivs.col(0) = sys.rhs(y);
  for (Eigen::Index j = 1; j < n_cols; ++j) {
    y = advance(sys, y, dt, substeps);
    if (!detail::is_sane(y)) {
      throw DivergenceError("integrate: trajectory diverged at sample " + std::to_string(j));
    }
    traj.states.col(j) = y;
    traj.derivs.col(j) = sys.rhs(y);
  }
  return traj;
}

inline Trajectory integrate(const SystemParams& p, const State& y0, double dt,
                            std::size_t n_steps, std::size_t substeps,
                            std::size_t n_discard = 0) {
  return integrate(Lorenz{p}, y0, dt, n_steps, substeps, n_discard);
}

struct LyapunovOptions {
  double separation = 1e-8;
  double renorm_interval = 1.0;
  double total_time = 5000.0;
  double discard_fraction = 0.1;
  double step = 0.01;
  /// Absolute difference allowed between the estimates over the two halves
  /// of the retained window before the run is reported as not converged.
  double tolerance = 0.02;
  State y0 = State(1.0, 1.0, 1.0);
};

struct LyapunovEstimate {
  double exponent = 0.0;
  double first_half = 0.0;
  double second_half = 0.0;
  std::size_t n_intervals = 0;
  bool converged = false;

  double lyapunov_time() const { return 1.0 / exponent; }
};

/// Benettin two-trajectory estimate of the leading Lyapunov exponent.
///
/// A companion trajectory starts `separation` away from the reference. After
/// every `renorm_interval` the log growth of the separation is recorded and
/// the companion is pulled back to distance `separation` along the current
/// separation direction. The first `discard_fraction` of intervals is
/// ignored as transient.
template <OdeSystem S>
LyapunovEstimate estimate_lyapunov(const S& sys, const LyapunovOptions& opt = {}) {
  if (!(opt.separation > 0.0) || !(opt.renorm_interval > 0.0) || !(opt.step > 0.0) ||
      !(opt.total_time >= opt.renorm_interval)) {
    throw std::invalid_argument("estimate_lyapunov: invalid options");
  }
  if (!(opt.discard_fraction >= 0.0 && opt.discard_fraction < 1.0)) {
    throw std::invalid_argument("estimate_lyapunov: discard_fraction must be in [0, 1)");
  }
  const auto n_intervals = static_cast<std::size_t>(std::floor(opt.total_time / opt.renorm_interval));
  const auto steps_per_interval =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.renorm_interval / opt.step)));
  const double h = opt.renorm_interval / static_cast<double>(steps_per_interval);

  State y = opt.y0;
  State z = y + opt.separation * State::Ones().normalized();
  std::vector<double> log_growth;
  log_growth.reserve(n_intervals);
  for (std::size_t k = 0; k < n_intervals; ++k) {
    for (std::size_t s = 0; s < steps_per_interval; ++s) {
      y = rk4_step(sys, y, h);
      z = rk4_step(sys, z, h);
    }
    if (!detail::is_sane(y) || !detail::is_sane(z)) {
      throw DivergenceError("estimate_lyapunov: trajectory diverged");
    }
    const State delta = z - y;
    const double dist = delta.norm();
    if (dist == 0.0) {
      // Trajectories merged to rounding: separation collapsed completely.
      log_growth.push_back(std::log(std::numeric_limits<double>::min() / opt.separation));
      z = y + opt.separation * State::Ones().normalized();
      continue;
    }
    log_growth.push_back(std::log(dist / opt.separation));
    z = y + (opt.separation / dist) * delta;
  }

  const auto first = static_cast<std::size_t>(std::floor(opt.discard_fraction * static_cast<double>(n_intervals)));
  const std::size_t kept = n_intervals - first;
  if (kept < 2) throw std::invalid_argument("estimate_lyapunov: run too short");
  const std::size_t mid = first + kept / 2;
  auto mean_rate = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = a; k < b; ++k) s += log_growth[k];
    return s / (static_cast<double>(b - a) * opt.renorm_interval);
  };

  LyapunovEstimate est;
  est.exponent = mean_rate(first, n_intervals);
  est.first_half = mean_rate(first, mid);
  est.second_half = mean_rate(mid, n_intervals);
  est.n_intervals = kept;
  est.converged = std::abs(est.first_half - est.second_half) <= opt.tolerance;
  return est;
}

inline LyapunovEstimate estimate_lyapunov(const SystemParams& p, const LyapunovOptions& opt = {}) {
  return estimate_lyapunov(Lorenz{p}, opt);
}

}  // namespace apiesn
