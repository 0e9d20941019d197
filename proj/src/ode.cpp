#include "apiesn/ode.hpp"

#include <algorithm>

namespace apiesn {

State lorenz_rhs(const State& y, const SystemParams& p) {
  return State(p.sigma * (y(1) - y(0)),
               y(0) * (p.rho - y(2)) - y(1),
               y(0) * y(1) - p.beta * y(2));
}

Jacobian lorenz_jacobian(const State& y, const SystemParams& p) {
  Jacobian j;
  j << -p.sigma, p.sigma, 0.0,
       p.rho - y(2), -1.0, -y(0),
       y(1), y(0), -p.beta;
  return j;
}

StateSplit StateSplit::from_observed(std::vector<int> observed, int n_state) {
  if (n_state < 1) throw std::invalid_argument("StateSplit: n_state must be positive");
  if (observed.empty()) throw std::invalid_argument("StateSplit: at least one observed component required");
  std::vector<bool> seen(static_cast<std::size_t>(n_state), false);
  for (int k : observed) {
    if (k < 0 || k >= n_state) {
      throw std::invalid_argument("StateSplit: observed index " + std::to_string(k) + " out of range");
    }
    if (seen[static_cast<std::size_t>(k)]) {
      throw std::invalid_argument("StateSplit: duplicate observed index " + std::to_string(k));
    }
    seen[static_cast<std::size_t>(k)] = true;
  }

  StateSplit s;
  s.n_state_ = n_state;
  s.observed_ = std::move(observed);
  for (int k = 0; k < n_state; ++k) {
    if (!seen[static_cast<std::size_t>(k)]) s.hidden_.push_back(k);
  }
  s.position_.assign(static_cast<std::size_t>(n_state), -1);
  int pos = 0;
  for (int k : s.observed_) s.position_[static_cast<std::size_t>(k)] = pos++;
  for (int k : s.hidden_) s.position_[static_cast<std::size_t>(k)] = pos++;
  return s;
}

State StateSplit::to_natural(const Eigen::Ref<const Eigen::VectorXd>& split_ordered) const {
  State y;
  for (int k = 0; k < n_state_; ++k) y(k) = split_ordered(position_[static_cast<std::size_t>(k)]);
  return y;
}

Eigen::VectorXd StateSplit::to_split(const State& natural) const {
  Eigen::VectorXd v(n_state_);
  for (int k = 0; k < n_state_; ++k) v(position_[static_cast<std::size_t>(k)]) = natural(k);
  return v;
}

Eigen::MatrixXd select_rows(const Eigen::Ref<const Eigen::MatrixXd>& m,
                            const std::vector<int>& indices) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(indices[i]);
  }
  return out;
}

Eigen::MatrixXd exact_input_derivative(const Trajectory& traj, const StateSplit& split) {
  if (split.n_state() != traj.derivs.rows()) {
    throw std::invalid_argument("exact_input_derivative: split does not match trajectory");
  }
  return select_rows(traj.derivs, split.observed());
}

Eigen::MatrixXd observed_states(const Trajectory& traj, const StateSplit& split) {
  if (split.n_state() != traj.states.rows()) {
    throw std::invalid_argument("observed_states: split does not match trajectory");
  }
  return select_rows(traj.states, split.observed());
}

}  // namespace apiesn
