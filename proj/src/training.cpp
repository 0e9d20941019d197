#include "apiesn/training.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace apiesn {

Eigen::MatrixXd ridge_solve(const Eigen::Ref<const Eigen::MatrixXd>& features,
                            const Eigen::Ref<const Eigen::MatrixXd>& targets, double gamma) {
  if (features.cols() < 1) throw std::invalid_argument("ridge_solve: need at least one sample");
  if (features.cols() != targets.cols()) throw std::invalid_argument("ridge_solve: sample count mismatch");
  if (!(gamma >= 0.0)) throw std::invalid_argument("ridge_solve: gamma must be non-negative");

  const Eigen::Index p = features.rows();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(features);
  gram.diagonal().array() += gamma;

  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("ridge_solve: normal matrix is not positive definite (gamma = " +
                             std::to_string(gamma) + ")");
  }
  const double rcond = llt.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    std::ostringstream msg;
    msg << "ridge_solve: normal matrix is numerically singular (reciprocal condition " << rcond << ")";
    throw FactorizationError(msg.str());
  }
  const Eigen::MatrixXd rhs = features * targets.transpose();
  return llt.solve(rhs).transpose();
}

Eigen::MatrixXd ReadoutPartition::combined() const {
  Eigen::MatrixXd w(observed_rows.rows() + hidden_rows.rows(), observed_rows.cols());
  w << observed_rows, hidden_rows;
  return w;
}

ReadoutPartition init_output_matrix(const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                    const Eigen::Ref<const Eigen::MatrixXd>& observed_targets,
                                    Eigen::Index n_hidden, double gamma, double hbar) {
  if (n_hidden < 0) throw std::invalid_argument("init_output_matrix: negative hidden count");
  // Both fits share the normal matrix, so they are solved as one system.
  const Eigen::Index n_x = observed_targets.rows();
  Eigen::MatrixXd targets(n_x + n_hidden, observed_targets.cols());
  targets.topRows(n_x) = observed_targets;
  targets.bottomRows(n_hidden).setConstant(hbar);
  const Eigen::MatrixXd w = ridge_solve(aug_states, targets, gamma);
  return {w.topRows(n_x), w.bottomRows(n_hidden)};
}

namespace {

void check_shapes(const Eigen::Ref<const Eigen::MatrixXd>& w_out, const Eigen::Ref<const Eigen::MatrixXd>& z,
                  const Eigen::Ref<const Eigen::MatrixXd>& d, const StateSplit& split) {
  if (w_out.rows() != split.n_state()) throw std::invalid_argument("physics: output rows do not match the split");
  if (w_out.cols() != z.rows() || z.rows() != d.rows()) {
    throw std::invalid_argument("physics: augmented vector length mismatch");
  }
  if (z.cols() != d.cols()) throw std::invalid_argument("physics: state and tangent column counts differ");
}

}  // namespace

Eigen::MatrixXd physics_residuals(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents, const StateSplit& split,
                                  const SystemParams& p) {
  check_shapes(w_out, aug_states, aug_tangents, split);
  const Eigen::MatrixXd y = w_out * aug_states;
  Eigen::MatrixXd res = w_out * aug_tangents;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    res.col(j) -= split.to_split(lorenz_rhs(split.to_natural(y.col(j)), p));
  }
  return res;
}

double physics_loss(const Eigen::Ref<const Eigen::MatrixXd>& residuals) {
  if (residuals.size() == 0) throw std::invalid_argument("physics_loss: empty residuals");
  return residuals.squaredNorm() / static_cast<double>(residuals.size());
}

Eigen::MatrixXd physics_loss_grad(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents, const StateSplit& split,
                                  const SystemParams& p) {
  check_shapes(w_out, aug_states, aug_tangents, split);
  const Eigen::MatrixXd y = w_out * aug_states;
  const Eigen::MatrixXd res = physics_residuals(w_out, aug_states, aug_tangents, split, p);

  // dL/dyhat_j = -c J_f(yhat_j)^T e_j, dL/dyhat_dot_j = c e_j.
  Eigen::MatrixXd jte(res.rows(), res.cols());
  for (Eigen::Index j = 0; j < res.cols(); ++j) {
    const State e = split.to_natural(res.col(j));
    const State g = lorenz_jacobian(split.to_natural(y.col(j)), p).transpose() * e;
    jte.col(j) = split.to_split(g);
  }
  const Eigen::Index n_h = split.n_hidden();
  const double c = 2.0 / static_cast<double>(res.size());
  return c * (res.bottomRows(n_h) * aug_tangents.transpose() - jte.bottomRows(n_h) * aug_states.transpose());
}

PhysicsObjective::PhysicsObjective(const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                   const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents,
                                   const Eigen::MatrixXd& observed_rows, const StateSplit& split,
                                   const SystemParams& p)
    : states_(aug_states), tangents_(aug_tangents), split_(split), params_(p) {
  if (states_.rows() != tangents_.rows() || states_.cols() != tangents_.cols()) {
    throw std::invalid_argument("PhysicsObjective: state and tangent shapes differ");
  }
  if (states_.cols() < 1) throw std::invalid_argument("PhysicsObjective: no columns");
  if (observed_rows.rows() != split.n_observed() || observed_rows.cols() != states_.rows()) {
    throw std::invalid_argument("PhysicsObjective: observed rows have the wrong shape");
  }
  observed_outputs_ = observed_rows * states_;
  observed_derivs_ = observed_rows * tangents_;
}

double PhysicsObjective::value(const Eigen::MatrixXd& hidden_rows) const { return evaluate(hidden_rows, nullptr); }

double PhysicsObjective::value_and_gradient(const Eigen::MatrixXd& hidden_rows, Eigen::MatrixXd& grad) const {
  return evaluate(hidden_rows, &grad);
}

double PhysicsObjective::evaluate(const Eigen::MatrixXd& hidden_rows, Eigen::MatrixXd* grad) const {
  const Eigen::Index n_x = split_.n_observed();
  const Eigen::Index n_h = split_.n_hidden();
  const Eigen::Index n_aug = states_.rows();
  const Eigen::Index n_t = states_.cols();
  if (hidden_rows.rows() != n_h || hidden_rows.cols() != n_aug) {
    throw std::invalid_argument("PhysicsObjective: hidden rows have the wrong shape");
  }

  // Column-major copies make each hidden row a contiguous vector.
  const Eigen::MatrixXd w = hidden_rows.transpose();
  Eigen::MatrixXd g;
  if (grad) g = Eigen::MatrixXd::Zero(n_aug, n_h);

  Eigen::VectorXd y(n_x + n_h), ydot(n_x + n_h);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n_t; ++j) {
    const auto z = states_.col(j);
    const auto d = tangents_.col(j);
    y.head(n_x) = observed_outputs_.col(j);
    ydot.head(n_x) = observed_derivs_.col(j);
    for (Eigen::Index k = 0; k < n_h; ++k) {
      y(n_x + k) = w.col(k).dot(z);
      ydot(n_x + k) = w.col(k).dot(d);
    }
    const State y_nat = split_.to_natural(y);
    const State e = split_.to_natural(ydot) - lorenz_rhs(y_nat, params_);
    total += e.squaredNorm();
    if (grad) {
      const State jte = lorenz_jacobian(y_nat, params_).transpose() * e;
      for (Eigen::Index k = 0; k < n_h; ++k) {
        const int comp = split_.hidden()[static_cast<std::size_t>(k)];
        g.col(k).noalias() += e(comp) * d - jte(comp) * z;
      }
    }
  }
  const double n = static_cast<double>(n_t) * static_cast<double>(split_.n_state());
  if (grad) *grad = (2.0 / n) * g.transpose();
  return total / n;
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("TrainConfig: initial_lr must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw std::invalid_argument("TrainConfig: lr_decay_factor must be in (0, 1)");
  }
  if (plateau_patience < 1) throw std::invalid_argument("TrainConfig: plateau_patience must be >= 1");
  if (!(plateau_tolerance >= 0.0)) throw std::invalid_argument("TrainConfig: plateau_tolerance must be >= 0");
  if (!(min_lr > 0.0)) throw std::invalid_argument("TrainConfig: min_lr must be positive");
  if (max_steps < 1) throw std::invalid_argument("TrainConfig: max_steps must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be positive");
  if (!std::isfinite(hbar)) throw std::invalid_argument("TrainConfig: hbar must be finite");
}

void adam_step(AdamState& state, Eigen::MatrixXd& params, const Eigen::MatrixXd& grad, double lr,
               const TrainConfig& cfg) {
  if (params.rows() != grad.rows() || params.cols() != grad.cols() || state.m.rows() != grad.rows() ||
      state.m.cols() != grad.cols()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

TrainResult train_hidden_rows(const ReadoutPartition& init, const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                              const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents, const StateSplit& split,
                              const SystemParams& p, const TrainConfig& cfg) {
  cfg.validate();
  const PhysicsObjective objective(aug_states, aug_tangents, init.observed_rows, split, p);

  TrainResult result;
  result.partition = init;
  result.history.reserve(static_cast<std::size_t>(cfg.max_steps));

  Eigen::MatrixXd hidden = init.hidden_rows;
  Eigen::MatrixXd grad;
  AdamState adam(hidden.rows(), hidden.cols());
  double lr = cfg.initial_lr;
  double best = std::numeric_limits<double>::infinity();
  double plateau_ref = best;
  int since_improvement = 0;

  for (int s = 0; s < cfg.max_steps; ++s) {
    const double loss = objective.value_and_gradient(hidden, grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw TrainingDivergence("train_hidden_rows: non-finite loss at step " + std::to_string(s),
                               std::move(result.history));
    }
    result.history.push_back({s, lr, loss});
    if (s == 0) result.initial_loss = loss;
    if (loss < best) {
      best = loss;
      result.partition.hidden_rows = hidden;
    }
    if (loss < plateau_ref * (1.0 - cfg.plateau_tolerance)) {
      plateau_ref = loss;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (since_improvement >= cfg.plateau_patience) {
      lr *= cfg.lr_decay_factor;
      if (lr < cfg.min_lr * (1.0 - 1e-9)) {
        result.reason = StopReason::min_lr;
        break;
      }
      hidden = result.partition.hidden_rows;
      adam = AdamState(hidden.rows(), hidden.cols());
      plateau_ref = best;
      since_improvement = 0;
      continue;
    }
    adam_step(adam, hidden, grad, lr, cfg);
  }
  result.best_loss = best;
  return result;
}

}  // namespace apiesn
