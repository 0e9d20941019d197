#pragma once

// Readout training: ridge regression for the observed rows and Adam
// minimisation of the physics residual for the hidden rows.

#include "apiesn/ode.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace apiesn {

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves (R R^T + gamma I) W^T = R T^T with a Cholesky factorisation.
///
/// `features` is P x N (one sample per column) and `targets` is K x N; the
/// result is K x P. Throws FactorizationError when the system is not
/// numerically positive definite.
Eigen::MatrixXd ridge_solve(const Eigen::Ref<const Eigen::MatrixXd>& features,
                            const Eigen::Ref<const Eigen::MatrixXd>& targets, double gamma);

/// Output matrix split into the ridge-fitted observed rows and the trainable
/// hidden rows. Rows are ordered [observed; hidden] as in StateSplit.
struct ReadoutPartition {
  Eigen::MatrixXd observed_rows;
  Eigen::MatrixXd hidden_rows;

  Eigen::MatrixXd combined() const;
};

/// Fits observed rows against `observed_targets` (N_x x N_t) and hidden rows
/// against the constant `hbar`.
ReadoutPartition init_output_matrix(const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                    const Eigen::Ref<const Eigen::MatrixXd>& observed_targets,
                                    Eigen::Index n_hidden, double gamma, double hbar);

/// Column j: W_out d_j - f(W_out z_j), in [observed; hidden] row order.
/// `aug_states` (z) and `aug_tangents` (d) must have the same column count.
Eigen::MatrixXd physics_residuals(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents,
                                  const StateSplit& split, const SystemParams& p);

/// Mean over columns and rows of the squared residuals.
double physics_loss(const Eigen::Ref<const Eigen::MatrixXd>& residuals);

/// Gradient of physics_loss with respect to the hidden rows of `w_out`.
Eigen::MatrixXd physics_loss_grad(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                                  const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents,
                                  const StateSplit& split, const SystemParams& p);

/// Physics loss as a function of the hidden rows only.
///
/// Caches the (fixed) observed outputs and evaluates loss and gradient in a
/// single pass over the columns, which is what keeps training at N_r = 1000
/// and N_t = 10000 tractable. The referenced matrices must outlive the
/// objective.
class PhysicsObjective {
 public:
  PhysicsObjective(const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                   const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents,
                   const Eigen::MatrixXd& observed_rows, const StateSplit& split, const SystemParams& p);

  double value(const Eigen::MatrixXd& hidden_rows) const;
  double value_and_gradient(const Eigen::MatrixXd& hidden_rows, Eigen::MatrixXd& grad) const;

 private:
  double evaluate(const Eigen::MatrixXd& hidden_rows, Eigen::MatrixXd* grad) const;

  Eigen::Ref<const Eigen::MatrixXd> states_;
  Eigen::Ref<const Eigen::MatrixXd> tangents_;
  Eigen::MatrixXd observed_outputs_;
  Eigen::MatrixXd observed_derivs_;
  StateSplit split_;
  SystemParams params_;
};

struct TrainConfig {
  double initial_lr = 0.1;
  double lr_decay_factor = 0.1;
  int plateau_patience = 200;
  /// Relative improvement of the best loss that resets the plateau counter.
  double plateau_tolerance = 1e-3;
  double min_lr = 1e-4;
  int max_steps = 10000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double hbar = 10.0;

  void validate() const;
};

struct AdamState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  long step = 0;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::MatrixXd::Zero(rows, cols)), v(Eigen::MatrixXd::Zero(rows, cols)) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, Eigen::MatrixXd& params, const Eigen::MatrixXd& grad, double lr,
               const TrainConfig& cfg);

struct LossRecord {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

enum class StopReason { max_steps, min_lr };

struct TrainResult {
  /// Holds the best-loss hidden rows seen, not the last iterate.
  ReadoutPartition partition;
  std::vector<LossRecord> history;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  StopReason reason = StopReason::max_steps;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::vector<LossRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<LossRecord>& history() const { return history_; }

 private:
  std::vector<LossRecord> history_;
};

/// Full-batch Adam on the hidden rows with learning-rate decay on plateau.
///
/// When the best loss has not improved by `plateau_tolerance` (relative) for
/// `plateau_patience` steps, the weights are reset to the best snapshot, the
/// moments are cleared, and the rate is multiplied by `lr_decay_factor`.
/// Training stops once the rate would fall below `min_lr` or after
/// `max_steps` loss evaluations. Observed rows are never modified.
TrainResult train_hidden_rows(const ReadoutPartition& init, const Eigen::Ref<const Eigen::MatrixXd>& aug_states,
                              const Eigen::Ref<const Eigen::MatrixXd>& aug_tangents, const StateSplit& split,
                              const SystemParams& p, const TrainConfig& cfg);

}  // namespace apiesn
