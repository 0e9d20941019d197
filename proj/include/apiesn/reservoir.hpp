#pragma once

// Echo state network reservoir: fixed random weights, teacher-forced state
// evolution, and exact propagation of the reservoir time derivative.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>

namespace apiesn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct HyperParams {
  Eigen::Index n_reservoir = 100;
  double sigma_in = 0.1;
  double b_in = 10.0;
  double avg_degree = 20.0;
  double spectral_radius = 0.9;
  double tikhonov = 1e-6;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument if any field is out of its valid range.
  void validate() const;
};

/// Independent, reproducible random stream `stream` derived from `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

// Substream ids used during construction.
inline constexpr std::uint64_t kInputStream = 1;
inline constexpr std::uint64_t kPowerIterationStream = 2;
inline constexpr std::uint64_t kStateStreamBase = 16;

struct SpectralRadius {
  double value = 0.0;
  int iterations = 0;  // Arnoldi cycles used
  bool converged = false;
};

/// Spectral radius of a square matrix by restarted Arnoldi iteration.
///
/// Builds a Krylov basis of dimension `krylov_dim` from a random start,
/// takes the largest-modulus eigenvalue of the projected Hessenberg matrix,
/// and restarts from its Ritz vector until two successive estimates agree to
/// relative `tol`. Complex dominant pairs are handled exactly by the
/// projection, which plain power iteration cannot do.
SpectralRadius spectral_radius_estimate(const SparseMatrix& m, double tol = 1e-12, int max_restarts = 200,
                                        int krylov_dim = 80, std::uint64_t seed = 0);

/// Returns `m` scaled so its estimated spectral radius is `target`.
SparseMatrix rescale_to_radius(const SparseMatrix& m, double target, std::uint64_t seed = 0);

/// N_r x (N_x + 1) input matrix, one nonzero per row. The last column
/// multiplies the input bias.
SparseMatrix build_input_matrix(const HyperParams& hp, Eigen::Index n_x);

/// N_r x N_r Erdos-Renyi state matrix scaled to the target spectral radius.
SparseMatrix build_state_matrix(const HyperParams& hp);

/// Fixed input and state matrices of one network. Immutable once built.
class EsnWeights {
 public:
  EsnWeights(SparseMatrix w_in, SparseMatrix w, double b_in);

  static EsnWeights build(const HyperParams& hp, Eigen::Index n_x);

  const SparseMatrix& w_in() const { return w_in_; }
  const SparseMatrix& w() const { return w_; }
  double b_in() const { return b_in_; }
  Eigen::Index n_reservoir() const { return w_.rows(); }
  Eigen::Index n_input() const { return w_in_.cols() - 1; }
  /// Length of [r; x; 1].
  Eigen::Index augmented_size() const { return n_reservoir() + n_input() + 1; }

 private:
  SparseMatrix w_in_;
  SparseMatrix w_;
  double b_in_;
};

/// r = tanh(W_in [x; b_in] + W r_prev).
Eigen::VectorXd step(const EsnWeights& weights, const Eigen::Ref<const Eigen::VectorXd>& r_prev,
                     const Eigen::Ref<const Eigen::VectorXd>& x);

/// Time derivative of the state returned by `step`:
/// (1 - r .* r) .* (W_in_x xdot + W rdot_prev), where W_in_x drops the bias
/// column.
Eigen::VectorXd step_tangent(const EsnWeights& weights,
                             const Eigen::Ref<const Eigen::VectorXd>& r_new,
                             const Eigen::Ref<const Eigen::VectorXd>& rdot_prev,
                             const Eigen::Ref<const Eigen::VectorXd>& xdot);

/// Recorded columns of a teacher-forced run.
///
/// states.col(j) = [r(t_j); x(t_j); 1], tangents.col(j) = [rdot(t_j); xdot(t_j); 0].
struct ReservoirRun {
  Eigen::MatrixXd states;
  Eigen::MatrixXd tangents;

  Eigen::Index size() const { return states.cols(); }
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Drives the reservoir with the columns of `inputs`, propagating the
/// tangent with `input_derivs`. State and tangent start at zero (or at
/// `initial_state`, with zero tangent) before the first column. The first
/// `n_washout` columns are not recorded.
ReservoirRun run_teacher_forced(const EsnWeights& weights, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                const Eigen::Ref<const Eigen::MatrixXd>& input_derivs,
                                Eigen::Index n_washout,
                                const std::optional<Eigen::VectorXd>& initial_state = std::nullopt);

/// yhat = W_out [r; x; 1].
Eigen::VectorXd readout(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                        const Eigen::Ref<const Eigen::VectorXd>& aug_state);

/// Exact output derivative W_out [rdot; xdot; 0].
Eigen::VectorXd readout_derivative(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_tangent);

/// Forward-Euler output derivative: column i is (y_{i+1} - y_i) / dt.
Eigen::MatrixXd fe_output_derivative(const Eigen::Ref<const Eigen::MatrixXd>& outputs, double dt);

/// Forward differences of the augmented states, (N_r+N_x+1) x (N_t-1). By
/// linearity of the readout, W_out times this equals fe_output_derivative of
/// the outputs. The constant row differences to zero.
Eigen::MatrixXd fe_tangents(const Eigen::Ref<const Eigen::MatrixXd>& aug_states, double dt);

/// Writes w_in.csv and w.csv (row,col,value) into `dir`.
void write_weights_csv(const EsnWeights& weights, const std::filesystem::path& dir);
/// Writes a dense matrix, one row per line.
void write_dense_csv(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::filesystem::path& file);

}  // namespace apiesn
