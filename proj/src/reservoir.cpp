#include "apiesn/reservoir.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

namespace apiesn {

void HyperParams::validate() const {
  if (n_reservoir < 1) throw std::invalid_argument("HyperParams: n_reservoir must be >= 1");
  if (!(sigma_in > 0.0)) throw std::invalid_argument("HyperParams: sigma_in must be positive");
  if (!std::isfinite(b_in)) throw std::invalid_argument("HyperParams: b_in must be finite");
  if (!(avg_degree > 0.0) || avg_degree > static_cast<double>(n_reservoir)) {
    throw std::invalid_argument("HyperParams: avg_degree must be in (0, n_reservoir]");
  }
  if (!(spectral_radius > 0.0)) throw std::invalid_argument("HyperParams: spectral_radius must be positive");
  if (!(tikhonov >= 0.0)) throw std::invalid_argument("HyperParams: tikhonov must be non-negative");
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

SpectralRadius spectral_radius_estimate(const SparseMatrix& m, double tol, int max_restarts, int krylov_dim,
                                        std::uint64_t seed) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius_estimate: matrix must be square");
  if (max_restarts < 1 || krylov_dim < 1) {
    throw std::invalid_argument("spectral_radius_estimate: need max_restarts >= 1 and krylov_dim >= 1");
  }
  const Eigen::Index n = m.rows();
  if (n == 0) return {0.0, 0, true};
  const Eigen::Index k = std::min<Eigen::Index>(krylov_dim, n);

  auto rng = make_stream(seed, kPowerIterationStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  v.normalize();

  Eigen::MatrixXd basis(n, k + 1);
  Eigen::MatrixXd hess(k + 1, k);
  Eigen::VectorXd w(n);
  double previous = -1.0;
  for (int restart = 1; restart <= max_restarts; ++restart) {
    basis.col(0) = v;
    hess.setZero();
    Eigen::Index size = k;
    bool invariant = false;
    for (Eigen::Index j = 0; j < k; ++j) {
      w.noalias() = m * basis.col(j);
      const double scale = w.norm();
      // Gram-Schmidt twice keeps the basis orthogonal to working precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i <= j; ++i) {
          const double h = basis.col(i).dot(w);
          hess(i, j) += h;
          w.noalias() -= h * basis.col(i);
        }
      }
      const double beta = w.norm();
      // Exhausted Krylov space: the Ritz values are exact eigenvalues.
      if (beta <= 1e-12 * scale || j + 1 == n) {
        size = j + 1;
        invariant = true;
        break;
      }
      hess(j + 1, j) = beta;
      basis.col(j + 1) = w / beta;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> es(hess.topLeftCorner(size, size), true);
    const Eigen::VectorXd moduli = es.eigenvalues().cwiseAbs();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return moduli(a) > moduli(b); });
    const Eigen::Index best = order.front();
    const double radius = moduli(best);
    if (invariant) return {radius, restart, true};
    // Ritz residual |A y - lambda y| = h_{k+1,k} |last entry of s| for unit y.
    const Eigen::VectorXcd s = es.eigenvectors().col(best);
    const double residual = hess(k, k - 1) * std::abs(s(k - 1)) / s.norm();
    if (residual <= tol * radius && std::abs(radius - previous) <= tol * radius) return {radius, restart, true};
    previous = radius;

    // Restart from the Ritz vectors of the leading Ritz values so that nearly
    // equal-modulus neighbours are not lost. For a complex pair, real plus
    // imaginary part spans the same invariant plane.
    const Eigen::Index keep = std::min<Eigen::Index>(size, 8);
    Eigen::VectorXcd coeffs = Eigen::VectorXcd::Zero(size);
    for (Eigen::Index i = 0; i < keep; ++i) {
      const Eigen::VectorXcd c = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
      coeffs += c / c.norm();
    }
    const Eigen::VectorXcd ritz = basis.leftCols(size) * coeffs;
    v = ritz.real() + ritz.imag();
    v.normalize();
  }
  return {previous, max_restarts, false};
}

SparseMatrix rescale_to_radius(const SparseMatrix& m, double target, std::uint64_t seed) {
  const SpectralRadius est = spectral_radius_estimate(m, 1e-12, 200, 80, seed);
  if (est.value == 0.0) throw NumericalError("rescale_to_radius: spectral radius is zero");
  SparseMatrix out = m * (target / est.value);
  out.makeCompressed();
  return out;
}

SparseMatrix build_input_matrix(const HyperParams& hp, Eigen::Index n_x) {
  hp.validate();
  if (n_x < 1) throw std::invalid_argument("build_input_matrix: n_x must be >= 1");
  auto rng = make_stream(hp.seed, kInputStream);
  std::uniform_int_distribution<Eigen::Index> column(0, n_x);
  std::uniform_real_distribution<double> value(-hp.sigma_in, hp.sigma_in);

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(hp.n_reservoir));
  for (Eigen::Index i = 0; i < hp.n_reservoir; ++i) {
    const Eigen::Index c = column(rng);
    double v = value(rng);
    // A stored zero would break the one-nonzero-per-row contract.
    while (v == 0.0) v = value(rng);
    entries.emplace_back(i, c, v);
  }
  SparseMatrix w_in(hp.n_reservoir, n_x + 1);
  w_in.setFromTriplets(entries.begin(), entries.end());
  w_in.makeCompressed();
  return w_in;
}

SparseMatrix build_state_matrix(const HyperParams& hp) {
  hp.validate();
  const Eigen::Index n = hp.n_reservoir;
  const double p = hp.avg_degree / static_cast<double>(n);
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    auto rng = make_stream(hp.seed, kStateStreamBase + attempt);
    std::bernoulli_distribution connect(p);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(hp.avg_degree * static_cast<double>(n) * 1.2) + 16);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (connect(rng)) entries.emplace_back(i, j, value(rng));
      }
    }
    SparseMatrix w(n, n);
    w.setFromTriplets(entries.begin(), entries.end());
    w.makeCompressed();
    try {
      return rescale_to_radius(w, hp.spectral_radius, hp.seed);
    } catch (const NumericalError&) {
      // Degenerate draw (nilpotent or empty): redraw from the next substream.
    }
  }
  throw NumericalError("build_state_matrix: every draw had zero spectral radius");
}

EsnWeights::EsnWeights(SparseMatrix w_in, SparseMatrix w, double b_in)
    : w_in_(std::move(w_in)), w_(std::move(w)), b_in_(b_in) {
  if (w_.rows() != w_.cols()) throw std::invalid_argument("EsnWeights: state matrix must be square");
  if (w_in_.rows() != w_.rows()) throw std::invalid_argument("EsnWeights: input matrix row count mismatch");
  if (w_in_.cols() < 2) throw std::invalid_argument("EsnWeights: input matrix needs an input and a bias column");
  w_in_.makeCompressed();
  w_.makeCompressed();
}

EsnWeights EsnWeights::build(const HyperParams& hp, Eigen::Index n_x) {
  return EsnWeights(build_input_matrix(hp, n_x), build_state_matrix(hp), hp.b_in);
}

namespace {

void check_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) +
                                ", got " + std::to_string(got));
  }
}

// Pre-activation of row i. Input-matrix terms are summed first, then the
// state-matrix terms, both in stored order; the dual-number oracle follows
// the same order so the value parts agree bitwise.
double preactivation(const EsnWeights& weights, Eigen::Index i, const Eigen::Ref<const Eigen::VectorXd>& r_prev,
                     const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n_x = weights.n_input();
  double acc = 0.0;
  for (SparseMatrix::InnerIterator it(weights.w_in(), i); it; ++it) {
    const double in = it.col() < n_x ? x(it.col()) : weights.b_in();
    acc = acc + it.value() * in;
  }
  for (SparseMatrix::InnerIterator it(weights.w(), i); it; ++it) {
    acc = acc + it.value() * r_prev(it.col());
  }
  return acc;
}

double tangent_drive(const EsnWeights& weights, Eigen::Index i, const Eigen::Ref<const Eigen::VectorXd>& rdot_prev,
                     const Eigen::Ref<const Eigen::VectorXd>& xdot) {
  const Eigen::Index n_x = weights.n_input();
  double acc = 0.0;
  for (SparseMatrix::InnerIterator it(weights.w_in(), i); it; ++it) {
    if (it.col() < n_x) acc = acc + it.value() * xdot(it.col());
  }
  for (SparseMatrix::InnerIterator it(weights.w(), i); it; ++it) {
    acc = acc + it.value() * rdot_prev(it.col());
  }
  return acc;
}

}  // namespace

Eigen::VectorXd step(const EsnWeights& weights, const Eigen::Ref<const Eigen::VectorXd>& r_prev,
                     const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_size(r_prev.size(), weights.n_reservoir(), "step: r_prev");
  check_size(x.size(), weights.n_input(), "step: x");
  Eigen::VectorXd r(weights.n_reservoir());
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = std::tanh(preactivation(weights, i, r_prev, x));
  return r;
}

Eigen::VectorXd step_tangent(const EsnWeights& weights, const Eigen::Ref<const Eigen::VectorXd>& r_new,
                             const Eigen::Ref<const Eigen::VectorXd>& rdot_prev,
                             const Eigen::Ref<const Eigen::VectorXd>& xdot) {
  check_size(r_new.size(), weights.n_reservoir(), "step_tangent: r_new");
  check_size(rdot_prev.size(), weights.n_reservoir(), "step_tangent: rdot_prev");
  check_size(xdot.size(), weights.n_input(), "step_tangent: xdot");
  Eigen::VectorXd rdot(weights.n_reservoir());
  for (Eigen::Index i = 0; i < rdot.size(); ++i) {
    rdot(i) = (1.0 - r_new(i) * r_new(i)) * tangent_drive(weights, i, rdot_prev, xdot);
  }
  return rdot;
}

ReservoirRun run_teacher_forced(const EsnWeights& weights, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                const Eigen::Ref<const Eigen::MatrixXd>& input_derivs, Eigen::Index n_washout,
                                const std::optional<Eigen::VectorXd>& initial_state) {
  const Eigen::Index n_x = weights.n_input();
  const Eigen::Index n_r = weights.n_reservoir();
  if (inputs.rows() != n_x || input_derivs.rows() != n_x) {
    throw std::invalid_argument("run_teacher_forced: input row count does not match the input matrix");
  }
  if (inputs.cols() != input_derivs.cols()) {
    throw std::invalid_argument("run_teacher_forced: inputs and derivatives differ in length");
  }
  if (n_washout < 0 || n_washout > inputs.cols()) {
    throw std::invalid_argument("run_teacher_forced: washout must be in [0, number of columns]");
  }

  Eigen::VectorXd r = Eigen::VectorXd::Zero(n_r);
  if (initial_state) {
    check_size(initial_state->size(), n_r, "run_teacher_forced: initial_state");
    r = *initial_state;
  }
  Eigen::VectorXd rdot = Eigen::VectorXd::Zero(n_r);

  const Eigen::Index n_rec = inputs.cols() - n_washout;
  const Eigen::Index n_aug = weights.augmented_size();
  ReservoirRun run;
  run.states.resize(n_aug, n_rec);
  run.tangents.resize(n_aug, n_rec);

  for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
    r = step(weights, r, inputs.col(t));
    rdot = step_tangent(weights, r, rdot, input_derivs.col(t));
    if (!r.allFinite() || !rdot.allFinite()) {
      throw NumericalError("run_teacher_forced: non-finite reservoir state at column " + std::to_string(t));
    }
    if (t < n_washout) continue;
    const Eigen::Index j = t - n_washout;
    run.states.col(j).head(n_r) = r;
    run.states.col(j).segment(n_r, n_x) = inputs.col(t);
    run.states(n_aug - 1, j) = 1.0;
    run.tangents.col(j).head(n_r) = rdot;
    run.tangents.col(j).segment(n_r, n_x) = input_derivs.col(t);
    run.tangents(n_aug - 1, j) = 0.0;
  }
  return run;
}

Eigen::VectorXd readout(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                        const Eigen::Ref<const Eigen::VectorXd>& aug_state) {
  check_size(aug_state.size(), w_out.cols(), "readout: augmented state");
  return w_out * aug_state;
}

Eigen::VectorXd readout_derivative(const Eigen::Ref<const Eigen::MatrixXd>& w_out,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_tangent) {
  check_size(aug_tangent.size(), w_out.cols(), "readout_derivative: augmented tangent");
  if (aug_tangent(aug_tangent.size() - 1) != 0.0) {
    throw std::invalid_argument("readout_derivative: constant slot of the tangent must be zero");
  }
  return w_out * aug_tangent;
}

Eigen::MatrixXd fe_output_derivative(const Eigen::Ref<const Eigen::MatrixXd>& outputs, double dt) {
  if (outputs.cols() < 2) throw std::invalid_argument("fe_output_derivative: need at least two samples");
  if (!(dt > 0.0)) throw std::invalid_argument("fe_output_derivative: dt must be positive");
  const Eigen::Index n = outputs.cols() - 1;
  return (outputs.rightCols(n) - outputs.leftCols(n)) / dt;
}

Eigen::MatrixXd fe_tangents(const Eigen::Ref<const Eigen::MatrixXd>& aug_states, double dt) {
  return fe_output_derivative(aug_states, dt);
}

void write_weights_csv(const EsnWeights& weights, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [](const SparseMatrix& m, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file.string());
    out << std::setprecision(17) << "row,col,value\n";
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
        out << it.row() << ',' << it.col() << ',' << it.value() << '\n';
      }
    }
  };
  dump(weights.w_in(), dir / "w_in.csv");
  dump(weights.w(), dir / "w.csv");
}

void write_dense_csv(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace apiesn
