#pragma once

// Forward-mode dual numbers, used as an independent check of the closed-form
// reservoir tangent.

#include "apiesn/reservoir.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace apiesn {

struct Dual {
  double value = 0.0;
  double tangent = 0.0;
};

constexpr Dual operator+(Dual a, Dual b) { return {a.value + b.value, a.tangent + b.tangent}; }
constexpr Dual operator-(Dual a) { return {-a.value, -a.tangent}; }
constexpr Dual operator-(Dual a, Dual b) { return {a.value - b.value, a.tangent - b.tangent}; }
constexpr Dual operator*(Dual a, Dual b) {
  return {a.value * b.value, a.value * b.tangent + a.tangent * b.value};
}
constexpr Dual operator*(double c, Dual a) { return {c * a.value, c * a.tangent}; }
constexpr bool operator==(Dual a, Dual b) { return a.value == b.value && a.tangent == b.tangent; }

inline Dual tanh(Dual a) {
  const double t = std::tanh(a.value);
  return {t, a.tangent * (1.0 - t * t)};
}

inline std::ostream& operator<<(std::ostream& os, Dual a) {
  return os << a.value << " + " << a.tangent << "e";
}

using DualVector = std::vector<Dual>;

/// Zips values and tangents into a dual vector.
inline DualVector make_duals(const Eigen::Ref<const Eigen::VectorXd>& values,
                             const Eigen::Ref<const Eigen::VectorXd>& tangents) {
  if (values.size() != tangents.size()) throw std::invalid_argument("make_duals: length mismatch");
  DualVector out(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) out[static_cast<std::size_t>(i)] = {values(i), tangents(i)};
  return out;
}

/// One reservoir update evaluated entirely in dual arithmetic. The bias
/// input is a constant (zero tangent).
inline DualVector reservoir_step_dual(const EsnWeights& weights, const DualVector& r_prev, const DualVector& x) {
  const auto n_r = static_cast<std::size_t>(weights.n_reservoir());
  const auto n_x = static_cast<std::size_t>(weights.n_input());
  if (r_prev.size() != n_r || x.size() != n_x) throw std::invalid_argument("reservoir_step_dual: dimension mismatch");
  const Dual bias{weights.b_in(), 0.0};

  DualVector out(n_r);
  for (std::size_t i = 0; i < n_r; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Dual acc{};
    for (SparseMatrix::InnerIterator it(weights.w_in(), row); it; ++it) {
      const auto c = static_cast<std::size_t>(it.col());
      acc = acc + it.value() * (c < n_x ? x[c] : bias);
    }
    for (SparseMatrix::InnerIterator it(weights.w(), row); it; ++it) {
      acc = acc + it.value() * r_prev[static_cast<std::size_t>(it.col())];
    }
    out[i] = tanh(acc);
  }
  return out;
}

}  // namespace apiesn
