#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "space.hpp"

namespace qmeas {

/// A vector of coefficients over a Space.  Physical inner products carry the
/// space's quadrature weight; on a grid the coefficients are wavefunction
/// samples, so ||psi||^2 = sum |psi_k|^2 dx.
struct StateVector {
  Space space;
  Vec a;

  double norm2() const { return a.squaredNorm() * space.weight(); }
  double norm() const { return std::sqrt(norm2()); }

  Complex inner(const StateVector& other) const {
    return (a.adjoint() * other.a)(0, 0) * space.weight();
  }

  StateVector& normalize() {
    const double n = norm();
    if (n <= 0.0) throw ValidationError("cannot normalize a zero state");
    a /= n;
    return *this;
  }
};

inline StateVector tensor(const StateVector& l, const StateVector& r) {
  return {tensor(l.space, r.space), kron(l.a, r.a)};
}

inline StateVector qubit_state(Complex a0, Complex a1) {
  StateVector s{Space::finite(2), Vec(2)};
  s.a << a0, a1;
  return s;
}

/// Normalized Gaussian wave packet exp(-(x-x0)^2/(4 delta^2) + i p0 x).
/// Requires the +-5 delta window around x0 to lie inside the grid; warns via
/// diag when the sampled mass differs from the continuum unit mass by more
/// than 1e-12 (truncation or quadrature loss).
inline StateVector gaussian_state(const Grid& g, double x0, double p0, double delta,
                                  Diagnostics* diag = nullptr) {
  if (!(delta > 0.0)) throw ValidationError("gaussian width must be positive");
  if (x0 - 5.0 * delta < -g.length / 2 || x0 + 5.0 * delta > g.length / 2) {
    std::ostringstream msg;
    msg << "gaussian state at x0=" << x0 << " with delta=" << delta
        << " does not fit the grid window: need [x0-5d, x0+5d] inside [-L/2, L/2]";
    throw ValidationError(msg.str());
  }
  const double norm = std::pow(2.0 * std::numbers::pi * delta * delta, -0.25);
  Vec a(g.n);
  for (int k = 0; k < g.n; ++k) {
    const double x = g.x(k);
    a[k] = norm * std::exp(-(x - x0) * (x - x0) / (4.0 * delta * delta)) *
           std::polar(1.0, p0 * x);
  }
  const double mass = a.squaredNorm() * g.dx;
  if (std::abs(mass - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "gaussian state lost mass " << std::abs(mass - 1.0)
        << " to truncation; renormalizing";
    warn_if(diag, msg.str());
  }
  a /= std::sqrt(mass);
  return {Space::of_grid(g), a};
}

/// Density operator stored as a kernel over coefficients:
/// tr rho = (plain matrix trace) * space weight, so a normalized pure state
/// psi gives rho = psi psi^dagger with unit trace.
struct DensityOperator {
  Space space;
  Mat rho;

  double trace() const { return rho.trace().real() * space.weight(); }

  static DensityOperator pure(const StateVector& s) {
    return {s.space, s.a * s.a.adjoint()};
  }

  static DensityOperator mixture(const std::vector<double>& weights,
                                 const std::vector<StateVector>& states) {
    if (weights.empty() || weights.size() != states.size()) {
      throw ValidationError("mixture needs matching, nonempty weight/state lists");
    }
    Mat m = Mat::Zero(states[0].a.size(), states[0].a.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] < 0.0) throw ValidationError("mixture weights must be nonnegative");
      m += weights[i] * (states[i].a * states[i].a.adjoint());
    }
    return {states[0].space, m};
  }
};

/// tr[rho A] for an operator given as a plain coefficient matrix.
inline Complex expect(const DensityOperator& rho, const Mat& op) {
  return (rho.rho * op).trace() * rho.space.weight();
}

/// <psi| A psi> with the space's quadrature weight.
inline Complex expect(const StateVector& psi, const Mat& op) {
  return (psi.a.adjoint() * (op * psi.a))(0, 0) * psi.space.weight();
}

/// Trace distance (1/2)||rho - sigma||_1 in physical normalization.
inline double trace_distance(const DensityOperator& a, const DensityOperator& b) {
  Mat d = (a.rho - b.rho) * a.space.weight();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (d + d.adjoint()));
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qmeas
