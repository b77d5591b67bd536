#pragma once

#include <cmath>
#include <sstream>

#include "state.hpp"

namespace qmeas {

/// Multiplication by x_k.
inline Mat position_operator(const Grid& g) {
  Mat m = Mat::Zero(g.n, g.n);
  for (int k = 0; k < g.n; ++k) m(k, k) = g.x(k);
  return m;
}

/// Apply the spectral momentum operator: psi -> F^dag diag(p_m) F psi.
inline Vec apply_momentum(const Grid& g, const Vec& psi) {
  Vec hat = to_momentum(psi);
  for (int m = 0; m < g.n; ++m) hat[m] *= g.p(m);
  return from_momentum(hat);
}

/// Dense momentum operator, symmetrized to remove the O(1e-16) asymmetry of
/// the transform round trip.
inline Mat momentum_operator(const Grid& g) {
  Mat m(g.n, g.n);
  Vec e = Vec::Zero(g.n);
  for (int k = 0; k < g.n; ++k) {
    e[k] = 1.0;
    m.col(k) = apply_momentum(g, e);
    e[k] = 0.0;
  }
  return 0.5 * (m + m.adjoint());
}

/// Spectral translation (e^{-i q P} psi)(x) = psi(x - q), periodic on the box.
inline Vec translate_spectral(const Grid& g, const Vec& psi, double q) {
  Vec hat = to_momentum(psi);
  for (int m = 0; m < g.n; ++m) hat[m] *= std::polar(1.0, -q * g.p(m));
  return from_momentum(hat);
}

/// Translation treating the box edge as hard: the state is embedded in a
/// double-size box [-L, L) at the same dx, translated spectrally there, and
/// truncated back.  Mass pushed outside the original window is an error
/// beyond drop_tol — wraparound never silently reenters.
inline Vec translate_padded(const Grid& g, const Vec& psi, double q,
                            double drop_tol = 1e-10) {
  const int n2 = 2 * g.n;
  const double dp2 = g.dp / 2.0;
  Vec big = Vec::Zero(n2);
  big.segment(g.n / 2, g.n) = psi;  // x'_k = -L + k dx puts x_j at k = j + n/2
  for (int k = 1; k < n2; k += 2) big[k] = -big[k];
  detail::dft_pow2_inplace(big, -1);
  for (int m = 0; m < n2; ++m) {
    const double p = (m - g.n) * dp2;
    big[m] = (m % 2 == 0 ? big[m] : -big[m]) * std::polar(1.0, -q * p);
  }
  for (int m = 1; m < n2; m += 2) big[m] = -big[m];
  detail::dft_pow2_inplace(big, +1);
  for (int k = 1; k < n2; k += 2) big[k] = -big[k];
  big /= static_cast<double>(n2);
  const double total = psi.squaredNorm();
  Vec out = big.segment(g.n / 2, g.n);
  if (total > 0.0) {
    const double dropped = 1.0 - out.squaredNorm() / total;
    if (dropped > drop_tol) {
      std::ostringstream msg;
      msg << "translation by " << q << " pushed relative mass " << dropped
          << " outside the representable window";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

/// Closed form of the periodic translation matrix T = F^dag diag(e^{-i q p}) F:
/// T[k,j] = (1/n) e^{-i (n/2) theta} (e^{i n theta} - 1)/(e^{i theta} - 1)
/// with theta = dp ((k - j) dx - q).
inline Mat translation_matrix(const Grid& g, double q) {
  Mat t(g.n, g.n);
  for (int k = 0; k < g.n; ++k) {
    for (int j = 0; j < g.n; ++j) {
      const double theta = g.dp * ((k - j) * g.dx - q);
      const Complex num = std::polar(1.0, g.n * theta) - 1.0;
      const Complex den = std::polar(1.0, theta) - 1.0;
      if (std::abs(den) < 1e-12) {
        t(k, j) = std::polar(1.0, -0.5 * g.n * theta);
      } else {
        t(k, j) = std::polar(1.0, -0.5 * g.n * theta) * num / (den * static_cast<double>(g.n));
      }
    }
  }
  return t;
}

inline void require_weyl_range(const Grid& g, double q, double p) {
  if (std::abs(q) > g.length / 2 || std::abs(p) > g.p_max()) {
    std::ostringstream msg;
    msg << "phase-space displacement (" << q << ", " << p
        << ") outside the representable box |q| <= L/2, |p| <= pi/dx";
    throw ValidationError(msg.str());
  }
}

/// Weyl displacement W_{q,p} = e^{i q p / 2} e^{-i q P} e^{i p Q} applied
/// spectrally (periodic translation).  Off-lattice displacements act through
/// band-limited periodic interpolation, so the symplectic composition law is
/// exact at the operator level only on the lattice (j dx, m dp); matrix
/// elements against states that vanish at the box edge are unaffected.
inline Vec weyl_apply(const Grid& g, const Vec& psi, double q, double p) {
  require_weyl_range(g, q, p);
  Vec v(g.n);
  for (int k = 0; k < g.n; ++k) v[k] = psi[k] * std::polar(1.0, p * g.x(k));
  v = translate_spectral(g, v, q);
  return std::polar(1.0, 0.5 * q * p) * v;
}

/// Dense Weyl displacement operator.
inline Mat weyl_operator(const Grid& g, double q, double p) {
  require_weyl_range(g, q, p);
  Mat w = translation_matrix(g, q);
  for (int j = 0; j < g.n; ++j) {
    w.col(j) *= std::polar(1.0, p * g.x(j));
  }
  return std::polar(1.0, 0.5 * q * p) * w;
}

/// Weyl displacement on the commensurate lattice (u, v) = (j dx, m dp),
/// where the periodic translation is an exact cyclic shift:
/// (W psi)[k] = e^{i u v / 2} e^{i v x_{k-j}} psi[(k-j) mod n].
inline Vec weyl_lattice_apply(const Grid& g, const Vec& psi, int j, int m) {
  const double u = j * g.dx;
  const double v = m * g.dp;
  const Complex front = std::polar(1.0, 0.5 * u * v);
  Vec out(g.n);
  for (int k = 0; k < g.n; ++k) {
    const int l = ((k - j) % g.n + g.n) % g.n;
    out[k] = front * std::polar(1.0, v * g.x(l)) * psi[l];
  }
  return out;
}

/// <phi| W_{j dx, m dp} phi> with the grid quadrature weight, evaluated by
/// the O(n) shifted product.
inline Complex weyl_lattice_overlap(const Grid& g, const Vec& phi, int j, int m) {
  const double u = j * g.dx;
  const double v = m * g.dp;
  Complex acc(0.0, 0.0);
  for (int k = 0; k < g.n; ++k) {
    const int l = ((k - j) % g.n + g.n) % g.n;
    acc += std::conj(phi[k]) * std::polar(1.0, v * g.x(l)) * phi[l];
  }
  return std::polar(1.0, 0.5 * u * v) * acc * g.dx;
}

/// Square root of a positive semidefinite Hermitian matrix.  Eigenvalues in
/// [-neg_tol, 0) are clamped to zero; anything lower is an error.
inline Mat op_sqrt_psd(const Mat& m, double neg_tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.adjoint()));
  if (es.eigenvalues().minCoeff() < -neg_tol) {
    std::ostringstream msg;
    msg << "matrix square root of a non-positive operator (min eigenvalue "
        << es.eigenvalues().minCoeff() << ")";
    throw NumericalError(msg.str());
  }
  Vec d(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    d[i] = std::sqrt(std::max(0.0, es.eigenvalues()[i]));
  }
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

inline Mat sigma_x() { Mat m(2, 2); m << 0, 1, 1, 0; return m; }
inline Mat sigma_y() { Mat m(2, 2); m << 0, Complex(0, -1), Complex(0, 1), 0; return m; }
inline Mat sigma_z() { Mat m(2, 2); m << 1, 0, 0, -1; return m; }

/// Rank-one projector |v><v| / <v|v> as a plain coefficient matrix.
inline Mat projector_onto(const Vec& v) { return v * v.adjoint() / v.squaredNorm(); }

/// First and second grid-state moments used by probe admissibility checks.
inline double mean_position(const Grid& g, const Vec& psi) {
  double acc = 0.0;
  for (int k = 0; k < g.n; ++k) acc += std::norm(psi[k]) * g.x(k);
  return acc * g.dx / (psi.squaredNorm() * g.dx);
}

inline double mean_momentum(const Grid& g, const Vec& psi) {
  Vec hat = to_momentum(psi);
  double acc = 0.0;
  for (int m = 0; m < g.n; ++m) acc += std::norm(hat[m]) * g.p(m);
  return acc / hat.squaredNorm();
}

inline double second_moment_momentum(const Grid& g, const Vec& psi) {
  Vec hat = to_momentum(psi);
  double acc = 0.0;
  for (int m = 0; m < g.n; ++m) acc += std::norm(hat[m]) * g.p(m) * g.p(m);
  return acc / hat.squaredNorm();
}

inline double position_spread(const Grid& g, const Vec& psi) {
  const double mu = mean_position(g, psi);
  double acc = 0.0;
  for (int k = 0; k < g.n; ++k) {
    acc += std::norm(psi[k]) * (g.x(k) - mu) * (g.x(k) - mu);
  }
  return std::sqrt(acc * g.dx / (psi.squaredNorm() * g.dx));
}

/// <Q P> of a grid state, computed spectrally.
inline Complex qp_correlation(const Grid& g, const Vec& psi) {
  const Vec pp = apply_momentum(g, psi);
  Complex acc(0.0, 0.0);
  for (int k = 0; k < g.n; ++k) acc += std::conj(psi[k]) * g.x(k) * pp[k];
  return acc * g.dx / (psi.squaredNorm() * g.dx);
}

}  // namespace qmeas
