#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qmeas {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

/// Uniform position grid with n points on [-L/2, L/2), x_k = -L/2 + k dx,
/// together with its centered momentum lattice p_m = (m - n/2) dp,
/// dp = 2 pi / L.  Units use hbar = 1 throughout.
struct Grid {
  int n = 0;
  double length = 0.0;
  double dx = 0.0;
  double dp = 0.0;

  double x(int k) const { return -length / 2 + k * dx; }
  double p(int m) const { return (m - n / 2) * dp; }

  /// Largest representable momentum magnitude, pi / dx.
  double p_max() const { return std::numbers::pi / dx; }

  RVec xs() const {
    RVec v(n);
    for (int k = 0; k < n; ++k) v[k] = x(k);
    return v;
  }
  RVec ps() const {
    RVec v(n);
    for (int m = 0; m < n; ++m) v[m] = p(m);
    return v;
  }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Build a grid.  n must be a power of two in [16, 4096]; length positive.
inline Grid make_grid(int n, double length) {
  if (!is_power_of_two(n) || n < 16 || n > 4096) {
    throw ValidationError("grid size must be a power of two in [16, 4096], got " +
                          std::to_string(n));
  }
  if (!(length > 0.0)) {
    throw ValidationError("grid length must be positive");
  }
  Grid g;
  g.n = n;
  g.length = length;
  g.dx = length / n;
  g.dp = 2.0 * std::numbers::pi / length;
  return g;
}

namespace detail {

/// Primitive roots e^{-2 pi i k / n}, k < n/2, cached per size.  Tables are
/// built with std::polar so twiddle error does not accumulate across stages.
inline const std::vector<Complex>& unit_roots(int n) {
  thread_local std::map<int, std::vector<Complex>> cache;
  auto& roots = cache[n];
  if (static_cast<int>(roots.size()) != n / 2) {
    roots.resize(n / 2);
    for (int k = 0; k < n / 2; ++k) {
      roots[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / n);
    }
  }
  return roots;
}

/// In-place radix-2 transform, no normalization:
///   a_m <- sum_k a_k e^{sign 2 pi i k m / n}.
inline void dft_pow2_inplace(Vec& a, int sign) {
  const int n = static_cast<int>(a.size());
  const auto& roots = unit_roots(n);
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int stride = n / len;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        const Complex w = sign < 0 ? roots[j * stride] : std::conj(roots[j * stride]);
        const Complex u = a[i + j];
        const Complex v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Centered unitary transform between position and momentum coefficients:
///   forward:  psihat_m = n^{-1/2} sum_k e^{-i p_m x_k} psi_k
///   inverse:  psi_k   = n^{-1/2} sum_m e^{+i p_m x_k} psihat_m
/// For n divisible by 4 both directions reduce to an alternating-sign
/// conjugation of the plain power-of-two transform.
inline void fft_centered_inplace(Vec& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  for (int k = 1; k < n; k += 2) a[k] = -a[k];
  detail::dft_pow2_inplace(a, inverse ? +1 : -1);
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k) a[k] = (k % 2 == 0 ? a[k] : -a[k]) * s;
}

/// Unitary momentum coefficients of a position coefficient vector.
inline Vec to_momentum(const Vec& psi) {
  Vec a = psi;
  fft_centered_inplace(a, false);
  return a;
}

/// Position coefficients from unitary momentum coefficients.
inline Vec from_momentum(const Vec& hat) {
  Vec a = hat;
  fft_centered_inplace(a, true);
  return a;
}

/// Continuum-normalized momentum wavefunction sampled on the lattice:
/// sum_m |phihat(p_m)|^2 dp = sum_k |psi(x_k)|^2 dx.
inline Vec momentum_wavefunction(const Grid& g, const Vec& psi) {
  return to_momentum(psi) * std::sqrt(g.dx / g.dp);
}

/// Band-limited (trigonometric) evaluation of the grid function at an
/// arbitrary point x, using the centered momentum expansion.
inline Complex eval_trig(const Grid& g, const Vec& hat_unitary, double x) {
  Complex acc(0.0, 0.0);
  for (int m = 0; m < g.n; ++m) {
    acc += hat_unitary[m] * std::polar(1.0, g.p(m) * x);
  }
  return acc / std::sqrt(static_cast<double>(g.n));
}

}  // namespace qmeas
