#pragma once

#include <string>
#include <vector>

#include "grid.hpp"

namespace qmeas {

/// Tensor-product structure of a state space.  Each factor is either a
/// sampled line (a Grid, quadrature weight dx) or a finite dimension
/// (weight 1).  Indices are row-major over the factor list, so for
/// factors (A, B) the flat index is i_A * dim(B) + i_B.
struct Space {
  struct Factor {
    bool on_grid = false;
    Grid grid;    // valid when on_grid
    int d = 0;    // dimension (grid.n when on_grid)
  };

  std::vector<Factor> factors;

  static Space finite(int d) {
    if (d < 1) throw ValidationError("finite space dimension must be positive");
    Space s;
    s.factors.push_back({false, Grid{}, d});
    return s;
  }

  static Space of_grid(const Grid& g) {
    Space s;
    s.factors.push_back({true, g, g.n});
    return s;
  }

  int dim() const {
    int d = 1;
    for (const auto& f : factors) d *= f.d;
    return d;
  }

  /// Quadrature weight of the flat inner product: the product of dx over all
  /// grid factors (finite factors contribute 1).  <a|b> = sum conj(a) b * weight.
  double weight() const {
    double w = 1.0;
    for (const auto& f : factors) {
      if (f.on_grid) w *= f.grid.dx;
    }
    return w;
  }
};

inline Space tensor(const Space& a, const Space& b) {
  Space s = a;
  s.factors.insert(s.factors.end(), b.factors.begin(), b.factors.end());
  return s;
}

/// Kronecker product in the row-major index convention of Space.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vec kron(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return out;
}

/// Trace out the second factor of a bipartite matrix with dims (d1, d2).
inline Mat partial_trace_second(const Mat& m, int d1, int d2) {
  Mat out = Mat::Zero(d1, d1);
  for (int i = 0; i < d1; ++i) {
    for (int j = 0; j < d1; ++j) {
      Complex acc(0.0, 0.0);
      for (int a = 0; a < d2; ++a) acc += m(i * d2 + a, j * d2 + a);
      out(i, j) = acc;
    }
  }
  return out;
}

/// Trace out the first factor of a bipartite matrix with dims (d1, d2).
inline Mat partial_trace_first(const Mat& m, int d1, int d2) {
  Mat out = Mat::Zero(d2, d2);
  for (int a = 0; a < d2; ++a) {
    for (int b = 0; b < d2; ++b) {
      Complex acc(0.0, 0.0);
      for (int i = 0; i < d1; ++i) acc += m(i * d2 + a, i * d2 + b);
      out(a, b) = acc;
    }
  }
  return out;
}

}  // namespace qmeas
