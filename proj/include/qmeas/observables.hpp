#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "operators.hpp"

namespace qmeas {

/// Half-open outcome interval [lo, hi) on the real line.
struct OutcomeBin {
  double lo = 0.0;
  double hi = 0.0;

  double center() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x < hi; }
};

inline std::vector<OutcomeBin> make_uniform_bins(double lo, double hi, int count) {
  if (count <= 0 || !(hi > lo)) {
    throw ValidationError("uniform bins need count > 0 and hi > lo");
  }
  const double w = (hi - lo) / count;
  std::vector<OutcomeBin> bins(count);
  for (int i = 0; i < count; ++i) {
    bins[i] = OutcomeBin{lo + i * w, lo + (i + 1) * w};
  }
  bins.back().hi = hi;  // guard against accumulated rounding at the top edge
  return bins;
}

/// Discrete observable: one effect per outcome bin.  Effects act on the
/// coefficient space of `space`; positivity and normalization are checked
/// against the identity on that space.
struct BinnedObservable {
  Space space;
  std::vector<OutcomeBin> bins;
  std::vector<Mat> effects;

  int size() const { return static_cast<int>(bins.size()); }

  void validate(double eig_tol = 1e-10, double sum_tol = 1e-9) const {
    if (bins.size() != effects.size()) {
      throw ValidationError("observable has mismatched bin and effect counts");
    }
    if (bins.empty()) throw ValidationError("observable has no outcomes");
    const int d = space.dim();
    Mat sum = Mat::Zero(d, d);
    for (const Mat& e : effects) {
      if (e.rows() != d || e.cols() != d) {
        throw ValidationError("effect dimension does not match the space");
      }
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (e + e.adjoint()));
      if ((e - e.adjoint()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ValidationError("effect is not Hermitian");
      }
      if (es.eigenvalues().minCoeff() < -eig_tol ||
          es.eigenvalues().maxCoeff() > 1.0 + eig_tol) {
        std::ostringstream msg;
        msg << "effect spectrum [" << es.eigenvalues().minCoeff() << ", "
            << es.eigenvalues().maxCoeff() << "] outside [0, 1]";
        throw ValidationError(msg.str());
      }
      sum += e;
    }
    if ((sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > sum_tol) {
      throw ValidationError("effects do not sum to the identity");
    }
  }

  /// Union effect over a set of outcome indices.
  Mat effect_of(const std::vector<int>& idx) const {
    Mat e = Mat::Zero(space.dim(), space.dim());
    for (int i : idx) e += effects.at(static_cast<std::size_t>(i));
    return e;
  }
};

/// Outcome distribution of an observable in a state.
struct ProbabilityMeasure {
  std::vector<OutcomeBin> bins;
  std::vector<double> p;

  double total() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }
};

/// Born-rule statistics.  Tiny negative weights from roundoff are clipped;
/// anything beyond clip_tol, or a total drifting from one by more than
/// drift_tol, is treated as a broken observable rather than noise.
inline ProbabilityMeasure statistics(const BinnedObservable& obs,
                                     const DensityOperator& state,
                                     double clip_tol = 1e-12,
                                     double drift_tol = 1e-9) {
  ProbabilityMeasure out;
  out.bins = obs.bins;
  out.p.resize(obs.bins.size());
  double total = 0.0;
  for (int i = 0; i < obs.size(); ++i) {
    double v = expect(state, obs.effects[static_cast<std::size_t>(i)]).real();
    if (v < -clip_tol) {
      std::ostringstream msg;
      msg << "negative outcome probability " << v << " at bin " << i;
      throw NumericalError(msg.str());
    }
    v = std::max(v, 0.0);
    out.p[static_cast<std::size_t>(i)] = v;
    total += v;
  }
  if (std::abs(total - 1.0) > drift_tol) {
    std::ostringstream msg;
    msg << "outcome probabilities sum to " << total;
    throw NumericalError(msg.str());
  }
  for (double& v : out.p) v /= total;
  return out;
}

/// Mean outcome with each bin collapsed to its center.
inline double first_moment(const ProbabilityMeasure& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.p.size(); ++i) acc += m.bins[i].center() * m.p[i];
  return acc;
}

namespace detail {

/// Bin widths must divide one another for sums of centers to land on a
/// common lattice; returns the fine width.
inline double common_bin_width(double w1, double w2) {
  const double hi = std::max(w1, w2);
  const double lo = std::min(w1, w2);
  const double ratio = hi / lo;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    std::ostringstream msg;
    msg << "incommensurate bin widths " << w1 << " and " << w2;
    throw ValidationError(msg.str());
  }
  return lo;
}

inline void require_uniform(const std::vector<OutcomeBin>& bins, const char* who) {
  const double w = bins.front().width();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (std::abs(bins[i].width() - w) > 1e-9 * std::max(1.0, w)) {
      std::ostringstream msg;
      msg << who << " bins are not uniform";
      throw ValidationError(msg.str());
    }
    if (i > 0 && std::abs(bins[i].lo - bins[i - 1].hi) > 1e-9 * std::max(1.0, w)) {
      std::ostringstream msg;
      msg << who << " bins are not contiguous";
      throw ValidationError(msg.str());
    }
  }
}

}  // namespace detail

/// Convolution of a scalar outcome distribution with an operator-valued
/// observable: effects E'(c) = sum_{a + b = c} mu(a) E(b), collected on the
/// lattice of achievable center sums.  With an explicit output range, pairs
/// falling outside it are dropped; the dropped operator mass must stay at
/// floor level or the range is rejected as lossy.
inline BinnedObservable convolve(const ProbabilityMeasure& mu,
                                 const BinnedObservable& obs,
                                 const OutcomeBin* range = nullptr,
                                 double drop_tol = 1e-9) {
  detail::require_uniform(mu.bins, "distribution");
  detail::require_uniform(obs.bins, "observable");
  const double w1 = mu.bins.front().width();
  const double w2 = obs.bins.front().width();
  const double g = detail::common_bin_width(w1, w2);
  const double c0 = mu.bins.front().center() + obs.bins.front().center();
  const int d = obs.space.dim();

  std::map<int, Mat> acc;
  Mat dropped = Mat::Zero(d, d);
  for (std::size_t a = 0; a < mu.bins.size(); ++a) {
    if (mu.p[a] == 0.0) continue;
    for (std::size_t b = 0; b < obs.bins.size(); ++b) {
      const double c = mu.bins[a].center() + obs.bins[b].center();
      if (range != nullptr && !range->contains(c)) {
        dropped += mu.p[a] * obs.effects[b];
        continue;
      }
      const double kf = (c - c0) / g;
      const int k = static_cast<int>(std::llround(kf));
      if (std::abs(kf - k) > 1e-6) {
        throw NumericalError("convolution outcome missed the common lattice");
      }
      auto it = acc.find(k);
      if (it == acc.end()) {
        acc.emplace(k, mu.p[a] * obs.effects[b]);
      } else {
        it->second += mu.p[a] * obs.effects[b];
      }
    }
  }
  if (range != nullptr) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (dropped + dropped.adjoint()));
    if (es.eigenvalues().maxCoeff() > drop_tol) {
      std::ostringstream msg;
      msg << "convolution drops operator mass " << es.eigenvalues().maxCoeff()
          << "; extend the outcome range";
      throw ValidationError(msg.str());
    }
  }

  BinnedObservable out;
  out.space = obs.space;
  for (const auto& [k, e] : acc) {
    const double c = c0 + k * g;
    out.bins.push_back(OutcomeBin{c - g / 2, c + g / 2});
    out.effects.push_back(e);
  }
  return out;
}

/// Indices of outcomes whose effects carry non-negligible weight in `state`.
inline std::vector<int> support(const BinnedObservable& obs,
                                const DensityOperator& state,
                                double threshold = 1e-10) {
  if (!(threshold > 0.0) || threshold > 1e-3) {
    throw ValidationError("support threshold must lie in (0, 1e-3]");
  }
  std::vector<int> idx;
  for (int i = 0; i < obs.size(); ++i) {
    if (expect(state, obs.effects[static_cast<std::size_t>(i)]).real() > threshold) {
      idx.push_back(i);
    }
  }
  return idx;
}

/// Spectral (projection-valued) observable of a Hermitian matrix: one
/// projector per eigenvalue cluster, binned in cells of the given width
/// around each distinct eigenvalue.
inline BinnedObservable sharp_observable(const Space& space, const Mat& a,
                                         double bin_width = 1.0,
                                         double cluster_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.adjoint()));
  BinnedObservable out;
  out.space = space;
  const int d = space.dim();
  int i = 0;
  while (i < d) {
    int j = i;
    while (j + 1 < d && es.eigenvalues()[j + 1] - es.eigenvalues()[i] < cluster_tol) ++j;
    Mat proj = Mat::Zero(d, d);
    double mean = 0.0;
    for (int k = i; k <= j; ++k) {
      proj += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
      mean += es.eigenvalues()[k];
    }
    mean /= (j - i + 1);
    out.bins.push_back(OutcomeBin{mean - bin_width / 2, mean + bin_width / 2});
    out.effects.push_back(proj);
    i = j + 1;
  }
  return out;
}

/// Position observable on the grid: one cell projector per sample point,
/// outcome bin = the grid cell.  Effects are plain projectors; the quadrature
/// weight lives in the trace, so tr[rho E] integrates |psi|^2 over the cell.
inline BinnedObservable position_cell_observable(const Grid& g) {
  BinnedObservable out;
  out.space = Space::of_grid(g);
  out.bins.reserve(static_cast<std::size_t>(g.n));
  out.effects.reserve(static_cast<std::size_t>(g.n));
  for (int k = 0; k < g.n; ++k) {
    out.bins.push_back(OutcomeBin{g.x(k) - g.dx / 2, g.x(k) + g.dx / 2});
    Mat e = Mat::Zero(g.n, g.n);
    e(k, k) = 1.0;
    out.effects.push_back(e);
  }
  return out;
}

/// Position observable with coarser bins: sample cells grouped by which bin
/// their x_k falls into.  Bins must tile an interval inside the box.
inline BinnedObservable binned_position_observable(const Grid& g,
                                                   const std::vector<OutcomeBin>& bins) {
  detail::require_uniform(bins, "position");
  BinnedObservable out;
  out.space = Space::of_grid(g);
  out.bins = bins;
  out.effects.assign(bins.size(), Mat::Zero(g.n, g.n));
  for (int k = 0; k < g.n; ++k) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (bins[b].contains(g.x(k))) {
        out.effects[b](k, k) = 1.0;
        break;
      }
    }
  }
  return out;
}

/// Momentum-cell observable via the centered transform: effects
/// F^dag |m><m| F per momentum cell.
inline BinnedObservable momentum_cell_observable(const Grid& g) {
  BinnedObservable out;
  out.space = Space::of_grid(g);
  out.bins.reserve(static_cast<std::size_t>(g.n));
  out.effects.reserve(static_cast<std::size_t>(g.n));
  Vec e = Vec::Zero(g.n);
  for (int m = 0; m < g.n; ++m) {
    out.bins.push_back(OutcomeBin{g.p(m) - g.dp / 2, g.p(m) + g.dp / 2});
    e[m] = 1.0;
    Vec col = from_momentum(e);
    e[m] = 0.0;
    out.effects.push_back(col * col.adjoint());
  }
  return out;
}

/// Two-valued coarse graining of position: outcome 1 is the window
/// intersected with the box, outcome 0 its complement.
inline BinnedObservable two_valued_position(const Grid& g, double lo, double hi) {
  Mat q = Mat::Zero(g.n, g.n);
  int hits = 0;
  for (int k = 0; k < g.n; ++k) {
    if (lo <= g.x(k) && g.x(k) < hi) {
      q(k, k) = 1.0;
      ++hits;
    }
  }
  if (hits == 0) {
    throw ValidationError("window does not intersect the sampled box");
  }
  BinnedObservable out;
  out.space = Space::of_grid(g);
  out.bins = {OutcomeBin{-0.5, 0.5}, OutcomeBin{0.5, 1.5}};
  out.effects = {Mat::Identity(g.n, g.n) - q, q};
  return out;
}

}  // namespace qmeas
