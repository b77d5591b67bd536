#pragma once

#include "weak_values.hpp"

namespace qmeas {

/// Pointwise wavefunction estimation: weakly couple a qubit meter to the
/// indicator of each position interval, postselect on momentum in a narrow
/// window J = [-eps/2, eps/2), and read the interval's complex amplitude off
/// the meter's Pauli averages.

enum class PauliAxis { x, y };

inline std::vector<int> momentum_window(const Grid& g, double eps) {
  std::vector<int> idx;
  for (int m = 0; m < g.n; ++m) {
    if (-eps / 2 <= g.p(m) && g.p(m) < eps / 2) idx.push_back(m);
  }
  return idx;
}

/// Indicator projection of the interval applied to a grid state.
inline Vec interval_projection(const Grid& g, const Vec& phi, const OutcomeBin& interval) {
  Vec out = Vec::Zero(g.n);
  for (int k = 0; k < g.n; ++k) {
    if (interval.contains(g.x(k))) out[k] = phi[k];
  }
  return out;
}

/// Couple the interval indicator to a qubit meter: the inside-the-interval
/// branch rotates the meter by alpha, the rest leaves it in |0>.  Index
/// layout is grid-major, k * 2 + s.
inline StateVector direct_couple(const Grid& g, const Vec& phi,
                                 const OutcomeBin& interval, double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  Vec amp = Vec::Zero(2 * g.n);
  for (int k = 0; k < g.n; ++k) {
    if (interval.contains(g.x(k))) {
      amp[2 * k] = c * phi[k];
      amp[2 * k + 1] = s * phi[k];
    } else {
      amp[2 * k] = phi[k];
    }
  }
  return StateVector{tensor(Space::of_grid(g), Space::finite(2)), std::move(amp)};
}

/// Meter Pauli statistics conditioned on the system's momentum landing in
/// the window: P(+-) proportional to the window-filtered mass of the meter
/// eigencomponents.
inline ProbabilityMeasure direct_conditionals(const Grid& g, const StateVector& hybrid,
                                              double eps, PauliAxis axis,
                                              double mass_tol = 1e-12) {
  if (hybrid.a.size() != 2 * g.n) {
    throw ValidationError("hybrid state does not match the grid");
  }
  Vec comp0(g.n);
  Vec comp1(g.n);
  for (int k = 0; k < g.n; ++k) {
    comp0[k] = hybrid.a[2 * k];
    comp1[k] = hybrid.a[2 * k + 1];
  }
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  Vec plus(g.n);
  Vec minus(g.n);
  if (axis == PauliAxis::x) {
    plus = inv_rt2 * (comp0 + comp1);
    minus = inv_rt2 * (comp0 - comp1);
  } else {
    plus = inv_rt2 * (comp0 - Complex(0, 1) * comp1);
    minus = inv_rt2 * (comp0 + Complex(0, 1) * comp1);
  }
  const std::vector<int> window = momentum_window(g, eps);
  const Vec hat_plus = to_momentum(plus);
  const Vec hat_minus = to_momentum(minus);
  double mass_plus = 0.0;
  double mass_minus = 0.0;
  for (int m : window) {
    mass_plus += std::norm(hat_plus[m]) * g.dx;
    mass_minus += std::norm(hat_minus[m]) * g.dx;
  }
  const double total = mass_plus + mass_minus;
  if (total <= mass_tol) {
    throw PostselectionError("postselection mass below threshold in the momentum window");
  }
  ProbabilityMeasure out;
  out.bins = {OutcomeBin{0.0, 2.0}, OutcomeBin{-2.0, 0.0}};
  out.p = {mass_plus / total, mass_minus / total};
  return out;
}

inline double conditional_pauli_average(const Grid& g, const StateVector& hybrid,
                                        double eps, PauliAxis axis) {
  const ProbabilityMeasure m = direct_conditionals(g, hybrid, eps, axis);
  return m.p[0] - m.p[1];
}

/// Finite-alpha amplitude estimate for one interval: (<sigma_x> + i <sigma_y>)
/// conditioned on the momentum window, scaled by 1 / (2 sin alpha).
inline Complex direct_point(const Grid& g, const Vec& phi, const OutcomeBin& interval,
                            double alpha, double eps) {
  const StateVector hybrid = direct_couple(g, phi, interval, alpha);
  const double ax = conditional_pauli_average(g, hybrid, eps, PauliAxis::x);
  const double ay = conditional_pauli_average(g, hybrid, eps, PauliAxis::y);
  return Complex(ax, ay) / (2.0 * std::sin(alpha));
}

/// The alpha -> 0 target of direct_point: the matrix element
/// <phi| P(J) Q_i phi> computed without any meter.
inline Complex direct_point_formula(const Grid& g, const Vec& phi,
                                    const OutcomeBin& interval, double eps) {
  const Vec inside = interval_projection(g, phi, interval);
  Vec hat = to_momentum(inside);
  const std::vector<int> window = momentum_window(g, eps);
  Vec masked = Vec::Zero(g.n);
  for (int m : window) masked[m] = hat[m];
  const Vec filtered = from_momentum(masked);
  return phi.dot(filtered) * g.dx;
}

struct DirectConfig {
  double window_lo = -8.0;
  double window_hi = 8.0;
  int interval_count = 64;
  double alpha = 0.05;
  double epsilon = 0.0;  // momentum window width, at least one momentum cell
  double postselection_threshold = 1e-10;

  void validate(const Grid& g) const {
    if (!(alpha > 0.0) || alpha > M_PI / 4) {
      throw ValidationError("coupling angle must lie in (0, pi/4]");
    }
    if (epsilon < g.dp) {
      throw ValidationError("momentum window narrower than one momentum cell");
    }
    if (interval_count < 1) throw ValidationError("need at least one interval");
    if (!(window_hi > window_lo) || window_lo < -g.length / 2 ||
        window_hi > g.length / 2) {
      throw ValidationError("interval window does not fit the grid box");
    }
    if (!(postselection_threshold > 0.0)) {
      throw ValidationError("postselection threshold must be positive");
    }
  }
};

struct ReconstructionReport {
  Vec estimate;                     // normalized step-function amplitudes on the grid
  std::vector<double> centers;      // interval centers
  std::vector<Complex> raw_points;  // per-interval estimates (or direct matrix
                                    // elements when postselection failed)
  double postselection_mass = 0.0;
  bool failed = false;
  double fidelity = 0.0;
  Diagnostics diagnostics;
};

/// Scan every interval, assemble the per-interval amplitudes into a
/// step-function estimate, and normalize.  The interval values are divided by
/// the interval's cell count so that intervals realized with unequal numbers
/// of grid cells still estimate a density.  The unknown overall constant is
/// fixed by L^2 normalization and a global phase convention (largest point
/// real positive).
inline ReconstructionReport direct_reconstruct(const Grid& g, const Vec& phi_true,
                                               const DirectConfig& cfg) {
  cfg.validate(g);
  const std::vector<OutcomeBin> bins =
      make_uniform_bins(cfg.window_lo, cfg.window_hi, cfg.interval_count);

  ReconstructionReport report;
  for (const OutcomeBin& b : bins) report.centers.push_back(b.center());

  const double total_mass = phi_true.squaredNorm() * g.dx;
  double window_mass = 0.0;
  for (int k = 0; k < g.n; ++k) {
    if (cfg.window_lo <= g.x(k) && g.x(k) < cfg.window_hi) {
      window_mass += std::norm(phi_true[k]) * g.dx;
    }
  }
  if (window_mass < (1.0 - 1e-6) * total_mass) {
    std::ostringstream msg;
    msg << "interval window holds only " << window_mass / total_mass
        << " of the state's mass";
    report.diagnostics.warn(msg.str());
  }

  const Vec hat = to_momentum(phi_true);
  double mass = 0.0;
  for (int m : momentum_window(g, cfg.epsilon)) mass += std::norm(hat[m]) * g.dx;
  report.postselection_mass = mass;

  if (mass < cfg.postselection_threshold) {
    report.failed = true;
    report.diagnostics.warn("postselection mass below threshold");
    for (const OutcomeBin& b : bins) {
      report.raw_points.push_back(direct_point_formula(g, phi_true, b, cfg.epsilon));
    }
    report.estimate = Vec::Zero(g.n);
    report.fidelity = 0.0;
    return report;
  }

  for (const OutcomeBin& b : bins) {
    report.raw_points.push_back(direct_point(g, phi_true, b, cfg.alpha, cfg.epsilon));
  }

  Vec estimate = Vec::Zero(g.n);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    int cells = 0;
    for (int k = 0; k < g.n; ++k) {
      if (bins[i].contains(g.x(k))) ++cells;
    }
    if (cells == 0) continue;
    const Complex density = report.raw_points[i] / (cells * g.dx);
    for (int k = 0; k < g.n; ++k) {
      if (bins[i].contains(g.x(k))) estimate[k] = density;
    }
  }

  const double nrm = std::sqrt(estimate.squaredNorm() * g.dx);
  if (nrm <= 0.0) {
    throw NumericalError("reconstruction produced an identically zero estimate");
  }
  estimate /= nrm;

  std::size_t peak = 0;
  for (std::size_t i = 1; i < report.raw_points.size(); ++i) {
    if (std::abs(report.raw_points[i]) > std::abs(report.raw_points[peak])) peak = i;
  }
  const Complex top = report.raw_points[peak];
  if (std::abs(top) > 0.0) estimate *= std::conj(top) / std::abs(top);

  report.estimate = estimate;
  const Complex overlap = estimate.dot(phi_true) * g.dx /
                          std::sqrt(total_mass);
  report.fidelity = std::min(1.0, std::norm(overlap));
  return report;
}

}  // namespace qmeas
