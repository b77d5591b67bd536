#pragma once

#include "scheme.hpp"

namespace qmeas {

/// First-moment operator sum_i c_i E_i of a discrete observable, with c_i
/// the bin centers.
inline Mat first_moment_operator(const BinnedObservable& obs) {
  const int d = obs.space.dim();
  Mat m = Mat::Zero(d, d);
  for (int i = 0; i < obs.size(); ++i) {
    m += obs.bins[static_cast<std::size_t>(i)].center() *
         obs.effects[static_cast<std::size_t>(i)];
  }
  return m;
}

/// Generalized weak value <phi| F E[1] phi> / <phi| F phi> of an observable
/// between preparation phi and postselection effect F.
inline Complex weak_value(const BinnedObservable& obs, const Mat& postselect,
                          const StateVector& phi, double den_tol = 1e-12) {
  const double w = phi.space.weight();
  const Vec fphi = postselect * phi.a;
  const Complex den = phi.a.dot(fphi) * w;
  if (std::abs(den) <= den_tol) {
    throw PostselectionError("postselection probability vanishes; weak value undefined");
  }
  const Vec mphi = first_moment_operator(obs) * phi.a;
  const Complex num = fphi.dot(mphi) * w;
  return num / den;
}

/// Postselected mean pointer outcome: sum_j c_j p(j, F) / sum_j p(j, F) with
/// p(j, F) = tr[F I_j(rho)].  Bins are summed in outcome order, so the result
/// is bitwise reproducible for a given instrument.
inline double conditional_average(const Instrument& inst, const DensityOperator& state,
                                  const Mat& postselect, double den_tol = 1e-12) {
  const double w = state.space.weight();
  double num = 0.0;
  double den = 0.0;
  for (int j = 0; j < inst.size(); ++j) {
    const DensityOperator moved = inst.apply(j, state);
    const double p = (postselect * moved.rho).trace().real() * w;
    num += inst.bins[static_cast<std::size_t>(j)].center() * p;
    den += p;
  }
  if (std::abs(den) <= den_tol) {
    throw PostselectionError("postselection mass below threshold in pointer statistics");
  }
  return num / den;
}

/// Probe admissibility for the position-pointer route to Re of the weak
/// value: <Q> = 0 and <QP> = i/2.
inline void require_position_pointer_probe(const Grid& g, const Vec& probe,
                                           double tol = 1e-8) {
  const double mq = mean_position(g, probe);
  if (std::abs(mq) > tol) {
    std::ostringstream msg;
    msg << "probe has nonzero mean position " << mq;
    throw ValidationError(msg.str());
  }
  const Complex qp = qp_correlation(g, probe);
  if (std::abs(qp - Complex(0.0, 0.5)) > tol) {
    std::ostringstream msg;
    msg << "probe correlation <QP> = (" << qp.real() << ", " << qp.imag()
        << ") is not i/2";
    throw ValidationError(msg.str());
  }
}

/// Probe admissibility for the momentum-pointer route to Im of the weak
/// value: <P> = 0 and <P^2> = 1/2.
inline void require_momentum_pointer_probe(const Grid& g, const Vec& probe,
                                           double tol = 1e-8) {
  const double mp = mean_momentum(g, probe);
  if (std::abs(mp) > tol) {
    std::ostringstream msg;
    msg << "probe has nonzero mean momentum " << mp;
    throw ValidationError(msg.str());
  }
  const double p2 = second_moment_momentum(g, probe);
  if (std::abs(p2 - 0.5) > tol) {
    std::ostringstream msg;
    msg << "probe second moment <P^2> = " << p2 << " is not 1/2";
    throw ValidationError(msg.str());
  }
}

/// Conditional pointer averages along a ladder of coupling strengths.
struct LimitSeries {
  std::vector<double> lambdas;
  std::vector<double> values;
};

/// Quadratic fit a + b lambda + c lambda^2 to a limit series; `limit` is the
/// extrapolated lambda -> 0 value.
struct WeakLimitFit {
  double limit = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;
  double max_residual = 0.0;
};

inline WeakLimitFit extrapolate_weak_limit(const LimitSeries& series) {
  const std::size_t n = series.lambdas.size();
  if (n < 3) throw ValidationError("weak-limit extrapolation needs at least 3 points");
  if (series.values.size() != n) {
    throw ValidationError("limit series has mismatched lengths");
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(series.lambdas[i] > series.lambdas[i + 1])) {
      throw ValidationError("coupling ladder must be strictly decreasing");
    }
  }
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = series.lambdas[i];
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = l;
    a(static_cast<Eigen::Index>(i), 2) = l * l;
    y(static_cast<Eigen::Index>(i)) = series.values[i];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
  WeakLimitFit fit;
  fit.limit = coef(0);
  fit.linear = coef(1);
  fit.quadratic = coef(2);
  fit.max_residual = (a * coef - y).cwiseAbs().maxCoeff();
  return fit;
}

/// Position-pointer conditional averages over a coupling ladder; converges to
/// Re of the weak value for an admissible probe.
inline LimitSeries position_pointer_series(const BinnedObservable& target,
                                           const Grid& probe_grid, const Vec& probe,
                                           const StateVector& phi, const Mat& postselect,
                                           const std::vector<double>& lambdas) {
  require_position_pointer_probe(probe_grid, probe);
  const DensityOperator rho = DensityOperator::pure(phi);
  LimitSeries out;
  out.lambdas = lambdas;
  for (double l : lambdas) {
    const Instrument inst = standard_model(target, probe_grid, probe, l);
    out.values.push_back(conditional_average(inst, rho, postselect));
  }
  return out;
}

/// Momentum-pointer conditional averages over a coupling ladder; converges to
/// Im of the weak value for an admissible probe.
inline LimitSeries momentum_pointer_series(const BinnedObservable& target,
                                           const Grid& probe_grid, const Vec& probe,
                                           const StateVector& phi, const Mat& postselect,
                                           const std::vector<double>& lambdas) {
  require_momentum_pointer_probe(probe_grid, probe);
  const DensityOperator rho = DensityOperator::pure(phi);
  LimitSeries out;
  out.lambdas = lambdas;
  for (double l : lambdas) {
    if (!(l > 0.0)) {
      throw ValidationError("coupling ladder entries must be positive");
    }
    const Instrument inst = boost_scheme(target, probe_grid, probe, l);
    out.values.push_back(conditional_average(inst, rho, postselect));
  }
  return out;
}

}  // namespace qmeas
