#pragma once

#include "instrument.hpp"
#include "naimark.hpp"

namespace qmeas {

/// Indirect measurement scheme in dense form: couple the system to a probe
/// prepared in a pure state, evolve with a unitary, and read a pointer
/// observable on the probe.  Index layout is system-major, s * d_pr + a.
struct DenseScheme {
  Space system;
  Space probe;
  Vec probe_state;
  Mat unitary;
  BinnedObservable pointer;

  void validate(double tol = 1e-8) const {
    const int ds = system.dim();
    const int dp = probe.dim();
    if (probe_state.size() != dp) {
      throw ValidationError("probe state dimension does not match the probe space");
    }
    if (unitary.rows() != ds * dp || unitary.cols() != ds * dp) {
      throw ValidationError("coupling unitary has the wrong dimension");
    }
    const double nrm = probe_state.squaredNorm() * probe.weight();
    if (std::abs(nrm - 1.0) > tol) {
      throw ValidationError("probe state is not normalized");
    }
    if ((unitary.adjoint() * unitary - Mat::Identity(ds * dp, ds * dp))
            .cwiseAbs()
            .maxCoeff() > tol) {
      throw ValidationError("coupling is not unitary");
    }
  }

  /// U (rho (x) sigma sigma^dag) U^dag on system (x) probe.
  DensityOperator coupled_density(const DensityOperator& state) const {
    const Mat sigma = probe_state * probe_state.adjoint();
    const Mat joint = kron(state.rho, sigma);
    return DensityOperator{tensor(system, probe), unitary * joint * unitary.adjoint()};
  }

  /// Probability of a pointer outcome set read directly on the coupled state.
  double outcome_probability(const std::vector<int>& idx,
                             const DensityOperator& state) const {
    const DensityOperator joint = coupled_density(state);
    const Mat lifted =
        kron(Mat::Identity(system.dim(), system.dim()), pointer.effect_of(idx));
    return expect(joint, lifted).real();
  }

  /// The induced instrument on the system: outcome b, Kraus slots indexed by
  /// the probe basis, K_{ba} = sqrt(w_pr) (I (x) <a|) (I (x) Z_b^{1/2}) U (I (x) sigma).
  Instrument instrument() const {
    const int ds = system.dim();
    const int dpr = probe.dim();
    const double root_w = std::sqrt(probe.weight());
    Mat lift = Mat::Zero(ds * dpr, ds);
    for (int s = 0; s < ds; ++s) {
      lift.block(s * dpr, s, dpr, 1) = probe_state;
    }
    const Mat moved = unitary * lift;
    Instrument inst;
    inst.space = system;
    inst.bins = pointer.bins;
    inst.weights.assign(pointer.bins.size(), 1.0);
    for (const Mat& z : pointer.effects) {
      const Mat root = op_sqrt_psd(z);
      const Mat branch = kron(Mat::Identity(ds, ds), root) * moved;
      std::vector<Mat> ops;
      for (int a = 0; a < dpr; ++a) {
        Mat k(ds, ds);
        for (int s = 0; s < ds; ++s) k.row(s) = branch.row(s * dpr + a);
        ops.push_back(root_w * k);
      }
      inst.kraus.push_back(std::move(ops));
    }
    return inst;
  }

  BinnedObservable measured_observable() const { return instrument().observable(); }
};

namespace detail {

struct Spectral {
  std::vector<double> values;
  std::vector<Mat> projectors;
};

/// Spectral decomposition with eigenvalue clustering.
inline Spectral decompose(const Mat& a, double cluster_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.adjoint()));
  const int d = static_cast<int>(a.rows());
  Spectral out;
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
    out.values.push_back(mean / (j - i + 1));
    out.projectors.push_back(proj);
    i = j + 1;
  }
  return out;
}

inline bool is_projective(const BinnedObservable& obs, double tol = 1e-8) {
  for (const Mat& e : obs.effects) {
    if ((e * e - e).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

inline void require_probe_fits(const Grid& g, const Vec& probe, double reach) {
  const double mu = std::abs(mean_position(g, probe));
  const double sd = position_spread(g, probe);
  if (mu + reach + 5.0 * sd > g.length / 2) {
    std::ostringstream msg;
    msg << "probe support (center " << mu << ", spread " << sd
        << ") shifted by " << reach << " leaves the probe box";
    throw ValidationError(msg.str());
  }
}

}  // namespace detail

/// Approximate measurement of a discrete observable with a position pointer:
/// the probe is displaced by lambda times the outcome value and read out in
/// units of the pointer function x / lambda.
///
/// For a projective target the outcome kernel acts coherently across
/// eigenspaces (a single Kraus operator per pointer cell); a general target
/// is routed through its canonical dilation, giving one Kraus slot per
/// effect.  Outcome bins are the probe cells rescaled by 1 / lambda.
inline Instrument standard_model(const BinnedObservable& target, const Grid& probe_grid,
                                 const Vec& probe, double lambda,
                                 double drop_tol = 1e-10) {
  if (!(lambda > 0.0)) throw ValidationError("coupling strength must be positive");
  target.validate();
  double reach = 0.0;
  for (const OutcomeBin& b : target.bins) {
    reach = std::max(reach, std::abs(b.center()));
  }
  detail::require_probe_fits(probe_grid, probe, lambda * reach);

  const int nv = target.size();
  std::vector<Vec> shifted(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    shifted[static_cast<std::size_t>(i)] = translate_padded(
        probe_grid, probe, lambda * target.bins[static_cast<std::size_t>(i)].center(),
        drop_tol);
  }

  const bool projective = detail::is_projective(target);
  std::vector<Mat> roots;
  if (!projective) {
    for (const Mat& e : target.effects) roots.push_back(op_sqrt_psd(e));
  }

  const double root_l = std::sqrt(lambda);
  const int d = target.space.dim();
  Instrument inst;
  inst.space = target.space;
  inst.bins.reserve(static_cast<std::size_t>(probe_grid.n));
  inst.weights.assign(static_cast<std::size_t>(probe_grid.n), probe_grid.dx / lambda);
  for (int j = 0; j < probe_grid.n; ++j) {
    const double lo = (probe_grid.x(j) - probe_grid.dx / 2) / lambda;
    const double hi = (probe_grid.x(j) + probe_grid.dx / 2) / lambda;
    inst.bins.push_back(OutcomeBin{lo, hi});
    std::vector<Mat> ops;
    if (projective) {
      Mat k = Mat::Zero(d, d);
      for (int i = 0; i < nv; ++i) {
        k += shifted[static_cast<std::size_t>(i)][j] * target.effects[static_cast<std::size_t>(i)];
      }
      ops.push_back(root_l * k);
    } else {
      for (int i = 0; i < nv; ++i) {
        ops.push_back(root_l * shifted[static_cast<std::size_t>(i)][j] *
                      roots[static_cast<std::size_t>(i)]);
      }
    }
    inst.kraus.push_back(std::move(ops));
  }
  inst.validate(1e-4);
  return inst;
}

/// Pointer-noise distribution of the position-pointer model: the probe's
/// position statistics read through the pointer function x / lambda.
inline ProbabilityMeasure smearing_measure(const Grid& probe_grid, const Vec& probe,
                                           double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("coupling strength must be positive");
  ProbabilityMeasure mu;
  mu.bins.reserve(static_cast<std::size_t>(probe_grid.n));
  mu.p.reserve(static_cast<std::size_t>(probe_grid.n));
  const double mass = probe.squaredNorm() * probe_grid.dx;
  for (int j = 0; j < probe_grid.n; ++j) {
    const double lo = (probe_grid.x(j) - probe_grid.dx / 2) / lambda;
    const double hi = (probe_grid.x(j) + probe_grid.dx / 2) / lambda;
    mu.bins.push_back(OutcomeBin{lo, hi});
    mu.p.push_back(std::norm(probe[j]) * probe_grid.dx / mass);
  }
  return mu;
}

/// Coupled system (x) probe state of the position-pointer model for a pure
/// system state: each eigenbranch drags its own displaced probe copy.
inline StateVector standard_model_coupled(const BinnedObservable& target,
                                          const Grid& probe_grid, const Vec& probe,
                                          double lambda, const StateVector& system_state,
                                          double drop_tol = 1e-10) {
  target.validate();
  if (!detail::is_projective(target)) {
    throw ValidationError("coupled-state evolution needs a projective target");
  }
  const int d = target.space.dim();
  if (system_state.a.size() != d) {
    throw ValidationError("system state dimension does not match the target observable");
  }
  const Space joint = tensor(target.space, Space::of_grid(probe_grid));
  Vec amp = Vec::Zero(d * probe_grid.n);
  for (int i = 0; i < target.size(); ++i) {
    const Vec branch = target.effects[static_cast<std::size_t>(i)] * system_state.a;
    if (branch.squaredNorm() == 0.0) continue;
    const Vec moved = translate_padded(
        probe_grid, probe, lambda * target.bins[static_cast<std::size_t>(i)].center(),
        drop_tol);
    for (int s = 0; s < d; ++s) {
      for (int j = 0; j < probe_grid.n; ++j) {
        amp[s * probe_grid.n + j] += branch[s] * moved[j];
      }
    }
  }
  return StateVector{joint, std::move(amp)};
}

/// Momentum-pointer counterpart: the probe is boosted by lambda times the
/// outcome value and read out in momentum units p / lambda.  The measured
/// observable is a multiple of the identity for every outcome set — all the
/// information sits in the state change — and lambda = 0 is the exact
/// no-disturbance limit with unscaled momentum bins.
inline Instrument boost_scheme(const BinnedObservable& target, const Grid& probe_grid,
                               const Vec& probe, double lambda) {
  if (lambda < 0.0) throw ValidationError("coupling strength must be nonnegative");
  target.validate();
  if (!detail::is_projective(target)) {
    throw ValidationError("momentum-pointer scheme needs a projective target");
  }
  const int d = target.space.dim();
  Vec hat = momentum_wavefunction(probe_grid, probe);
  const double mass = hat.squaredNorm() * probe_grid.dp;
  hat /= std::sqrt(mass);

  Instrument inst;
  inst.space = target.space;
  const double scale = (lambda > 0.0) ? lambda : 1.0;
  inst.weights.assign(static_cast<std::size_t>(probe_grid.n), probe_grid.dp / scale);
  for (int m = 0; m < probe_grid.n; ++m) {
    const double lo = (probe_grid.p(m) - probe_grid.dp / 2) / scale;
    const double hi = (probe_grid.p(m) + probe_grid.dp / 2) / scale;
    inst.bins.push_back(OutcomeBin{lo, hi});
    Mat k;
    if (lambda > 0.0) {
      k = Mat::Zero(d, d);
      for (int i = 0; i < target.size(); ++i) {
        const double c = target.bins[static_cast<std::size_t>(i)].center();
        k += std::polar(1.0, -lambda * probe_grid.p(m) * c) *
             target.effects[static_cast<std::size_t>(i)];
      }
      k *= std::sqrt(lambda) * hat[m];
    } else {
      k = hat[m] * Mat::Identity(d, d);
    }
    inst.kraus.push_back({std::move(k)});
  }
  inst.validate(1e-8);
  return inst;
}

}  // namespace qmeas
