#pragma once

#include "observables.hpp"

namespace qmeas {

/// Uniform half-open phase-space axis: lo + i (hi - lo) / count, i < count.
inline std::vector<double> phase_axis(double lo, double hi, int count) {
  if (count <= 0 || !(hi > lo)) {
    throw ValidationError("phase-space axis needs count > 0 and hi > lo");
  }
  std::vector<double> xs(static_cast<std::size_t>(count));
  const double step = (hi - lo) / count;
  for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = lo + i * step;
  return xs;
}

struct PhaseSpaceDistribution {
  std::vector<double> qs;
  std::vector<double> ps;
  Eigen::MatrixXd values;  // (qs.size(), ps.size())
  double dq = 0.0;
  double dp = 0.0;

  double total() const { return values.sum() * dq * dp; }
};

/// Measurement kernel of the covariant phase-space observable: the probe
/// state reflected, conjugated and rescaled, phi_k(x) = sqrt(l) conj(phi(-l x)),
/// resampled onto the same grid by band-limited evaluation and normalized.
/// For l > 1 the evaluation points run past the box; they are zero-filled,
/// which is only sound if the probe has already decayed at the box edge.
inline Vec covariant_observable_kernel(const Grid& g, const Vec& probe, double lambda,
                                       double alias_tol = 1e-9) {
  if (!(lambda > 0.0)) throw ValidationError("kernel scale must be positive");
  if (lambda > 1.0) {
    double edge_mass = 0.0;
    double total = 0.0;
    for (int k = 0; k < g.n; ++k) {
      const double m = std::norm(probe[k]) * g.dx;
      total += m;
      if (std::abs(g.x(k)) > 0.45 * g.length) edge_mass += m;
    }
    if (edge_mass > alias_tol * total) {
      std::ostringstream msg;
      msg << "probe carries mass " << edge_mass / total
          << " near the box edge; rescaling by " << lambda << " would alias";
      throw NumericalError(msg.str());
    }
  }
  const Vec hat = to_momentum(probe);
  Vec kernel = Vec::Zero(g.n);
  const double half = g.length / 2;
  for (int k = 0; k < g.n; ++k) {
    const double t = -lambda * g.x(k);
    if (-half <= t && t <= half) {
      kernel[k] = std::sqrt(lambda) * std::conj(eval_trig(g, hat, t));
    }
  }
  const double mass = kernel.squaredNorm() * g.dx;
  if (!(mass > 0.0)) throw NumericalError("kernel vanished after resampling");
  return kernel / std::sqrt(mass);
}

namespace detail {

/// Low-rank view of a density operator for phase-space sampling.
struct StateRank {
  std::vector<double> weights;
  std::vector<Vec> vectors;  // plain-unit columns
};

inline StateRank low_rank(const DensityOperator& rho, double rel_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho.rho + rho.rho.adjoint()));
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  StateRank out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > rel_tol * top) {
      out.weights.push_back(es.eigenvalues()[i]);
      out.vectors.push_back(es.eigenvectors().col(i));
    }
  }
  return out;
}

}  // namespace detail

/// Husimi-type outcome density of the covariant observable:
/// g(q, p) = (1/2pi) <W_qp kernel | rho W_qp kernel>.
inline PhaseSpaceDistribution husimi(const Grid& g, const DensityOperator& rho,
                                     const Vec& kernel, const std::vector<double>& qs,
                                     const std::vector<double>& ps,
                                     Diagnostics* diag = nullptr) {
  if (qs.size() < 2 || ps.size() < 2) {
    throw ValidationError("phase-space box needs at least 2 samples per axis");
  }
  PhaseSpaceDistribution dist;
  dist.qs = qs;
  dist.ps = ps;
  dist.dq = qs[1] - qs[0];
  dist.dp = ps[1] - ps[0];
  dist.values.resize(static_cast<Eigen::Index>(qs.size()),
                     static_cast<Eigen::Index>(ps.size()));

  const detail::StateRank rank = detail::low_rank(rho);
  const double w2 = g.dx * g.dx;
  for (std::size_t iq = 0; iq < qs.size(); ++iq) {
    for (std::size_t ip = 0; ip < ps.size(); ++ip) {
      const Vec u = weyl_apply(g, kernel, qs[iq], ps[ip]);
      double acc = 0.0;
      for (std::size_t r = 0; r < rank.weights.size(); ++r) {
        acc += rank.weights[r] * std::norm(u.dot(rank.vectors[r]));
      }
      double v = acc * w2 / (2.0 * M_PI);
      if (v < -1e-10) {
        throw NumericalError("phase-space density went negative");
      }
      dist.values(static_cast<Eigen::Index>(iq), static_cast<Eigen::Index>(ip)) =
          std::max(v, 0.0);
    }
  }

  const double total = dist.total();
  if (total < 1.0 - 1e-2) {
    std::ostringstream msg;
    msg << "phase-space box captures only " << total
        << " of the outcome mass; enlarge the box";
    throw ValidationError(msg.str());
  }
  if (std::abs(total - 1.0) > 1e-3) {
    warn_if(diag, "phase-space normalization off by more than 1e-3");
  }
  return dist;
}

struct CompletenessReport {
  double min_overlap = 0.0;
  double zero_fraction = 0.0;
};

/// Scan |<kernel| W_qp kernel>| over the box; zeros are points where the
/// measurement statistics lose information about the state.  The default
/// tolerance sits just above the roundoff floor of the overlap sum, so a
/// gaussian kernel's exponentially small far-corner overlaps still count as
/// informative while a structural zero does not.
inline CompletenessReport completeness_check(const Grid& g, const Vec& kernel,
                                             const std::vector<double>& qs,
                                             const std::vector<double>& ps,
                                             double zero_tol = 1e-15) {
  CompletenessReport rep;
  rep.min_overlap = std::numeric_limits<double>::infinity();
  long zeros = 0;
  for (double q : qs) {
    for (double p : ps) {
      const Vec u = weyl_apply(g, kernel, q, p);
      const double ov = std::abs(u.dot(kernel)) * g.dx;
      rep.min_overlap = std::min(rep.min_overlap, ov);
      if (ov < zero_tol) ++zeros;
    }
  }
  rep.zero_fraction = static_cast<double>(zeros) /
                      (static_cast<double>(qs.size()) * static_cast<double>(ps.size()));
  return rep;
}

/// Clip negative eigenvalues and renormalize the trace; the returned distance
/// is the trace distance moved by the projection.
struct ProjectedState {
  DensityOperator state;
  double distance = 0.0;
};

inline ProjectedState project_to_state(const DensityOperator& rho) {
  const double w = rho.space.weight();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho.rho + rho.rho.adjoint()) * w);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const double s = lam.sum();
  if (!(s > 0.0)) throw NumericalError("state projection hit a non-positive operator");
  lam /= s;
  const Mat fixed =
      es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint() / w;
  ProjectedState out;
  out.state = DensityOperator{rho.space, fixed};
  out.distance = trace_distance(out.state, DensityOperator{rho.space, rho.rho});
  return out;
}

struct ReconstructedState {
  DensityOperator estimate;
  double cone_distance = 0.0;  // trace distance moved by the positivity projection
  double coverage = 1.0;       // masked fraction of the significant spectrum
  Diagnostics diagnostics;
};

/// Linear inversion of the phase-space statistics: Fourier-transform the
/// distribution, divide out the kernel's Weyl transform where it is above
/// tau, and resum against lattice Weyl operators.  The dual lattice
/// u = j dx, v = m dp keeps the resummation exactly orthogonal.
inline ReconstructedState phase_space_reconstruct(const Grid& g,
                                                  const PhaseSpaceDistribution& dist,
                                                  const Vec& kernel, double tau = 1e-6) {
  if (!(tau > 0.0) || tau >= 1.0) {
    throw ValidationError("inversion threshold must lie in (0, 1)");
  }
  const CompletenessReport comp = completeness_check(g, kernel, dist.qs, dist.ps);
  if (comp.zero_fraction > 0.0) {
    throw ValidationError("kernel overlaps vanish on the working box; statistics are not complete");
  }

  const double cand_tol = tau * tau;
  const int jlim = g.n / 2 - 1;
  auto scan_extent = [&](bool along_q) {
    int last = 0;
    int below = 0;
    for (int i = 0; i <= jlim; ++i) {
      const Complex chi = along_q ? weyl_lattice_overlap(g, kernel, i, 0)
                                  : weyl_lattice_overlap(g, kernel, 0, i);
      if (std::abs(chi) > cand_tol) {
        last = i;
        below = 0;
      } else if (++below >= 4) {
        break;
      }
    }
    return last;
  };
  const int jc = scan_extent(true);
  const int mc = scan_extent(false);

  const int nj = 2 * jc + 1;
  const int nm = 2 * mc + 1;
  Mat chi_k(nj, nm);
  for (int j = -jc; j <= jc; ++j) {
    for (int m = -mc; m <= mc; ++m) {
      chi_k(j + jc, m + mc) = weyl_lattice_overlap(g, kernel, j, m);
    }
  }

  // Separable Fourier transform of the sampled distribution onto the lattice.
  const int nq = static_cast<int>(dist.qs.size());
  const int np = static_cast<int>(dist.ps.size());
  Mat partial(nq, nj);
  for (int iq = 0; iq < nq; ++iq) {
    for (int j = -jc; j <= jc; ++j) {
      const double u = j * g.dx;
      Complex acc(0.0, 0.0);
      for (int ip = 0; ip < np; ++ip) {
        acc += dist.values(iq, ip) * std::polar(1.0, u * dist.ps[static_cast<std::size_t>(ip)]);
      }
      partial(iq, j + jc) = acc * dist.dp;
    }
  }
  Mat ghat(nj, nm);
  for (int j = 0; j < nj; ++j) {
    for (int m = -mc; m <= mc; ++m) {
      const double v = m * g.dp;
      Complex acc(0.0, 0.0);
      for (int iq = 0; iq < nq; ++iq) {
        acc += partial(iq, j) * std::polar(1.0, -v * dist.qs[static_cast<std::size_t>(iq)]);
      }
      ghat(j, m + mc) = acc * dist.dq;
    }
  }

  const double gmax = ghat.cwiseAbs().maxCoeff();
  long significant = 0;
  long covered = 0;
  Mat rho = Mat::Zero(g.n, g.n);
  for (int j = -jc; j <= jc; ++j) {
    for (int m = -mc; m <= mc; ++m) {
      const Complex gh = ghat(j + jc, m + mc);
      const Complex ck = chi_k(j + jc, m + mc);
      const bool sig = std::abs(gh) > 1e-8 * gmax;
      const bool masked = std::abs(ck) > tau;
      if (sig) {
        ++significant;
        if (masked) ++covered;
      }
      if (!masked) continue;
      const Complex coeff = gh / ck;
      const double u = j * g.dx;
      const double v = m * g.dp;
      const Complex front = coeff * std::polar(1.0, 0.5 * u * v);
      for (int l = 0; l < g.n; ++l) {
        const int row = ((l + j) % g.n + g.n) % g.n;
        rho(row, l) += front * std::polar(1.0, v * g.x(l));
      }
    }
  }
  rho /= static_cast<double>(g.n) * g.dx;
  rho = 0.5 * (rho + rho.adjoint()).eval();

  ReconstructedState out;
  out.coverage =
      significant > 0 ? static_cast<double>(covered) / static_cast<double>(significant) : 1.0;
  if (out.coverage < 0.99) {
    std::ostringstream msg;
    msg << "inversion mask covers only " << out.coverage
        << " of the significant spectrum; the problem is ill-posed at this threshold";
    out.diagnostics.warn(msg.str());
  }
  ProjectedState proj = project_to_state(DensityOperator{Space::of_grid(g), rho});
  out.estimate = std::move(proj.state);
  out.cone_distance = proj.distance;
  return out;
}

}  // namespace qmeas
