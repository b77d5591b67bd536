#pragma once

#include "observables.hpp"

namespace qmeas {

/// Completely positive, trace-preserving-in-total measurement channel with a
/// binned outcome set.  Outcome i carries a quadrature weight w_i (the cell
/// width for continuum outcomes, 1 for counting measures) and one or more
/// Kraus operators; the induced effect is E_i = w_i sum_a K_{ia}^dag K_{ia}.
struct Instrument {
  Space space;
  std::vector<OutcomeBin> bins;
  std::vector<double> weights;
  std::vector<std::vector<Mat>> kraus;

  int size() const { return static_cast<int>(bins.size()); }

  void validate(double tol = 1e-8) const {
    if (bins.size() != kraus.size() || bins.size() != weights.size()) {
      throw ValidationError("instrument has mismatched outcome data");
    }
    const int d = space.dim();
    Mat sum = Mat::Zero(d, d);
    for (std::size_t i = 0; i < kraus.size(); ++i) {
      for (const Mat& k : kraus[i]) {
        if (k.rows() != d || k.cols() != d) {
          throw ValidationError("Kraus operator dimension does not match the space");
        }
        sum += weights[i] * (k.adjoint() * k);
      }
    }
    const double err = (sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
    if (err > tol) {
      std::ostringstream msg;
      msg << "instrument is not normalized (completeness defect " << err << ")";
      throw ValidationError(msg.str());
    }
  }

  /// The observable measured by this instrument.
  BinnedObservable observable() const {
    BinnedObservable out;
    out.space = space;
    out.bins = bins;
    const int d = space.dim();
    for (std::size_t i = 0; i < kraus.size(); ++i) {
      Mat e = Mat::Zero(d, d);
      for (const Mat& k : kraus[i]) e += weights[i] * (k.adjoint() * k);
      out.effects.push_back(e);
    }
    return out;
  }

  /// Unnormalized post-measurement state for one outcome; its trace is the
  /// outcome probability.
  DensityOperator apply(int i, const DensityOperator& state) const {
    const int d = space.dim();
    Mat out = Mat::Zero(d, d);
    for (const Mat& k : kraus[static_cast<std::size_t>(i)]) {
      out += weights[static_cast<std::size_t>(i)] * (k * state.rho * k.adjoint());
    }
    return DensityOperator{space, out};
  }

  /// Unnormalized post-measurement state for a set of outcomes.
  DensityOperator apply_set(const std::vector<int>& idx,
                            const DensityOperator& state) const {
    const int d = space.dim();
    Mat out = Mat::Zero(d, d);
    for (int i : idx) {
      for (const Mat& k : kraus[static_cast<std::size_t>(i)]) {
        out += weights[static_cast<std::size_t>(i)] * (k * state.rho * k.adjoint());
      }
    }
    return DensityOperator{space, out};
  }

  /// Heisenberg-picture dual for one outcome: w_i sum_a K^dag B K.
  Mat dual_apply(int i, const Mat& b) const {
    const int d = space.dim();
    Mat out = Mat::Zero(d, d);
    for (const Mat& k : kraus[static_cast<std::size_t>(i)]) {
      out += weights[static_cast<std::size_t>(i)] * (k.adjoint() * b * k);
    }
    return out;
  }

  Mat dual_apply_set(const std::vector<int>& idx, const Mat& b) const {
    const int d = space.dim();
    Mat out = Mat::Zero(d, d);
    for (int i : idx) out += dual_apply(i, b);
    return out;
  }

  Mat dual_apply_all(const Mat& b) const {
    std::vector<int> idx(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i) idx[static_cast<std::size_t>(i)] = i;
    return dual_apply_set(idx, b);
  }
};

/// Luders instrument of a discrete observable: one Kraus E_i^{1/2} per
/// outcome, unit weights.
inline Instrument luders_instrument(const BinnedObservable& obs) {
  Instrument inst;
  inst.space = obs.space;
  inst.bins = obs.bins;
  inst.weights.assign(obs.bins.size(), 1.0);
  for (const Mat& e : obs.effects) inst.kraus.push_back({op_sqrt_psd(e)});
  return inst;
}

/// Joint observable of two measurements performed in sequence: outcome (i, j)
/// has effect (first dual at i)(second effect j).  Summing over j recovers
/// the first observable exactly; summing over i gives the second observable
/// as distorted by the first measurement.
struct JointObservable {
  Space space;
  std::vector<OutcomeBin> bins_first;
  std::vector<OutcomeBin> bins_second;
  std::vector<std::vector<Mat>> effects;  // [i][j]

  BinnedObservable margin_first() const {
    BinnedObservable out;
    out.space = space;
    out.bins = bins_first;
    const int d = space.dim();
    for (std::size_t i = 0; i < effects.size(); ++i) {
      Mat e = Mat::Zero(d, d);
      for (const Mat& m : effects[i]) e += m;
      out.effects.push_back(e);
    }
    return out;
  }

  BinnedObservable margin_second() const {
    BinnedObservable out;
    out.space = space;
    out.bins = bins_second;
    const int d = space.dim();
    for (std::size_t j = 0; j < bins_second.size(); ++j) {
      Mat e = Mat::Zero(d, d);
      for (std::size_t i = 0; i < effects.size(); ++i) e += effects[i][j];
      out.effects.push_back(e);
    }
    return out;
  }

  /// Probability of the product set X x Y.
  double probability(const std::vector<int>& first_idx,
                     const std::vector<int>& second_idx,
                     const DensityOperator& state) const {
    const int d = space.dim();
    Mat e = Mat::Zero(d, d);
    for (int i : first_idx) {
      for (int j : second_idx) {
        e += effects[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    return expect(state, e).real();
  }
};

inline JointObservable sequential_compose(const Instrument& first,
                                          const BinnedObservable& second) {
  if (first.space.dim() != second.space.dim()) {
    throw ValidationError("sequential measurements act on different spaces");
  }
  JointObservable joint;
  joint.space = first.space;
  joint.bins_first = first.bins;
  joint.bins_second = second.bins;
  joint.effects.resize(static_cast<std::size_t>(first.size()));
  for (int i = 0; i < first.size(); ++i) {
    auto& row = joint.effects[static_cast<std::size_t>(i)];
    row.reserve(second.effects.size());
    for (const Mat& e : second.effects) {
      row.push_back(first.dual_apply(i, e));
    }
  }
  return joint;
}

}  // namespace qmeas
