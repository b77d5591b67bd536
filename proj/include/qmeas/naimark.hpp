#pragma once

#include "observables.hpp"

namespace qmeas {

/// Isometric dilation of a discrete observable: V maps the system into
/// system (x) pointer, and the observable is recovered by pulling the pointer
/// projections back through V.  Index layout is system-major, s * d_a + i.
struct NaimarkDilation {
  Space system;
  Space pointer_space;
  Mat v;                     // (d_s * d_a) x d_s isometry
  BinnedObservable pointer;  // sharp observable on the pointer factor

  void validate(double tol = 1e-10) const {
    const int ds = system.dim();
    if (v.cols() != ds || v.rows() != ds * pointer_space.dim()) {
      throw ValidationError("dilation isometry has the wrong shape");
    }
    const Mat gram = v.adjoint() * v;
    if ((gram - Mat::Identity(ds, ds)).cwiseAbs().maxCoeff() > tol) {
      throw ValidationError("dilation map is not an isometry");
    }
  }

  /// Effects V^dag (I (x) Z_i) V, one per pointer outcome.
  BinnedObservable pulled_back_observable() const {
    const int ds = system.dim();
    BinnedObservable out;
    out.space = system;
    out.bins = pointer.bins;
    for (const Mat& z : pointer.effects) {
      const Mat lifted = kron(Mat::Identity(ds, ds), z);
      out.effects.push_back(v.adjoint() * lifted * v);
    }
    return out;
  }
};

/// Canonical dilation V psi = sum_i (E_i^{1/2} psi) (x) |i>, with the pointer
/// reading out the slot index i.  Outcome bins are carried over unchanged.
inline NaimarkDilation naimark_dilate(const BinnedObservable& obs) {
  const int ds = obs.space.dim();
  const int da = obs.size();
  NaimarkDilation d;
  d.system = obs.space;
  d.pointer_space = Space::finite(da);
  d.v = Mat::Zero(ds * da, ds);
  for (int i = 0; i < da; ++i) {
    const Mat root = op_sqrt_psd(obs.effects[static_cast<std::size_t>(i)]);
    for (int s = 0; s < ds; ++s) {
      d.v.row(s * da + i) = root.row(s);
    }
  }
  d.pointer.space = d.pointer_space;
  d.pointer.bins = obs.bins;
  for (int i = 0; i < da; ++i) {
    Mat z = Mat::Zero(da, da);
    z(i, i) = 1.0;
    d.pointer.effects.push_back(z);
  }
  d.validate();
  return d;
}

/// Conjugate a dilation by a unitary on the pointer: V' = (I (x) R) V with
/// the pointer observable rotated to R Z_i R^dag.  The pulled-back system
/// observable is unchanged.
inline NaimarkDilation rotate_dilation(const NaimarkDilation& d, const Mat& r) {
  const int da = d.pointer_space.dim();
  if (r.rows() != da || r.cols() != da) {
    throw ValidationError("pointer rotation has the wrong dimension");
  }
  if ((r.adjoint() * r - Mat::Identity(da, da)).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("pointer rotation is not unitary");
  }
  NaimarkDilation out = d;
  out.v = kron(Mat::Identity(d.system.dim(), d.system.dim()), r) * d.v;
  for (Mat& z : out.pointer.effects) z = r * z * r.adjoint();
  out.validate();
  return out;
}

}  // namespace qmeas
