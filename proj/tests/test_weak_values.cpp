#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <qmeas/qmeas.hpp>

#include "oracles.hpp"

using qmeas::Complex;
using qmeas::Mat;
using qmeas::Vec;

namespace {

constexpr double kPi = std::numbers::pi;

qmeas::BinnedObservable qubit_z() {
  return qmeas::sharp_observable(qmeas::Space::finite(2), qmeas::sigma_z(), 2.0);
}

qmeas::StateVector preselect_real() {
  return qmeas::qubit_state(std::cos(kPi / 5), std::sin(kPi / 5));
}

qmeas::StateVector preselect_complex() {
  return qmeas::qubit_state(std::cos(kPi / 5),
                            std::polar(std::sin(kPi / 5), kPi / 7));
}

Mat plus_projector() {
  Vec plus(2);
  plus << Complex(1.0, 0.0), Complex(1.0, 0.0);
  return qmeas::projector_onto(plus);
}

// Narrow complex-width wave packet exp(-(a+ib) x^2); Im<QP> stays 1/2 but
// Re<QP> moves to -b/(2a), so the admissibility gate must reject it.
Vec squeezed_probe(const qmeas::Grid& g, double a, double b) {
  Vec v(g.n);
  for (int k = 0; k < g.n; ++k) {
    const double x = g.x(k);
    v[k] = std::exp(-Complex(a, b) * x * x);
  }
  v /= std::sqrt(v.squaredNorm() * g.dx);
  return v;
}

}  // namespace

TEST_CASE("first moment operator rebuilds the mean from effects") {
  REQUIRE(oracle::max_abs(qmeas::first_moment_operator(qubit_z()) - qmeas::sigma_z()) <
          1e-12);

  oracle::Rng rng(201);
  const qmeas::BinnedObservable obs =
      oracle::labeled_povm(qmeas::Space::finite(3), rng.povm(3, 3));
  Mat expected = Mat::Zero(3, 3);
  for (int i = 0; i < obs.size(); ++i) {
    expected += obs.bins[static_cast<std::size_t>(i)].center() *
                obs.effects[static_cast<std::size_t>(i)];
  }
  REQUIRE(oracle::max_abs(qmeas::first_moment_operator(obs) - expected) < 1e-12);
}

TEST_CASE("weak value reduces to the textbook ratio for rank-one postselection") {
  oracle::Rng rng(211);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec phi_a = rng.pure(2);
    const Vec psi = rng.pure(2);
    const qmeas::StateVector phi{qmeas::Space::finite(2), phi_a};
    const Complex overlap = psi.dot(phi_a);
    if (std::abs(overlap) < 1e-2) continue;

    const Complex expected = psi.dot(qmeas::sigma_z() * phi_a) / overlap;
    const Complex got = qmeas::weak_value(qubit_z(), qmeas::projector_onto(psi), phi);
    REQUIRE(std::abs(got - expected) < 1e-10);
  }
}

TEST_CASE("vanishing postselection probability is refused") {
  const qmeas::StateVector phi = qmeas::qubit_state(1.0, 0.0);
  Vec down(2);
  down << Complex(0.0, 0.0), Complex(1.0, 0.0);
  REQUIRE_THROWS_AS(qmeas::weak_value(qubit_z(), qmeas::projector_onto(down), phi),
                    qmeas::PostselectionError);
}

TEST_CASE("conditional average at tiny coupling approaches Re of the weak value") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const qmeas::StateVector probe =
      qmeas::gaussian_state(pg, 0.0, 0.0, 1.0 / std::sqrt(2.0));
  const qmeas::StateVector phi = preselect_real();
  const Mat f = plus_projector();

  const Complex ew = qmeas::weak_value(qubit_z(), f, phi);
  const qmeas::Instrument inst = qmeas::standard_model(qubit_z(), pg, probe.a, 1e-6);
  const double avg =
      qmeas::conditional_average(inst, qmeas::DensityOperator::pure(phi), f);
  REQUIRE(std::abs(avg - ew.real()) < 1e-4);

  REQUIRE_THROWS_AS(qmeas::conditional_average(inst, qmeas::DensityOperator::pure(phi),
                                               Mat::Zero(2, 2)),
                    qmeas::PostselectionError);
}

TEST_CASE("position pointer ladder follows the gaussian closed form") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const qmeas::StateVector probe =
      qmeas::gaussian_state(pg, 0.0, 0.0, 1.0 / std::sqrt(2.0));
  const qmeas::StateVector phi = preselect_real();
  const Mat f = plus_projector();
  const std::vector<double> lambdas = {0.4, 0.2, 0.1, 0.05};

  const qmeas::LimitSeries series =
      qmeas::position_pointer_series(qubit_z(), pg, probe.a, phi, f, lambdas);
  REQUIRE(series.values.size() == 4);

  // For this preparation the postselected mean has the closed form
  // cos(2 pi/5) / (1 + sin(2 pi/5) e^{-lambda^2}).
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double l = lambdas[i];
    const double closed = (std::cos(2.0 * kPi / 5.0) / 2.0) /
                          (0.5 + 0.5 * std::sin(2.0 * kPi / 5.0) * std::exp(-l * l));
    REQUIRE(series.values[i] == Catch::Approx(closed).margin(1e-6));
  }

  const qmeas::WeakLimitFit fit = qmeas::extrapolate_weak_limit(series);
  const Complex ew = qmeas::weak_value(qubit_z(), f, phi);
  REQUIRE(std::abs(fit.limit - ew.real()) < 1e-3);
  REQUIRE(fit.max_residual < 1e-4);

  // Halving the coupling must cut the systematic error fourfold.
  for (std::size_t i = 0; i + 1 < lambdas.size(); ++i) {
    const double e0 = std::abs(series.values[i] - ew.real());
    const double e1 = std::abs(series.values[i + 1] - ew.real());
    const double ratio = e0 / e1;
    REQUIRE(ratio > 3.5);
    REQUIRE(ratio < 4.5);
  }
}

TEST_CASE("quadratic extrapolation is exact on quadratic data") {
  qmeas::LimitSeries series;
  series.lambdas = {0.3, 0.2, 0.1, 0.05};
  for (double l : series.lambdas) {
    series.values.push_back(2.0 - 3.0 * l + 7.0 * l * l);
  }
  const qmeas::WeakLimitFit fit = qmeas::extrapolate_weak_limit(series);
  REQUIRE(fit.limit == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(fit.linear == Catch::Approx(-3.0).margin(1e-11));
  REQUIRE(fit.quadratic == Catch::Approx(7.0).margin(1e-10));
  REQUIRE(fit.max_residual < 1e-12);

  qmeas::LimitSeries short_series;
  short_series.lambdas = {0.2, 0.1};
  short_series.values = {1.0, 1.0};
  REQUIRE_THROWS_AS(qmeas::extrapolate_weak_limit(short_series), qmeas::ValidationError);

  qmeas::LimitSeries unsorted;
  unsorted.lambdas = {0.1, 0.2, 0.3};
  unsorted.values = {1.0, 1.0, 1.0};
  REQUIRE_THROWS_AS(qmeas::extrapolate_weak_limit(unsorted), qmeas::ValidationError);
}

TEST_CASE("probe admissibility gates catch displaced and squeezed probes") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);

  const qmeas::StateVector wide = qmeas::gaussian_state(pg, 0.0, 0.0, 1.0);
  REQUIRE_NOTHROW(qmeas::require_position_pointer_probe(pg, wide.a));

  const qmeas::StateVector shifted = qmeas::gaussian_state(pg, 0.5, 0.0, 1.0);
  REQUIRE_THROWS_AS(qmeas::require_position_pointer_probe(pg, shifted.a),
                    qmeas::ValidationError);

  const Vec squeezed = squeezed_probe(pg, 0.35, 0.22);
  REQUIRE_THROWS_AS(qmeas::require_position_pointer_probe(pg, squeezed),
                    qmeas::ValidationError);

  const qmeas::StateVector sym = qmeas::gaussian_state(pg, 0.0, 0.0,
                                                       1.0 / std::sqrt(2.0));
  REQUIRE_NOTHROW(qmeas::require_momentum_pointer_probe(pg, sym.a));
  REQUIRE_THROWS_AS(qmeas::require_momentum_pointer_probe(pg, wide.a),
                    qmeas::ValidationError);
  const qmeas::StateVector boosted =
      qmeas::gaussian_state(pg, 0.0, 0.3, 1.0 / std::sqrt(2.0));
  REQUIRE_THROWS_AS(qmeas::require_momentum_pointer_probe(pg, boosted.a),
                    qmeas::ValidationError);

  const qmeas::StateVector phi = preselect_real();
  REQUIRE_THROWS_AS(qmeas::position_pointer_series(qubit_z(), pg, squeezed, phi,
                                                   plus_projector(),
                                                   {0.4, 0.2, 0.1}),
                    qmeas::ValidationError);
}

TEST_CASE("inadmissible probes converge to the generalized limit instead") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const Vec squeezed = squeezed_probe(pg, 0.35, 0.22);
  const qmeas::StateVector phi = preselect_complex();
  const Mat f = plus_projector();
  const std::vector<double> lambdas = {0.4, 0.2, 0.1, 0.05};

  qmeas::LimitSeries series;
  series.lambdas = lambdas;
  const qmeas::DensityOperator rho = qmeas::DensityOperator::pure(phi);
  for (double l : lambdas) {
    const qmeas::Instrument inst = qmeas::standard_model(qubit_z(), pg, squeezed, l);
    series.values.push_back(qmeas::conditional_average(inst, rho, f));
  }
  const qmeas::WeakLimitFit fit = qmeas::extrapolate_weak_limit(series);

  const Complex ew = qmeas::weak_value(qubit_z(), f, phi);
  const Complex qp = qmeas::qp_correlation(pg, squeezed);
  const double expected = ew.real() + 2.0 * qp.real() * ew.imag();
  REQUIRE(std::abs(fit.limit - expected) < 1e-6);
  // The admissible-probe answer would be Re of the weak value; the squeezed
  // probe genuinely lands elsewhere.
  REQUIRE(std::abs(fit.limit - ew.real()) > 1e-2);
}

TEST_CASE("momentum pointer ladder extrapolates to Im of the weak value") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const qmeas::StateVector probe =
      qmeas::gaussian_state(pg, 0.0, 0.0, 1.0 / std::sqrt(2.0));
  const qmeas::StateVector phi = preselect_complex();
  const Mat f = plus_projector();
  const std::vector<double> lambdas = {0.4, 0.2, 0.1, 0.05};

  const qmeas::LimitSeries series =
      qmeas::momentum_pointer_series(qubit_z(), pg, probe.a, phi, f, lambdas);
  const qmeas::WeakLimitFit fit = qmeas::extrapolate_weak_limit(series);
  const Complex ew = qmeas::weak_value(qubit_z(), f, phi);
  REQUIRE(std::abs(fit.limit - ew.imag()) < 1e-3);

  // A real preparation has vanishing Im part; parity kills every ladder entry.
  const qmeas::StateVector real_phi = preselect_real();
  const qmeas::LimitSeries zero_series =
      qmeas::momentum_pointer_series(qubit_z(), pg, probe.a, real_phi, f, lambdas);
  for (double v : zero_series.values) {
    REQUIRE(std::abs(v) < 1e-12);
  }
}
