#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <qmeas/qmeas.hpp>

#include "oracles.hpp"

using qmeas::Complex;
using qmeas::Mat;
using qmeas::Vec;

namespace {

qmeas::BinnedObservable trine_povm() {
  std::vector<Mat> effects;
  for (int i = 0; i < 3; ++i) {
    const double half = i * std::numbers::pi / 3.0;
    Vec dir(2);
    dir << Complex(std::cos(half), 0.0), Complex(std::sin(half), 0.0);
    effects.push_back((2.0 / 3.0) * dir * dir.adjoint());
  }
  return oracle::labeled_povm(qmeas::Space::finite(2), effects);
}

qmeas::BinnedObservable qubit_z() {
  return qmeas::sharp_observable(qmeas::Space::finite(2), qmeas::sigma_z(), 2.0);
}

}  // namespace

TEST_CASE("luders instruments reproduce their observable") {
  oracle::Rng rng(101);
  const qmeas::BinnedObservable obs =
      oracle::labeled_povm(qmeas::Space::finite(3), rng.povm(3, 4));
  const qmeas::Instrument inst = qmeas::luders_instrument(obs);
  inst.validate();

  const qmeas::BinnedObservable back = inst.observable();
  for (int i = 0; i < obs.size(); ++i) {
    REQUIRE(oracle::max_abs(back.effects[static_cast<std::size_t>(i)] -
                            obs.effects[static_cast<std::size_t>(i)]) < 1e-10);
  }

  const qmeas::DensityOperator rho{qmeas::Space::finite(3), rng.density(3)};
  double total = 0.0;
  for (int i = 0; i < inst.size(); ++i) {
    const double p = inst.apply(i, rho).trace();
    const double direct = qmeas::expect(rho, obs.effects[static_cast<std::size_t>(i)]).real();
    REQUIRE(p == Catch::Approx(direct).margin(1e-10));
    total += p;
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("instrument validation flags a completeness defect") {
  qmeas::Instrument broken = qmeas::luders_instrument(trine_povm());
  broken.weights[0] = 0.5;
  REQUIRE_THROWS_AS(broken.validate(), qmeas::ValidationError);
}

TEST_CASE("dual channel is the adjoint of the state update") {
  oracle::Rng rng(111);
  const qmeas::BinnedObservable obs =
      oracle::labeled_povm(qmeas::Space::finite(3), rng.povm(3, 3));
  const qmeas::Instrument inst = qmeas::luders_instrument(obs);

  const qmeas::DensityOperator rho{qmeas::Space::finite(3), rng.density(3)};
  const Mat b = rng.hermitian(3);

  for (int i = 0; i < inst.size(); ++i) {
    const Complex lhs = qmeas::expect(inst.apply(i, rho), b);
    const Complex rhs = qmeas::expect(rho, inst.dual_apply(i, b));
    REQUIRE(std::abs(lhs - rhs) < 1e-10);
  }
  const std::vector<int> pair = {0, 2};
  const Complex lhs = qmeas::expect(inst.apply_set(pair, rho), b);
  const Complex rhs = qmeas::expect(rho, inst.dual_apply_set(pair, b));
  REQUIRE(std::abs(lhs - rhs) < 1e-10);

  REQUIRE(oracle::max_abs(inst.dual_apply_all(Mat::Identity(3, 3)) -
                          Mat::Identity(3, 3)) < 1e-8);
}

TEST_CASE("sequential joint observables keep the first margin exactly") {
  oracle::Rng rng(121);
  const qmeas::BinnedObservable first_obs =
      oracle::labeled_povm(qmeas::Space::finite(2), rng.povm(2, 2));
  const qmeas::BinnedObservable second_obs =
      oracle::labeled_povm(qmeas::Space::finite(2), rng.povm(2, 3));
  const qmeas::Instrument first = qmeas::luders_instrument(first_obs);
  const qmeas::JointObservable joint = qmeas::sequential_compose(first, second_obs);

  const qmeas::BinnedObservable m1 = joint.margin_first();
  for (int i = 0; i < first_obs.size(); ++i) {
    REQUIRE(oracle::max_abs(m1.effects[static_cast<std::size_t>(i)] -
                            first_obs.effects[static_cast<std::size_t>(i)]) < 1e-9);
  }

  const qmeas::BinnedObservable m2 = joint.margin_second();
  for (int j = 0; j < second_obs.size(); ++j) {
    const Mat expected =
        first.dual_apply_all(second_obs.effects[static_cast<std::size_t>(j)]);
    REQUIRE(oracle::max_abs(m2.effects[static_cast<std::size_t>(j)] - expected) < 1e-12);
  }

  const qmeas::DensityOperator rho{qmeas::Space::finite(2), rng.density(2)};
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double p = joint.probability({i}, {j}, rho);
      REQUIRE(p > -1e-12);
      total += p;
    }
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-9));

  REQUIRE_THROWS_AS(
      qmeas::sequential_compose(first, oracle::labeled_povm(qmeas::Space::finite(3),
                                                            rng.povm(3, 2))),
      qmeas::ValidationError);
}

TEST_CASE("naimark dilation pulls the observable back from the pointer") {
  const qmeas::BinnedObservable trine = trine_povm();
  trine.validate();
  const qmeas::NaimarkDilation dil = qmeas::naimark_dilate(trine);
  dil.validate();

  const qmeas::BinnedObservable back = dil.pulled_back_observable();
  for (int i = 0; i < trine.size(); ++i) {
    REQUIRE(oracle::max_abs(back.effects[static_cast<std::size_t>(i)] -
                            trine.effects[static_cast<std::size_t>(i)]) < 1e-8);
  }

  oracle::Rng rng(131);
  const qmeas::NaimarkDilation turned = qmeas::rotate_dilation(dil, rng.unitary(3));
  turned.validate();
  const qmeas::BinnedObservable back2 = turned.pulled_back_observable();
  for (int i = 0; i < trine.size(); ++i) {
    REQUIRE(oracle::max_abs(back2.effects[static_cast<std::size_t>(i)] -
                            trine.effects[static_cast<std::size_t>(i)]) < 1e-8);
  }

  REQUIRE_THROWS_AS(qmeas::rotate_dilation(dil, 2.0 * Mat::Identity(3, 3)),
                    qmeas::ValidationError);
}

TEST_CASE("dense schemes route probabilities three equivalent ways") {
  oracle::Rng rng(141);
  for (int trial = 0; trial < 3; ++trial) {
    const int ds = rng.integer(2, 4);
    const int dpr = rng.integer(2, 3);
    const int m = rng.integer(2, 3);

    qmeas::DenseScheme scheme;
    scheme.system = qmeas::Space::finite(ds);
    scheme.probe = qmeas::Space::finite(dpr);
    scheme.probe_state = rng.pure(dpr);
    scheme.unitary = rng.unitary(ds * dpr);
    scheme.pointer = oracle::labeled_povm(qmeas::Space::finite(dpr), rng.povm(dpr, m));
    scheme.validate();

    const qmeas::Instrument inst = scheme.instrument();
    inst.validate();
    const qmeas::BinnedObservable obs = scheme.measured_observable();
    obs.validate();

    const qmeas::DensityOperator rho{scheme.system, rng.density(ds)};
    for (int i = 0; i < m; ++i) {
      const double via_coupled = scheme.outcome_probability({i}, rho);
      const double via_instrument = inst.apply(i, rho).trace();
      const double via_observable =
          qmeas::expect(rho, obs.effects[static_cast<std::size_t>(i)]).real();
      REQUIRE(via_coupled == Catch::Approx(via_instrument).margin(1e-8));
      REQUIRE(via_coupled == Catch::Approx(via_observable).margin(1e-8));
    }
  }
}

TEST_CASE("position pointer model matches the smeared target observable") {
  const qmeas::Grid pg = qmeas::make_grid(256, 32.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0,
                                                         1.0 / std::sqrt(2.0));
  const qmeas::BinnedObservable target = qubit_z();
  const double lambda = 0.5;

  const qmeas::Instrument inst = qmeas::standard_model(target, pg, probe.a, lambda);
  inst.validate(1e-6);
  const qmeas::BinnedObservable measured = inst.observable();

  const qmeas::ProbabilityMeasure mu = qmeas::smearing_measure(pg, probe.a, lambda);
  const qmeas::BinnedObservable smeared = qmeas::convolve(mu, target);

  // Match bins by center; the lattices agree because lambda times the
  // eigenvalues lands on grid multiples.
  const double w = measured.bins[0].width();
  std::vector<bool> used(smeared.bins.size(), false);
  for (std::size_t i = 0; i < measured.bins.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < smeared.bins.size(); ++j) {
      if (std::abs(measured.bins[i].center() - smeared.bins[j].center()) < w / 4) {
        REQUIRE(oracle::max_abs(measured.effects[i] - smeared.effects[j]) < 1e-6);
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found) {
      REQUIRE(oracle::max_abs(measured.effects[i]) < 1e-9);
    }
  }
  for (std::size_t j = 0; j < smeared.bins.size(); ++j) {
    if (!used[j]) {
      REQUIRE(oracle::max_abs(smeared.effects[j]) < 1e-9);
    }
  }
}

TEST_CASE("position pointer model accepts unsharp targets") {
  const qmeas::Grid pg = qmeas::make_grid(128, 24.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0, 0.7);
  const qmeas::BinnedObservable trine = trine_povm();

  const qmeas::Instrument inst = qmeas::standard_model(trine, pg, probe.a, 0.75);
  inst.validate(1e-4);

  const qmeas::StateVector phi = qmeas::qubit_state(Complex(0.48, 0.36),
                                                    Complex(-0.6, 0.53));
  qmeas::StateVector unit = phi;
  unit.normalize();
  const qmeas::DensityOperator rho = qmeas::DensityOperator::pure(unit);
  double total = 0.0;
  for (int j = 0; j < inst.size(); ++j) total += inst.apply(j, rho).trace();
  REQUIRE(total == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("position pointer model relabels outcomes by the coupling") {
  const qmeas::Grid pg = qmeas::make_grid(128, 24.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0, 0.7);
  const double lambda = 0.5;
  const qmeas::Instrument inst = qmeas::standard_model(qubit_z(), pg, probe.a, lambda);
  for (int j = 0; j < inst.size(); j += 17) {
    const qmeas::OutcomeBin& b = inst.bins[static_cast<std::size_t>(j)];
    REQUIRE(b.lo == Catch::Approx((pg.x(j) - pg.dx / 2) / lambda).margin(1e-12));
    REQUIRE(b.hi == Catch::Approx((pg.x(j) + pg.dx / 2) / lambda).margin(1e-12));
  }

  REQUIRE_THROWS_AS(qmeas::standard_model(qubit_z(), pg, probe.a, 0.0),
                    qmeas::ValidationError);
}

TEST_CASE("position pointer model refuses probes that spill over the box") {
  const qmeas::Grid pg = qmeas::make_grid(256, 32.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0, 1.0);
  REQUIRE_THROWS_AS(qmeas::standard_model(qubit_z(), pg, probe.a, 14.0),
                    qmeas::ValidationError);
}

TEST_CASE("coupled evolution agrees with the induced instrument") {
  const qmeas::Grid pg = qmeas::make_grid(128, 24.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0,
                                                         1.0 / std::sqrt(2.0));
  const qmeas::BinnedObservable target = qubit_z();
  const double lambda = 1.0;

  qmeas::StateVector phi = qmeas::qubit_state(Complex(0.8, 0.1), Complex(0.33, -0.47));
  phi.normalize();
  const qmeas::StateVector coupled =
      qmeas::standard_model_coupled(target, pg, probe.a, lambda, phi);
  REQUIRE(coupled.norm() == Catch::Approx(1.0).epsilon(1e-10));

  const qmeas::Instrument inst = qmeas::standard_model(target, pg, probe.a, lambda);
  const qmeas::DensityOperator rho = qmeas::DensityOperator::pure(phi);
  for (int j = 0; j < pg.n; j += 13) {
    double from_coupled = 0.0;
    for (int s = 0; s < 2; ++s) {
      from_coupled += std::norm(coupled.a[s * pg.n + j]) * pg.dx;
    }
    REQUIRE(from_coupled == Catch::Approx(inst.apply(j, rho).trace()).margin(1e-8));
  }

  REQUIRE_THROWS_AS(qmeas::standard_model_coupled(trine_povm(), pg, probe.a, 1.0, phi),
                    qmeas::ValidationError);
}

TEST_CASE("momentum pointer scheme measures nothing but still disturbs") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0,
                                                         1.0 / std::sqrt(2.0));
  const qmeas::BinnedObservable target = qubit_z();
  const double lambda = 0.3;

  const qmeas::Instrument inst = qmeas::boost_scheme(target, pg, probe.a, lambda);
  inst.validate();

  // Every outcome effect is a multiple of the identity: the pointer
  // statistics carry no information about the system.
  const qmeas::BinnedObservable obs = inst.observable();
  double total = 0.0;
  for (int m = 0; m < obs.size(); ++m) {
    const Mat& e = obs.effects[static_cast<std::size_t>(m)];
    const double c = e.trace().real() / 2.0;
    REQUIRE(oracle::max_abs(e - c * Mat::Identity(2, 2)) < 1e-8);
    total += c;
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-8));

  // The dual action on one outcome is the boosted conjugation weighted by the
  // pointer momentum density.
  Vec hat = qmeas::momentum_wavefunction(pg, probe.a);
  hat /= std::sqrt(hat.squaredNorm() * pg.dp);
  const Mat b = qmeas::sigma_x();
  Mat expected_all = Mat::Zero(2, 2);
  for (int m = 0; m < pg.n; ++m) {
    const Complex i1(0.0, 1.0);
    const Mat u = oracle::expm(i1 * lambda * pg.p(m) * qmeas::sigma_z());
    const Mat term = std::norm(hat[m]) * pg.dp * (u * b * u.adjoint());
    expected_all += term;
    if (m % 37 == 0) {
      REQUIRE(oracle::max_abs(inst.dual_apply(m, b) - term) < 1e-10);
    }
  }
  REQUIRE(oracle::max_abs(inst.dual_apply_all(b) - expected_all) < 1e-6);
}

TEST_CASE("momentum pointer scheme at zero coupling is the identity channel") {
  const qmeas::Grid pg = qmeas::make_grid(256, 24.0);
  const qmeas::StateVector probe = qmeas::gaussian_state(pg, 0.0, 0.0,
                                                         1.0 / std::sqrt(2.0));
  const qmeas::Instrument inst = qmeas::boost_scheme(qubit_z(), pg, probe.a, 0.0);
  inst.validate();

  Vec hat = qmeas::momentum_wavefunction(pg, probe.a);
  hat /= std::sqrt(hat.squaredNorm() * pg.dp);
  const Mat b = qmeas::sigma_y();
  for (int m = 0; m < pg.n; m += 41) {
    const Mat expected = std::norm(hat[m]) * pg.dp * b;
    REQUIRE(oracle::max_abs(inst.dual_apply(m, b) - expected) < 1e-12);
  }

  REQUIRE_THROWS_AS(qmeas::boost_scheme(trine_povm(), pg, probe.a, 0.5),
                    qmeas::ValidationError);
  REQUIRE_THROWS_AS(qmeas::boost_scheme(qubit_z(), pg, probe.a, -0.1),
                    qmeas::ValidationError);
}
