#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "qgov/governor.hpp"
#include "qgov/krotov.hpp"
#include "qgov/units.hpp"

using namespace qgov;

namespace {

// Desk-scale stand-in for the published parameter set: same structure,
// shorter pulse, so unit tests stay fast. Convergence at the published
// durations is exercised by the acceptance suite.
GovernorConfig toy_config() {
  GovernorConfig c;
  c.delta = 0.06601;
  c.omega1 = 7.2449716268e-4;
  c.omega2 = 5.3746313155e-4;
  c.tau_trans = 6000.0;
  c.tau_free = 80000.0;
  c.gamma11 = c.gamma22 = 1.0 / units::ps_to_au(10.0);
  c.dt = 5.0;
  return c;
}

KrotovSettings toy_settings(const GovernorConfig& c) {
  KrotovSettings s;
  s.tau_trans = c.tau_trans;
  s.dt = 5.0;
  s.lambda = 5e-4;
  s.guess_amplitude = 2e-4;
  s.max_iterations = 200;
  s.target_log_infidelity = -4.0;
  return s;
}

ScenarioSetup ground_setup(const GovernorConfig& c) {
  GovernorScenario s;
  s.kind = ScenarioKind::full_equal_rates;
  s.target = TargetKind::ground_state;
  return build_scenario(s, c);
}

std::mt19937_64 rng(4242);

ComplexMatrix random_hermitian(int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(u(rng), u(rng));
  return 0.5 * (m + m.adjoint()).eval();
}

}  // namespace

TEST_CASE("make_targets") {
  const OperatorBasis basis = make_basis(BasisLayout{});

  const GateTarget identity{ComplexMatrix::Identity(4, 4), GateLabel::swap};
  const TargetSet same = make_targets(basis, identity);
  for (std::size_t j = 0; j < basis.ops.size(); ++j)
    CHECK((same.targets[j] - basis.ops[j]).cwiseAbs().maxCoeff() <= 1e-15);

  const TargetSet swapped = make_targets(basis, build_swap());
  ComplexMatrix expect = ComplexMatrix::Zero(4, 4);
  expect(2, 2) = 1.0;  // |2>_g<2| -> |1>_e<1|
  CHECK((swapped.targets[1] - expect).cwiseAbs().maxCoeff() <= 1e-15);

  // Unitary conjugation preserves orthonormality.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      CHECK(std::abs(hs_inner(swapped.targets[i], swapped.targets[j]) - want) <=
            1e-12);
    }
}

TEST_CASE("log_infidelity") {
  CHECK(log_infidelity(4.0) == doctest::Approx(-16.0));
  CHECK(log_infidelity(0.0) == doctest::Approx(0.0));
  CHECK(log_infidelity(3.6) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(log_infidelity(4.1), std::invalid_argument);
}

TEST_CASE("initial guess shape") {
  const GovernorConfig c = toy_config();
  KrotovSettings s = toy_settings(c);

  const ControlField field = initial_guess(s, c.delta);
  CHECK(field.samples.size() == 1200);
  CHECK(field.samples[0] ==
        doctest::Approx(s.guess_amplitude * envelope(s, 0.0)).epsilon(1e-12));

  // Dominant discrete-Fourier peak sits at the vertical gap.
  const std::size_t n = field.samples.size();
  double best_mag = -1.0;
  std::size_t best_bin = 0;
  for (std::size_t bin = 1; bin < n / 2; ++bin) {
    Complex acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      acc += field.samples[k] *
             std::exp(Complex(0.0, -2.0 * std::numbers::pi *
                                       static_cast<double>(bin * k) /
                                       static_cast<double>(n)));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best_bin = bin;
    }
  }
  const double peak_omega = 2.0 * std::numbers::pi *
                            static_cast<double>(best_bin) /
                            (static_cast<double>(n) * s.dt);
  CHECK(peak_omega == doctest::Approx(c.delta).epsilon(0.02));

  s.guess_amplitude = 0.0;
  const ControlField zero = initial_guess(s, c.delta);
  for (double v : zero.samples) CHECK(v == 0.0);
}

TEST_CASE("fidelity of the free propagator is the ceiling") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  const SystemModel unitary = setup.model.without_channels();
  const KrotovSettings s = toy_settings(c);

  // Gate = free evolution of the noise-free, dissipation-free system.
  ComplexMatrix u_free = ComplexMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    u_free(i, i) = std::exp(Complex(0.0, -setup.model.h0(i, i).real() *
                                             s.tau_trans));
  const OperatorBasis basis = make_basis(BasisLayout{});
  const TargetSet targets =
      make_targets(basis, GateTarget{u_free, GateLabel::swap});

  ControlField zero;
  zero.dt = s.dt;
  zero.samples.assign(1200, 0.0);
  const double f = fidelity(targets, zero, unitary);
  CHECK(std::abs(f - 4.0) <= 1e-10);

  // The swap is not achieved by free evolution.
  const TargetSet swap_targets = make_targets(basis, build_swap());
  CHECK(fidelity(swap_targets, zero, unitary) < 3.999);

  // F is real up to roundoff for Hermitian bases and targets: check the
  // imaginary parts of the summands directly.
  for (std::size_t j = 0; j < swap_targets.targets.size(); ++j) {
    const Trajectory back = propagate_adjoint_backward(
        swap_targets.targets[j], unitary, zero, s.tau_trans);
    CHECK(std::abs(hs_inner(basis.ops[j], back.states.front()).imag()) <=
          1e-12);
  }
}

TEST_CASE("field update coupling is purely imaginary for Hermitian inputs") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMatrix g = random_hermitian(4);
    const ComplexMatrix b = random_hermitian(4);
    const ComplexMatrix comm =
        setup.model.mu_control * g - g * setup.model.mu_control;
    CHECK(std::abs(hs_inner(comm, b).real()) <= 1e-10);
  }
}

TEST_CASE("zero strategy parameter leaves the field unchanged") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  KrotovSettings s = toy_settings(c);
  s.lambda = 0.0;

  const OperatorBasis basis = make_basis(BasisLayout{});
  const TargetSet targets = make_targets(basis, *setup.gate);

  OptimizationRecord rec;
  rec.field = initial_guess(s, c.delta);
  const OptimizationRecord out = krotov_sweep(rec, targets, setup.model, s);
  CHECK(out.field.samples == rec.field.samples);
  REQUIRE(out.F_history.size() >= 2);
  CHECK(out.F_history.back() ==
        doctest::Approx(out.F_history.front()).epsilon(1e-14));
}

TEST_CASE("gauge check: the free propagator needs no field") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  KrotovSettings s = toy_settings(c);
  s.guess_amplitude = 0.0;
  s.max_iterations = 3;
  s.target_log_infidelity = -30.0;  // force sweeps

  ComplexMatrix u_free = ComplexMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    u_free(i, i) = std::exp(Complex(0.0, -setup.model.h0(i, i).real() *
                                             s.tau_trans));
  const OptimizationRecord rec =
      optimize(GateTarget{u_free, GateLabel::swap}, setup.model, s);
  double max_amp = 0.0;
  for (double v : rec.field.samples) max_amp = std::max(max_amp, std::abs(v));
  CHECK(max_amp <= 1e-8);
}

TEST_CASE("first sweep increases the functional for the swap target") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  const KrotovSettings s = toy_settings(c);

  const OperatorBasis basis = make_basis(BasisLayout{});
  const TargetSet targets = make_targets(basis, *setup.gate);

  OptimizationRecord rec;
  rec.field = initial_guess(s, c.delta);
  const OptimizationRecord out = krotov_sweep(rec, targets, setup.model, s);
  REQUIRE(out.F_history.size() >= 2);
  CHECK(out.F_history.back() > out.F_history.front());
}

TEST_CASE("short optimization run: monotone history, engine matches fidelity()") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  KrotovSettings s = toy_settings(c);
  s.max_iterations = 40;
  s.target_log_infidelity = -30.0;

  const OptimizationRecord rec = optimize(*setup.gate, setup.model, s);
  REQUIRE(rec.F_history.size() >= 2);
  for (std::size_t i = 1; i < rec.F_history.size(); ++i)
    CHECK(rec.F_history[i] >= rec.F_history[i - 1] - 1e-12);
  CHECK(rec.F_history.back() > rec.F_history.front());

  // Independent matrix-path evaluation of the returned field.
  const OperatorBasis basis = make_basis(BasisLayout{});
  const TargetSet targets = make_targets(basis, *setup.gate);
  const double f_direct =
      fidelity(targets, rec.field, setup.model.without_channels());
  CHECK(f_direct == doctest::Approx(rec.F_history.back()).epsilon(1e-10));
}

TEST_CASE("optimized swap field moves pure states like the gate") {
  const GovernorConfig c = toy_config();
  const ScenarioSetup setup = ground_setup(c);
  KrotovSettings s = toy_settings(c);
  s.max_iterations = 2000;
  s.target_log_infidelity = -3.0;

  const OptimizationRecord rec = optimize(*setup.gate, setup.model, s);
  REQUIRE(rec.converged);
  const double infid = std::pow(10.0, log_infidelity(rec.F_history.back()));

  // Propagate |2>_g with no dissipation; the swap sends it to |1>_e.
  const SystemModel unitary = setup.model.without_channels();
  ComplexMatrix rho = ComplexMatrix::Zero(4, 4);
  rho(1, 1) = 1.0;
  const Trajectory t =
      propagate(rho, unitary, &rec.field, nullptr, s.tau_trans, rec.field.dt, 0);
  const double reached = t.states.back()(2, 2).real();
  CHECK(reached >= 1.0 - 50.0 * infid);
}
