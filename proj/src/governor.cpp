#include "qgov/governor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qgov {

namespace {

struct BytePair {
  Complex a;
  Complex b;
};

BytePair byte_amplitudes(double b_n) {
  const double s = 1.0 / std::sqrt(1.0 + b_n * b_n);
  return {Complex(s, 0.0), Complex(0.0, -b_n * s)};
}

ComplexMatrix dipole_from_block(const Eigen::Matrix2cd& k, int dim) {
  ComplexMatrix mu = ComplexMatrix::Zero(dim, dim);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      mu(2 + i, j) = k(i, j);
      mu(j, 2 + i) = std::conj(k(i, j));
    }
  return mu;
}

ComplexMatrix noise_block(TargetKind target, int dim) {
  ComplexMatrix n = ComplexMatrix::Zero(dim, dim);
  if (target == TargetKind::ground_state) {
    n(0, 1) = 1.0;
    n(1, 0) = 1.0;
  } else {
    n(0, 0) = -1.0;
    n(0, 1) = 1.0;
    n(1, 0) = 1.0;
    n(1, 1) = 1.0;
  }
  return n;
}

ComplexMatrix ket_bra(int i, int j, int dim) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

struct Grid {
  double dt;
  std::size_t n_pulse;
  std::size_t n_free;
};

Grid make_grid(const GovernorConfig& config) {
  if (config.tau_trans <= 0.0 || config.tau_free <= config.tau_trans)
    throw std::invalid_argument("GovernorConfig: need 0 < tau_trans < tau_free");
  if (config.tau_free < 10.0 * config.tau_trans)
    // tau_trans << tau_free is assumed throughout; smaller ratios distort
    // the cycle accounting.
    throw std::invalid_argument("GovernorConfig: tau_free must be >= 10 tau_trans");
  Grid g;
  if (config.field) {
    g.n_pulse = config.field->samples.size();
    if (g.n_pulse == 0)
      throw std::invalid_argument("GovernorConfig: empty control field");
    g.dt = config.field->dt;
    if (std::abs(config.field->duration() - config.tau_trans) >
        1e-6 * config.tau_trans)
      throw std::invalid_argument(
          "GovernorConfig: field duration does not match tau_trans");
  } else {
    g.n_pulse = static_cast<std::size_t>(
        std::llround(config.tau_trans / config.dt));
    g.dt = config.tau_trans / static_cast<double>(g.n_pulse);
  }
  g.n_free = static_cast<std::size_t>(
      std::llround((config.tau_free - config.tau_trans) / g.dt));
  if (g.n_free == 0)
    throw std::invalid_argument("GovernorConfig: free segment too short");
  return g;
}

}  // namespace

ComplexMatrix build_dipole(DipolePreset preset, const GovernorScenario& scenario,
                           int dim) {
  if (preset == DipolePreset::auto_pick) {
    if (scenario.target == TargetKind::ground_state)
      preset = DipolePreset::ground_selective;
    else if (scenario.kind == ScenarioKind::scrambled_gate)
      preset = DipolePreset::general_hadamard;
    else if (scenario.kind == ScenarioKind::nondegenerate_upper)
      preset = DipolePreset::general_generic;
    else
      preset = DipolePreset::general_plus;
  }

  Eigen::Matrix2cd k;
  const BytePair p = byte_amplitudes(scenario.b_n);
  // <-| row of the rotated byte frame
  const Eigen::RowVector2cd bra_minus(p.b, -p.a);
  switch (preset) {
    case DipolePreset::ground_selective:
      // |1>_g carries no dipole; the swap channel |2>_g <-> |1>_e is
      // strong and |2>_g <-> |2>_e provides a Stark handle.
      k << 0.0, 1.0, 0.0, 0.5;
      break;
    case DipolePreset::general_plus: {
      const Eigen::Vector2cd plus(p.a, p.b);
      k = plus * bra_minus;
      break;
    }
    case DipolePreset::general_hadamard: {
      const double s = 1.0 / std::sqrt(2.0);
      const Eigen::Vector2cd h_plus(s * (p.a + p.b), s * (p.a - p.b));
      k = h_plus * bra_minus;
      break;
    }
    case DipolePreset::general_generic:
      k << 1.0, 0.8, 0.6, 1.2;
      break;
    case DipolePreset::all_ones:
      k << 1.0, 1.0, 1.0, 1.0;
      break;
    case DipolePreset::auto_pick:
      break;  // resolved above
  }
  return dipole_from_block(k, dim);
}

ScenarioSetup build_scenario(const GovernorScenario& scenario,
                             const GovernorConfig& config) {
  const bool ground = scenario.target == TargetKind::ground_state;
  if (ground) {
    switch (scenario.kind) {
      case ScenarioKind::uncontrolled:
      case ScenarioKind::partial_no_decay:
      case ScenarioKind::full_equal_rates:
        break;
      default:
        throw std::invalid_argument(
            "build_scenario: scenario kind requires the general target byte");
    }
  }
  const bool drain = scenario.kind == ScenarioKind::drain_channel;
  const int dim = drain ? 5 : 4;

  ScenarioSetup setup;
  setup.model.layout.has_sink = drain;

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  if (ground) {
    diag(1) = config.omega1;
    diag(2) = config.delta;
    diag(3) = config.delta + config.omega2;
  } else {
    diag(2) = config.delta;
    diag(3) = config.delta +
              (scenario.kind == ScenarioKind::nondegenerate_upper
                   ? config.omega2
                   : 0.0);
  }
  setup.model.h0 = diag.cast<Complex>().asDiagonal();
  setup.model.noise_coupling = noise_block(scenario.target, dim);
  setup.model.mu_control = build_dipole(config.dipole, scenario, dim);

  const double g11 = config.gamma11;
  const double g22 =
      scenario.kind == ScenarioKind::different_rates
          ? config.gamma11 / (10.0 * std::numbers::pi)
          : (config.gamma22 > 0.0 ? config.gamma22 : config.gamma11);
  switch (scenario.kind) {
    case ScenarioKind::uncontrolled:
    case ScenarioKind::partial_no_decay:
      break;
    case ScenarioKind::full_equal_rates:
    case ScenarioKind::different_rates:
    case ScenarioKind::nondegenerate_upper:
    case ScenarioKind::scrambled_gate:
      setup.model.channels.push_back({ket_bra(0, 2, dim), g11});
      setup.model.channels.push_back({ket_bra(1, 3, dim), g22});
      break;
    case ScenarioKind::exchanged_channels:
      setup.model.channels.push_back({ket_bra(1, 2, dim), g11});
      setup.model.channels.push_back({ket_bra(0, 3, dim), g22});
      break;
    case ScenarioKind::drain_channel:
      setup.model.channels.push_back({ket_bra(4, 2, dim), g11});
      setup.model.channels.push_back({ket_bra(4, 3, dim), g22});
      break;
  }
  validate_model(setup.model);

  if (scenario.kind != ScenarioKind::uncontrolled) {
    if (ground) {
      GateTarget gate = build_swap();
      setup.gate = std::move(gate);
    } else {
      const BytePair p = byte_amplitudes(scenario.b_n);
      setup.gate = scenario.kind == ScenarioKind::scrambled_gate
                       ? build_scrambled_distiller(p.a, p.b)
                       : build_general_distiller(p.a, p.b);
    }
  }

  ComplexMatrix rho0 = ComplexMatrix::Zero(dim, dim);
  if (ground) {
    rho0(0, 0) = 1.0;
  } else {
    const BytePair p = byte_amplitudes(scenario.b_n);
    Eigen::Vector2cd plus(p.a, p.b);
    rho0.topLeftCorner(2, 2) = plus * plus.adjoint();
  }
  setup.rho0 = rho0;
  return setup;
}

double deviation_R(const ComplexMatrix& rho0, const ComplexMatrix& rho) {
  return 1.0 - hs_inner(rho0, rho).real();
}

double deviation_Rn(const ComplexMatrix& rho0, const ComplexMatrix& rho) {
  const double norm = hs_norm(rho);
  if (norm <= 0.0)
    throw std::invalid_argument("deviation_Rn: zero-norm state");
  return 1.0 - hs_inner(rho0, rho).real() / norm;
}

ComplexMatrix run_cycle(const ComplexMatrix& rho, const SystemModel& model,
                        const ControlField* gate_field, NoiseStream& noise,
                        const GovernorConfig& config) {
  GovernorConfig c = config;
  if (gate_field) c.field = *gate_field;
  const Grid grid = make_grid(c);
  ComplexMatrix state = rho;
  for (std::size_t k = 0; k < grid.n_pulse; ++k) {
    const double eps = gate_field ? gate_field->samples[k] : 0.0;
    state = step(state, model, eps, noise.next(), grid.dt);
  }
  for (std::size_t k = 0; k < grid.n_free; ++k)
    state = step(state, model, 0.0, noise.next(), grid.dt);
  return state;
}

ProtocolRunner::ProtocolRunner(const GovernorScenario& scenario,
                               const GovernorConfig& config)
    : scenario_(scenario),
      config_(config),
      setup_(build_scenario(scenario, config)),
      basis_(setup_.model.dim()) {
  const bool controlled = scenario.kind != ScenarioKind::uncontrolled;
  if (controlled && !config.field)
    throw std::invalid_argument("ProtocolRunner: scenario requires a control field");
  if (!controlled) config_.field.reset();

  const Grid grid = make_grid(config_);
  dt_ = grid.dt;
  n_pulse_ = grid.n_pulse;
  n_free_ = grid.n_free;
  if (config_.cycles < 1)
    throw std::invalid_argument("ProtocolRunner: cycles must be >= 1");

  rho0_metric_ = setup_.rho0.topLeftCorner(4, 4);

  const double f_max = 0.5 * config_.noise_amplitude;
  const Eigen::MatrixXd drift = bloch_generator(basis_, setup_.model, 0.0, 0.0);
  const Eigen::MatrixXd noise_dir =
      bloch_generator(basis_, setup_.model, 0.0, 1.0) - drift;
  Eigen::MatrixXd control_dir;
  if (controlled)
    control_dir = bloch_generator(basis_, setup_.model, 1.0, 0.0) - drift;

  // Coordinates reachable from the initial state; everything else stays
  // exactly zero (e.g. sink coherences in the drain scenario, the whole
  // excited block in uncontrolled runs).
  const int dim = basis_.space_dim();
  const Eigen::VectorXd v0 = basis_.to_bloch(setup_.rho0);
  std::vector<bool> reach(dim, false);
  std::vector<int> queue;
  for (int i = 0; i < dim; ++i)
    if (v0(i) != 0.0) {
      reach[i] = true;
      queue.push_back(i);
    }
  // Physical couplings are >= 1e-6 a.u.; the threshold only drops the
  // trace-scrub roundoff relocated into the last diagonal row.
  constexpr double kCouplingTol = 1e-14;
  const auto feeds = [&](int from, int to) {
    if (std::abs(drift(to, from)) > kCouplingTol ||
        std::abs(noise_dir(to, from)) > kCouplingTol)
      return true;
    return controlled && std::abs(control_dir(to, from)) > kCouplingTol;
  };
  while (!queue.empty()) {
    const int j = queue.back();
    queue.pop_back();
    for (int i = 0; i < dim; ++i)
      if (!reach[i] && feeds(j, i)) {
        reach[i] = true;
        queue.push_back(i);
      }
  }
  for (int i = 0; i < dim; ++i)
    if (reach[i]) active_.push_back(i);
  const int na = static_cast<int>(active_.size());

  const auto restrict_to_active = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(na, na);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < na; ++j) out(i, j) = m(active_[i], active_[j]);
    return out;
  };
  const Eigen::MatrixXd drift_a = restrict_to_active(drift);
  const Eigen::MatrixXd noise_a = restrict_to_active(noise_dir);
  v0_active_.resize(na);
  for (int i = 0; i < na; ++i) v0_active_(i) = v0(active_[i]);

  free_step_.emplace(drift_a, noise_a, dt_, f_max);
  if (controlled) {
    const Eigen::MatrixXd control_a = restrict_to_active(control_dir);
    pulse_steps_.reserve(n_pulse_);
    for (std::size_t k = 0; k < n_pulse_; ++k)
      pulse_steps_.emplace_back(
          drift_a + config_.field->samples[k] * control_a, noise_a, dt_, f_max);
  }
}

void ProtocolRunner::record(Eigen::VectorXd& v, double t, double weight,
                            DeviationSeries& out) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(basis_.space_dim());
  for (std::size_t i = 0; i < active_.size(); ++i) full(active_[i]) = v(i);
  ComplexMatrix rho = basis_.from_bloch(full);
  const double trace = rho.trace().real();
  if (std::abs(trace - 1.0) > 1e-9 || !rho.allFinite())
    throw std::runtime_error("ProtocolRunner: trace drifted beyond tolerance");
  if (min_eigenvalue(rho) < -1e-9)
    throw std::runtime_error("ProtocolRunner: state lost positivity");
  // Every scenario conserves the full-space trace exactly (the drain sink
  // is part of the state), so rescaling here only removes the cached
  // exponential's systematic per-step roundoff bias.
  v /= trace;
  rho /= trace;

  const ComplexMatrix sub = rho.topLeftCorner(4, 4);
  out.times_au.push_back(t);
  out.R.push_back(deviation_R(rho0_metric_, sub));
  out.Rn.push_back(deviation_Rn(rho0_metric_, sub));
  out.purity.push_back(hs_inner(sub, sub).real());
  out.hs_norm.push_back(hs_norm(sub));
  for (int i = 0; i < setup_.model.dim(); ++i)
    out.populations[i].push_back(rho(i, i).real());
  out.weights.push_back(weight);
}

DeviationSeries ProtocolRunner::run(std::uint64_t seed) const {
  NoiseProcess process;
  process.amplitude = config_.noise_amplitude;
  process.seed = seed;
  process.dt = dt_;
  NoiseStream stream(process);

  DeviationSeries out;
  out.dim = setup_.model.dim();
  out.populations.resize(out.dim);

  Eigen::VectorXd v = v0_active_;
  record(v, 0.0, 0.0, out);

  const int per_segment = std::max(1, config_.samples_per_segment);
  const std::size_t stride_pulse =
      std::max<std::size_t>(1, n_pulse_ / static_cast<std::size_t>(per_segment));
  const std::size_t stride_free =
      std::max<std::size_t>(1, n_free_ / static_cast<std::size_t>(per_segment));

  double t = 0.0;
  for (int cycle = 0; cycle < config_.cycles; ++cycle) {
    // Distill pulse (or the same grid field-free when uncontrolled).
    std::size_t pending = 0;
    for (std::size_t k = 0; k < n_pulse_; ++k) {
      const double f = stream.next();
      if (pulse_steps_.empty())
        free_step_->apply(v, f);
      else
        pulse_steps_[k].apply(v, f);
      t += dt_;
      if (++pending == stride_pulse || k + 1 == n_pulse_) {
        record(v, t, static_cast<double>(pending) * dt_, out);
        pending = 0;
      }
    }
    // Free evolution with selective decay.
    pending = 0;
    for (std::size_t k = 0; k < n_free_; ++k) {
      free_step_->apply(v, stream.next());
      t += dt_;
      if (++pending == stride_free || k + 1 == n_free_) {
        record(v, t, static_cast<double>(pending) * dt_, out);
        pending = 0;
      }
    }
  }
  return out;
}

DeviationSeries run_protocol(const GovernorScenario& scenario,
                             const GovernorConfig& config, std::uint64_t seed) {
  return ProtocolRunner(scenario, config).run(seed);
}

ScenarioSummary summarize(const DeviationSeries& series) {
  if (series.R.empty())
    throw std::invalid_argument("summarize: empty series");
  ScenarioSummary s;
  double wsum = 0.0;
  for (std::size_t i = 0; i < series.R.size(); ++i) {
    s.R_max = std::max(s.R_max, series.R[i]);
    s.Rn_max = std::max(s.Rn_max, series.Rn[i]);
    const double w = series.weights[i];
    s.mean_R += w * series.R[i];
    s.mean_Rn += w * series.Rn[i];
    wsum += w;
  }
  if (wsum > 0.0) {
    s.mean_R /= wsum;
    s.mean_Rn /= wsum;
  } else {
    s.mean_R = series.R.front();
    s.mean_Rn = series.Rn.front();
  }
  return s;
}

double calibrate_noise(const GovernorScenario& scenario,
                       const GovernorConfig& config,
                       double target_uncontrolled_Rmax, int n_seeds) {
  if (target_uncontrolled_Rmax <= 0.0)
    throw std::invalid_argument("calibrate_noise: target must be positive");
  GovernorScenario unc = scenario;
  unc.kind = ScenarioKind::uncontrolled;

  const auto eval = [&](double amplitude) {
    GovernorConfig c = config;
    c.noise_amplitude = amplitude;
    c.field.reset();
    ProtocolRunner runner(unc, c);
    double sum = 0.0;
    for (int s = 1; s <= n_seeds; ++s)
      sum += summarize(runner.run(static_cast<std::uint64_t>(s))).R_max;
    return sum / n_seeds;
  };

  const double target = target_uncontrolled_Rmax;
  const double t_total =
      config.tau_free * static_cast<double>(std::max(config.cycles, 1));
  // Diffusive seed guess: R ~ zeta t with zeta = N^2 dt / 12.
  double n_amp = std::sqrt(12.0 * target / (config.dt * t_total));

  // R scales as N^2, so a couple of rescale steps usually land inside the
  // 20% window.
  double r = eval(n_amp);
  for (int iter = 0; iter < 5; ++iter) {
    if (std::abs(r - target) <= 0.2 * target) return n_amp;
    if (r <= 0.0) break;
    double factor = std::sqrt(target / r);
    factor = std::clamp(factor, 0.2, 5.0);
    n_amp *= factor;
    r = eval(n_amp);
  }
  if (std::abs(r - target) <= 0.2 * target) return n_amp;

  // Safeguarded bisection on the monotone map N -> R_max.
  double lo = n_amp, hi = n_amp;
  double r_lo = r, r_hi = r;
  for (int iter = 0; iter < 40 && r_lo > target; ++iter) {
    lo *= 0.5;
    r_lo = eval(lo);
  }
  for (int iter = 0; iter < 40 && r_hi < target; ++iter) {
    hi *= 2.0;
    r_hi = eval(hi);
  }
  if (r_lo > target || r_hi < target)
    throw std::runtime_error("calibrate_noise: could not bracket the target");
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const double r_mid = eval(mid);
    if (std::abs(r_mid - target) <= 0.2 * target) return mid;
    if (r_mid < target)
      lo = mid;
    else
      hi = mid;
  }
  throw std::runtime_error("calibrate_noise: bisection did not converge");
}

}  // namespace qgov
