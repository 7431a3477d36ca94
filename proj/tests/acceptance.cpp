// Acceptance suite: runs every numbered criterion at the published
// parameter set and prints one PASS/FAIL line per criterion. Slow
// artifacts (calibrated noise amplitudes, synthesized pulses) are cached
// under QGOV_WORK_DIR (default ./qgov_acceptance_work) so reruns are
// cheap; delete that directory to force a cold run.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "qgov/io.hpp"
#include "qgov/units.hpp"

using namespace qgov;

namespace {

struct Line {
  std::string label;
  bool pass;
  std::string detail;
};

std::vector<Line> results;

void report(const std::string& label, bool pass, const std::string& detail) {
  results.push_back({label, pass, detail});
  std::cout << (pass ? "PASS " : "FAIL ") << label << " -- " << detail
            << std::endl;
}

std::string workdir() {
  if (const char* env = std::getenv("QGOV_WORK_DIR")) return env;
  return "qgov_acceptance_work";
}

RunConfig base_config() {
  RunConfig c;
  c.delta_hartree = 0.06601;
  c.omega1_hartree = 7.2449716268e-4;
  c.omega2_hartree = 5.3746313155e-4;
  c.tau_trans_ps = 1.08;
  c.tau_free_ps = 241.0;
  c.gamma_inv_ps = 10.0;
  c.cycles = 20;
  c.dt_au = 5.0;
  c.lambda = 2.0e-4;
  c.guess_amplitude = 1.0e-4;
  c.max_iterations = 5000;
  c.target_log_infidelity = -4.0;
  return c;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

// --- cached artifacts ---------------------------------------------------

double cached_amplitude(const std::string& key,
                        double (*compute)(const RunConfig&),
                        const RunConfig& cfg) {
  const auto path = std::filesystem::path(workdir()) / ("amp_" + key + ".txt");
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    double amp = 0.0;
    if (in >> amp && amp > 0.0) return amp;
  }
  const double amp = compute(cfg);
  std::ofstream out(path);
  out.precision(17);
  out << amp << "\n";
  return amp;
}

ControlField cached_field(const std::string& key, const RunConfig& cfg,
                          const std::string& gate_label, DipolePreset preset,
                          double target_log_inf, int cap) {
  const auto path =
      (std::filesystem::path(workdir()) / ("field_" + key + ".csv")).string();
  if (std::filesystem::exists(path)) {
    const FieldFile file = read_field(path);
    if (std::abs(file.field.dt - cfg.pulse_dt_au()) <= 1e-9 * cfg.pulse_dt_au())
      return file.field;
  }
  GovernorScenario scenario = cfg.governor_scenario();
  scenario.kind = gate_label == "scrambled" ? ScenarioKind::scrambled_gate
                                            : ScenarioKind::full_equal_rates;
  scenario.target = gate_label == "swap" ? TargetKind::ground_state
                                         : TargetKind::general;
  GovernorConfig gc = cfg.governor_config();
  gc.dipole = preset;
  const ScenarioSetup setup = build_scenario(scenario, gc);
  KrotovSettings settings = cfg.krotov_settings();
  settings.target_log_infidelity = target_log_inf;
  settings.max_iterations = cap;
  const OptimizationRecord rec = optimize(*setup.gate, setup.model, settings);
  FieldFile file;
  file.field = rec.field;
  file.gate_label = gate_label;
  file.tau_trans_au = cfg.tau_trans_au();
  file.log_infidelity = log_infidelity(
      *std::max_element(rec.F_history.begin(), rec.F_history.end()));
  write_field(path, file);
  return rec.field;
}

ScenarioSummary run_summary(const ProtocolRunner& runner, std::uint64_t seed) {
  return summarize(runner.run(seed));
}

// --- independent reference integrator (criterion 7 oracle) ---------------

std::mt19937_64 oracle_rng(20240809);

double ounif(double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(oracle_rng);
}

ComplexMatrix random_hermitian(int n) {
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(ounif(-1, 1), ounif(-1, 1));
  return 0.5 * (m + m.adjoint()).eval();
}

ComplexMatrix random_density(int n) {
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(ounif(-1, 1), ounif(-1, 1));
  ComplexMatrix rho = a * a.adjoint();
  rho /= rho.trace();
  return rho;
}

SystemModel random_model(int n) {
  SystemModel m;
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) diag(i) = ounif(-1, 1);
  m.h0 = diag.cast<Complex>().asDiagonal();
  m.mu_control = random_hermitian(n);
  m.noise_coupling = random_hermitian(n);
  ComplexMatrix l(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) l(i, j) = Complex(ounif(-1, 1), ounif(-1, 1));
  m.channels.push_back({l, ounif(0.01, 0.5)});
  return m;
}

ComplexMatrix rk4_reference(const SystemModel& model, ComplexMatrix rho,
                            double eps, double dt, int substeps) {
  const double h = dt / substeps;
  const auto rhs = [&](const ComplexMatrix& x) {
    return liouvillian_apply(model, eps, 0.0, x);
  };
  for (int s = 0; s < substeps; ++s) {
    const ComplexMatrix k1 = rhs(rho);
    const ComplexMatrix k2 = rhs(rho + 0.5 * h * k1);
    const ComplexMatrix k3 = rhs(rho + 0.5 * h * k2);
    const ComplexMatrix k4 = rhs(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return rho;
}

// --- criteria ------------------------------------------------------------

int monotonicity_violations(const std::vector<double>& hist) {
  int v = 0;
  for (std::size_t i = 1; i < hist.size(); ++i)
    if (hist[i] < hist[i - 1] - 1e-12) ++v;
  return v;
}

OptimizationRecord optimize_benchmark(const RunConfig& cfg,
                                      const std::string& gate_label) {
  GovernorScenario scenario = cfg.governor_scenario();
  scenario.kind = ScenarioKind::full_equal_rates;
  scenario.target = gate_label == "swap" ? TargetKind::ground_state
                                         : TargetKind::general;
  const ScenarioSetup setup = build_scenario(scenario, cfg.governor_config());
  return optimize(*setup.gate, setup.model, cfg.krotov_settings());
}

int swap_benchmark_sweeps = 0;

void criterion_1(const RunConfig& cfg) {
  const OptimizationRecord rec = optimize_benchmark(cfg, "swap");
  swap_benchmark_sweeps = rec.iterations_used;
  const double achieved = log_infidelity(rec.F_history.back());
  const int violations = monotonicity_violations(rec.F_history);
  report("criterion 1 (swap gate synthesis)",
         rec.converged && rec.iterations_used <= 5000 && violations == 0,
         "log-infidelity " + fmt(achieved) + " in " +
             std::to_string(rec.iterations_used) +
             " sweeps (cap 5000), monotonicity violations " +
             std::to_string(violations));
}

void criterion_2(const RunConfig& cfg) {
  const OptimizationRecord rec = optimize_benchmark(cfg, "general");
  const double achieved = log_infidelity(rec.F_history.back());
  const bool comparable =
      rec.converged && rec.iterations_used <= 2 * swap_benchmark_sweeps;
  report("criterion 2 (general-byte gate synthesis)", comparable,
         "log-infidelity " + fmt(achieved) + " in " +
             std::to_string(rec.iterations_used) + " sweeps (swap took " +
             std::to_string(swap_benchmark_sweeps) + ")");
}

double calibrate_ground(const RunConfig& cfg) {
  GovernorScenario s = cfg.governor_scenario();
  s.target = TargetKind::ground_state;
  return calibrate_noise(s, cfg.governor_config(), 2e-4, 8);
}

double calibrate_general(const RunConfig& cfg) {
  GovernorScenario s = cfg.governor_scenario();
  s.target = TargetKind::general;
  return calibrate_noise(s, cfg.governor_config(), 5.9e-5, 8);
}

void criteria_3_4(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.target = "ground";
  cfg.noise_amplitude = cached_amplitude("ground", calibrate_ground, cfg);

  const ControlField field = cached_field("swap_deep", cfg, "swap",
                                          DipolePreset::auto_pick, -9.0, 5000);
  GovernorConfig gc = cfg.governor_config();
  GovernorScenario unc{ScenarioKind::uncontrolled, TargetKind::ground_state};
  GovernorScenario full{ScenarioKind::full_equal_rates,
                        TargetKind::ground_state};
  GovernorScenario part{ScenarioKind::partial_no_decay,
                        TargetKind::ground_state};

  const ProtocolRunner run_unc(unc, gc);
  gc.field = field;
  const ProtocolRunner run_full(full, gc);
  const ProtocolRunner run_part(part, gc);

  const std::uint64_t seed = cfg.seed;
  const ScenarioSummary s_unc = run_summary(run_unc, seed);
  const ScenarioSummary s_full = run_summary(run_full, seed);
  const ScenarioSummary s_part = run_summary(run_part, seed);

  const double mean_ratio = s_unc.mean_R / s_full.mean_R;
  const double max_ratio = s_unc.R_max / s_full.R_max;
  report("criterion 3 (ground-state noise suppression)",
         mean_ratio >= 20.0 && max_ratio >= 5.0,
         "seed " + std::to_string(seed) + ": <R> ratio " + fmt(mean_ratio) +
             " (need >= 20), R_max ratio " + fmt(max_ratio) +
             " (need >= 5); uncontrolled R_max " + fmt(s_unc.R_max));

  const double part_ratio = s_part.mean_R / s_unc.mean_R;
  report("criterion 4 (partial scheme does not suppress)", part_ratio >= 0.25,
         "<R>_partial / <R>_uncontrolled = " + fmt(part_ratio) +
             " (need >= 0.25)");

  // Spec invariant: paired-seed dominance of the full scheme.
  bool dominance = true;
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 8; ++s) {
    const double u = run_summary(run_unc, s).mean_R;
    const double f = run_summary(run_full, s).mean_R;
    worst = std::max(worst, f / u);
    if (f > u) dominance = false;
  }
  report("invariant (paired-seed dominance, seeds 1..8)", dominance,
         "worst <R>_full/<R>_uncontrolled = " + fmt(worst));
}

void table_criterion(int table, const char* label, const RunConfig& base) {
  RunConfig cfg = base;
  cfg.target = "general";
  // The published tables reflect long runs (their drain/full mean ratio is
  // ~N_cycles/2-scale); the table criteria leave the cycle count open and
  // 40 gives the orderings comfortable margins at desk-scale runtime.
  cfg.cycles = 40;
  cfg.noise_amplitude = cached_amplitude("general", calibrate_general, cfg);
  std::ostringstream log;
  const ReproduceResult r = reproduce_table(table, cfg, workdir(), log);
  bool ok = true;
  std::string detail;
  for (const auto& [name, pass] : r.checks) {
    ok = ok && pass;
    if (name != "all scenarios ran")
      detail += (detail.empty() ? "" : "; ") + name.substr(0, 2) +
                (pass ? " ok" : " FAIL");
  }
  report(label, ok, detail);
  std::cout << r.table_text;

  if (table == 2) {
    // Spec invariants for the drain mutation: the sink fills monotonically
    // while the normalized deviation stays near the working scheme's level.
    GovernorScenario drain{ScenarioKind::drain_channel, TargetKind::general};
    GovernorConfig gc = cfg.governor_config();
    gc.field = read_field((std::filesystem::path(workdir()) /
                           "field_general.csv")
                              .string())
                   .field;
    const DeviationSeries series = ProtocolRunner(drain, gc).run(1);
    bool monotone = true;
    const auto& sink = series.populations[4];
    for (std::size_t i = 1; i < sink.size(); ++i)
      if (sink[i] < sink[i - 1] - 1e-12) monotone = false;
    const double rn_ratio = summarize(series).mean_Rn / r.rows[1].mean_Rn;
    report("invariant (drain: monotone sink, Rn within 10x of full)",
           monotone && rn_ratio <= 10.0,
           "sink monotone: " + std::string(monotone ? "yes" : "no") +
               ", <Rn>_drain/<Rn>_full = " + fmt(rn_ratio));
  }
}

void criterion_7(const RunConfig& base) {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const SystemModel m = random_model(4);
    const ComplexMatrix rho = random_density(4);
    const double eps = ounif(-0.5, 0.5);
    const double dt = ounif(0.1, 0.8);
    const ComplexMatrix a = step(rho, m, eps, 0.0, dt);
    const ComplexMatrix b = rk4_reference(m, rho, eps, dt, 100);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  const bool oracle_ok = worst <= 1e-8;

  // Trace/Hermiticity/positivity along a full protocol run: the runner
  // enforces them at every recorded snapshot and throws otherwise.
  bool invariants_ok = true;
  std::string note = "held at every recorded snapshot";
  try {
    RunConfig cfg = base;
    cfg.target = "ground";
    cfg.noise_amplitude = cached_amplitude("ground", calibrate_ground, cfg);
    GovernorConfig gc = cfg.governor_config();
    gc.field = cached_field("swap_deep", cfg, "swap", DipolePreset::auto_pick,
                            -9.0, 5000);
    GovernorScenario full{ScenarioKind::full_equal_rates,
                          TargetKind::ground_state};
    ProtocolRunner(full, gc).run(3);
  } catch (const std::exception& e) {
    invariants_ok = false;
    note = e.what();
  }
  report("criterion 7 (propagator oracle + state invariants)",
         oracle_ok && invariants_ok,
         "max |stepper - RK4(dt/100)| = " + fmt(worst) +
             " (need <= 1e-8); invariants: " + note);
}

void criterion_8() {
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const SystemModel m = random_model(4);
    const ComplexMatrix a = random_hermitian(4);
    const ComplexMatrix b = random_hermitian(4);
    const double eps = ounif(-0.5, 0.5);
    const double f = ounif(-0.5, 0.5);
    const Complex lhs = hs_inner(adjoint_liouvillian_apply(m, eps, f, a), b);
    const Complex rhs = hs_inner(a, liouvillian_apply(m, eps, f, b));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  report("criterion 8 (adjoint duality)", worst <= 1e-10,
         "max |(L*A.B) - (A.LB)| = " + fmt(worst) + " (need <= 1e-10)");
}

bool check(bool ok, const char* what, std::string& fails) {
  if (!ok) fails += std::string(fails.empty() ? "" : ", ") + what;
  return ok;
}

void criterion_9() {
  std::string fails;

  // Metric identities.
  ComplexMatrix rho0 = ComplexMatrix::Zero(4, 4);
  rho0(0, 0) = 1.0;
  ComplexMatrix orth = ComplexMatrix::Zero(4, 4);
  orth(1, 1) = 1.0;
  check(deviation_R(rho0, rho0) == 0.0, "R(rho0)=0", fails);
  check(deviation_R(rho0, orth) == 1.0, "R(orth)=1", fails);
  check(std::abs(deviation_R(rho0, 0.5 * rho0 + 0.5 * orth) - 0.5) <= 1e-15,
        "R(mix)=1/2", fails);
  check(deviation_Rn(rho0, rho0) == 0.0, "Rn(rho0)=0", fails);
  check(deviation_Rn(rho0, orth) == 1.0, "Rn(orth)=1", fails);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.1, 9.0);
  const ComplexMatrix mixed = 0.7 * rho0 + 0.3 * orth;
  bool scale_ok = true;
  for (int t = 0; t < 50; ++t)
    scale_ok = scale_ok && std::abs(deviation_Rn(rho0, u(gen) * mixed) -
                                    deviation_Rn(rho0, mixed)) <= 1e-12;
  check(scale_ok, "Rn scale-invariance", fails);

  // Hilbert-Schmidt module trivials.
  const ComplexMatrix id2 = ComplexMatrix::Identity(2, 2);
  check(std::abs(hs_inner(id2, id2).real() - 2.0) <= 1e-15, "(I2.I2)=2", fails);
  ComplexMatrix sx = ComplexMatrix::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 1.0;
  ComplexMatrix sz = ComplexMatrix::Zero(2, 2);
  sz(0, 0) = 1.0;
  sz(1, 1) = -1.0;
  check(std::abs(hs_inner(sx, sz)) == 0.0, "(sx.sz)=0", fails);
  check(hs_norm(ComplexMatrix::Zero(3, 3)) == 0.0, "|0|=0", fails);
  check(std::abs(hs_norm(0.5 * id2) - 1.0 / std::sqrt(2.0)) <= 1e-15,
        "|I/2|=1/sqrt2", fails);
  ComplexMatrix diag = ComplexMatrix::Zero(2, 2);
  diag(0, 0) = 0.75;
  diag(1, 1) = 0.25;
  check(std::abs(purity(diag) - 0.625) <= 1e-15, "purity(diag)=0.625", fails);

  // Gate trivials.
  const GateTarget swap = build_swap();
  check((swap.matrix * swap.matrix - ComplexMatrix::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() <= 1e-15,
        "swap involution", fails);
  check((build_rotation(1.0, 0.0) - ComplexMatrix::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() == 0.0,
        "U(1,0)=I", fails);
  check((build_general_distiller(1.0, 0.0).matrix - swap.matrix)
            .cwiseAbs()
            .maxCoeff() == 0.0,
        "O^g(1,0)=swap", fails);

  // log-infidelity trivials.
  check(log_infidelity(4.0) == -16.0, "loginf(4)=-16", fails);
  check(log_infidelity(0.0) == 0.0, "loginf(0)=0", fails);
  check(std::abs(log_infidelity(3.6) + 1.0) <= 1e-12, "loginf(3.6)=-1", fails);

  // Noise draw trivials.
  NoiseProcess p;
  p.amplitude = 2.0;
  p.seed = 7;
  p.dt = 1.0;
  const auto draws = sample_noise(p, 4096);
  bool in_range = true;
  for (double f : draws) in_range = in_range && f >= -1.0 && f <= 1.0;
  check(in_range, "draw range", fails);
  check(draws == sample_noise(p, 4096), "draw determinism", fails);

  report("criterion 9 (metric identities and stated examples)", fails.empty(),
         fails.empty()
             ? "all identities hold (full example set in the unit suite)"
             : "failed: " + fails);
}

void criterion_10(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.target = "general";
  cfg.cycles = 3;  // determinism holds at any fixed config
  cfg.noise_amplitude = cached_amplitude("general", calibrate_general, cfg);

  const auto dir = std::filesystem::path(workdir());
  std::ostringstream devnull;
  const std::string a = (dir / "det_a.csv").string();
  const std::string b = (dir / "det_b.csv").string();
  int rc = cmd_run(cfg, "", "uncontrolled", 7, a, devnull);
  rc |= cmd_run(cfg, "", "uncontrolled", 7, b, devnull);

  const auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const bool series_same = rc == 0 && !slurp(a).empty() && slurp(a) == slurp(b);

  const std::string repdir = (dir / "det_rep").string();
  const ReproduceResult r1 = reproduce_table(3, cfg, repdir, devnull);
  const ReproduceResult r2 = reproduce_table(3, cfg, repdir, devnull);
  const bool table_same = r1.table_text == r2.table_text;

  report("criterion 10 (determinism)", series_same && table_same,
         std::string("series files byte-identical: ") +
             (series_same ? "yes" : "no") +
             ", reproduce tables identical: " + (table_same ? "yes" : "no"));
}

}  // namespace

int main() {
  std::filesystem::create_directories(workdir());
  const RunConfig base = base_config();

  try {
    criterion_1(base);
    criterion_2(base);
    criteria_3_4(base);
    table_criterion(2, "criterion 5 (Table 2 orderings, 8-seed medians)", base);
    table_criterion(3, "criterion 6 (Table 3 failure modes)", base);
    criterion_7(base);
    criterion_8();
    criterion_9();
    criterion_10(base);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance suite aborted -- " << e.what() << std::endl;
    return 2;
  }

  int failed = 0;
  for (const auto& line : results)
    if (!line.pass) ++failed;
  std::cout << "\n"
            << (results.size() - failed) << "/" << results.size()
            << " checks passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
