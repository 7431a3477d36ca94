#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qgov/governor.hpp"
#include "qgov/krotov.hpp"

// Flat key=value configuration, field/series persistence and the three
// CLI commands.
namespace qgov {

struct RunConfig {
  // Model parameters (Table-style physical inputs; Hartree and ps).
  double delta_hartree = 0.0;
  double omega1_hartree = 0.0;
  double omega2_hartree = 0.0;
  double tau_trans_ps = 0.0;
  double tau_free_ps = 0.0;
  double gamma_inv_ps = 0.0;

  // Protocol.
  std::string scenario = "full_equal_rates";
  std::string target = "ground";
  double b_n = 0.23113851357429;
  int cycles = 20;
  double dt_au = 5.0;
  std::uint64_t seed = 1;
  double noise_amplitude = 0.0;  // 0 -> calibrate where a command needs it
  int samples_per_segment = 64;
  std::string dipole_preset = "auto";

  // Gate synthesis.
  std::string gate = "auto";
  double lambda = 2.0e-4;
  double sigma_fraction = 1.0 / 6.0;
  double envelope_floor = 1e-6;
  double guess_amplitude = 1.0e-4;
  int max_iterations = 5000;
  double target_log_infidelity = -4.0;
  bool optimize_with_decay = false;

  // Derived, all in atomic units.
  double tau_trans_au() const;
  double tau_free_au() const;
  double gamma_au() const;
  double pulse_dt_au() const;  // refined so it divides tau_trans exactly
  GovernorScenario governor_scenario() const;
  GovernorConfig governor_config() const;
  KrotovSettings krotov_settings() const;
  std::string resolved_gate() const;  // swap | general | scrambled
};

// Parses '#'-commented key=value text. Unknown keys, malformed values and
// missing required keys are reported with line numbers.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

struct FieldFile {
  ControlField field;
  std::string gate_label;
  double tau_trans_au = 0.0;
  double log_infidelity = 0.0;
};

void write_field(const std::string& path, const FieldFile& file);
FieldFile read_field(const std::string& path);

void write_series(const std::string& path, const DeviationSeries& series);
std::string format_summary(const ScenarioSummary& summary);

// Commands; each returns a process exit status (0 ok, 1 usage/config,
// 2 numerical failure, 3 non-convergence).
int cmd_optimize(const RunConfig& config, const std::string& out_path,
                 std::ostream& log);
int cmd_run(const RunConfig& config, const std::string& field_path,
            const std::string& scenario_name, std::uint64_t seed,
            const std::string& out_path, std::ostream& log);
int cmd_reproduce(int table, const RunConfig& config,
                  const std::string& outdir, std::ostream& log);

// Reproduce core, reusable by the acceptance suite: runs the table's
// scenarios over seeds 1..8, returns per-scenario column medians in row
// order plus the pass/fail evaluation of the published orderings.
struct ReproduceResult {
  std::vector<ScenarioSummary> rows;        // medians per scenario
  std::vector<std::pair<std::string, bool>> checks;
  std::string table_text;
  double noise_amplitude = 0.0;
};
ReproduceResult reproduce_table(int table, const RunConfig& config,
                                const std::string& outdir, std::ostream& log);

int worker_thread_count();  // QGOV_THREADS, default 1

}  // namespace qgov
