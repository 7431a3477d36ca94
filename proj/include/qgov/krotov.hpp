#pragma once

#include <string>
#include <vector>

#include "qgov/dynamics.hpp"

// Monotonic iterative synthesis of the control field generating a target
// gate on the lower-byte operator basis, with the targets propagated
// backward and the basis forward under the (possibly dissipative)
// dynamics, and a sequential time-local field update.
namespace qgov {

struct KrotovSettings {
  double lambda = 2.0e-4;        // strategy parameter; halved on violations
  double sigma = 0.0;            // Gaussian envelope width; 0 -> tau_trans/6
  double envelope_floor = 1e-6;  // keeps boundary samples updatable
  double guess_amplitude = 1.0e-4;
  int max_iterations = 5000;
  double target_log_infidelity = -4.0;
  double dt = 5.0;
  double tau_trans = 0.0;
  bool with_decay = false;  // keep jump channels active while optimizing
};

struct TargetSet {
  OperatorBasis basis;
  std::vector<ComplexMatrix> targets;
};

struct OptimizationRecord {
  ControlField field;
  std::vector<double> F_history;  // accepted evaluations, non-decreasing
  int iterations_used = 0;
  bool converged = false;
  std::string diagnostic;
};

// targets[j] = O G_j^0 O^dag
TargetSet make_targets(const OperatorBasis& basis, const GateTarget& gate);

// Gaussian envelope C(t), clamped from below so no sample freezes.
double envelope(const KrotovSettings& settings, double t);

// F = sum_j (G_j^0 . G_j(0)) with each target propagated backward from
// tau_trans to 0 under the field. Equals 4 at exact achievement.
double fidelity(const TargetSet& targets, const ControlField& field,
                const SystemModel& model);

// log10(1 - F/4), floored at -16.
double log_infidelity(double F);

// eps(t_k) = guess_amplitude * cos(Delta t_k) * C(t_k)
ControlField initial_guess(const KrotovSettings& settings, double delta);

// One iteration: backward-propagate targets under record.field, then
// forward-propagate the basis while updating the field sequentially.
// Applies the halve-lambda retry on a monotonicity violation.
OptimizationRecord krotov_sweep(const OptimizationRecord& record,
                                const TargetSet& targets,
                                const SystemModel& model,
                                const KrotovSettings& settings);

// Repeats sweeps until the log-infidelity target or the iteration cap is
// reached. Non-convergence is reported in the record, not thrown.
OptimizationRecord optimize(const GateTarget& gate, const SystemModel& model,
                            const KrotovSettings& settings);

}  // namespace qgov
