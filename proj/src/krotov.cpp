#include "qgov/krotov.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qgov {

namespace {

constexpr double kMonotoneSlack = 1e-12;
constexpr double kCachedStepTol = 1e-14;
constexpr int kMaxPolyDegree = 16;

// Shared per-gate state: Bloch generators, the cached parametric step
// matrices and the field-update bilinear form.
class SweepEngine {
 public:
  SweepEngine(const TargetSet& targets, const SystemModel& model,
              const KrotovSettings& settings)
      : settings_(settings),
        model_(settings.with_decay ? model : model.without_channels()),
        basis_(model.dim()),
        n_steps_(static_cast<std::size_t>(
            std::llround(settings.tau_trans / settings.dt))) {
    if (settings_.tau_trans <= 0.0 || settings_.dt <= 0.0)
      throw std::invalid_argument("KrotovSettings: tau_trans and dt must be positive");
    if (std::abs(static_cast<double>(n_steps_) * settings_.dt -
                 settings_.tau_trans) > 1e-9 * settings_.tau_trans)
      throw std::invalid_argument("KrotovSettings: dt must divide tau_trans");
    if (targets.targets.size() != targets.basis.ops.size())
      throw std::invalid_argument("TargetSet: target/basis count mismatch");

    drift_ = bloch_generator(basis_, model_, 0.0, 0.0);
    control_dir_ = bloch_generator(basis_, model_, 1.0, 0.0) - drift_;

    const int nj = static_cast<int>(targets.basis.ops.size());
    basis0_.resize(nj);
    target_.resize(nj);
    for (int j = 0; j < nj; ++j) {
      basis0_[j] = basis_.to_bloch(targets.basis.ops[j]);
      target_[j] = basis_.to_bloch(targets.targets[j]);
    }

    // Q(alpha, beta) = Tr{mu i[B_alpha, B_beta]}; the sequential update is
    // sum_j g_j^T Q b_j.
    const int dim = basis_.space_dim();
    update_form_.resize(dim, dim);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
    std::vector<ComplexMatrix> ops(dim);
    for (int k = 0; k < dim; ++k) {
      unit(k) = 1.0;
      ops[k] = basis_.from_bloch(unit);
      unit(k) = 0.0;
    }
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        const ComplexMatrix comm = ops[a] * ops[b] - ops[b] * ops[a];
        update_form_(a, b) =
            (Complex(0.0, 1.0) * (model_.mu_control.adjoint() * comm).trace())
                .real();
      }

    envelope_.resize(n_steps_);
    for (std::size_t k = 0; k < n_steps_; ++k)
      envelope_[k] = envelope(settings_, static_cast<double>(k) * settings_.dt);

    ensure_degree(1.5 * std::abs(settings_.guess_amplitude) + 1e-12);
  }

  std::size_t n_steps() const { return n_steps_; }

  // Backward pass under `field`; fills g_hist (n_steps+1 slots per target)
  // and returns the fidelity of the field.
  double backward(const ControlField& field,
                  std::vector<std::vector<Eigen::VectorXd>>& g_hist) {
    ensure_degree(max_abs(field));
    const std::size_t nj = target_.size();
    g_hist.assign(nj, std::vector<Eigen::VectorXd>(n_steps_ + 1));
    double f_total = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
      g_hist[j][n_steps_] = target_[j];
      for (std::size_t k = n_steps_; k-- > 0;)
        g_hist[j][k] = apply_poly_transposed(field.samples[k], g_hist[j][k + 1]);
      f_total += basis0_[j].dot(g_hist[j][0]);
    }
    return f_total;
  }

  // Forward pass with the sequential update; returns the candidate field.
  ControlField forward_update(const ControlField& field,
                              const std::vector<std::vector<Eigen::VectorXd>>& g_hist,
                              double lambda) {
    const std::size_t nj = basis0_.size();
    std::vector<Eigen::VectorXd> b(nj);
    for (std::size_t j = 0; j < nj; ++j) b[j] = basis0_[j];

    ControlField out = field;
    for (std::size_t k = 0; k < n_steps_; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < nj; ++j)
        s += g_hist[j][k].dot(update_form_ * b[j]);
      const double eps_new = field.samples[k] + lambda * envelope_[k] * s;
      if (!std::isfinite(eps_new))
        throw std::runtime_error("krotov: non-finite field update");
      out.samples[k] = eps_new;
      ensure_degree(std::abs(eps_new));
      for (std::size_t j = 0; j < nj; ++j)
        b[j] = apply_poly(eps_new, b[j]);
    }
    return out;
  }

 private:
  double max_abs(const ControlField& field) const {
    double m = 0.0;
    for (double v : field.samples) m = std::max(m, std::abs(v));
    return m;
  }

  // Cached step matrices are valid for |eps| <= validated_eps_; rebuild at
  // a higher degree when the field grows past it.
  void ensure_degree(double eps_needed) {
    if (eps_needed <= validated_eps_ && !forward_poly_.empty()) return;
    const double target = std::max(eps_needed * 1.5, 1e-12);
    int degree = forward_poly_.empty() ? 4 : static_cast<int>(forward_poly_.size());
    while (degree <= kMaxPolyDegree &&
           parametric_exp_tail_bound(drift_, control_dir_, settings_.dt, degree,
                                     target) > kCachedStepTol)
      ++degree;
    if (degree > kMaxPolyDegree)
      throw std::invalid_argument(
          "krotov: field amplitude too large for the cached step expansion");
    forward_poly_ = parametric_exp(drift_, control_dir_, settings_.dt, degree);
    backward_poly_.clear();
    backward_poly_.reserve(forward_poly_.size());
    for (const auto& m : forward_poly_) backward_poly_.push_back(m.transpose());
    validated_eps_ = target;
  }

  Eigen::VectorXd apply_poly(double eps, const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = forward_poly_[0] * v;
    double em = eps;
    for (std::size_t m = 1; m < forward_poly_.size(); ++m) {
      out.noalias() += em * (forward_poly_[m] * v);
      em *= eps;
    }
    return out;
  }

  Eigen::VectorXd apply_poly_transposed(double eps,
                                        const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = backward_poly_[0] * v;
    double em = eps;
    for (std::size_t m = 1; m < backward_poly_.size(); ++m) {
      out.noalias() += em * (backward_poly_[m] * v);
      em *= eps;
    }
    return out;
  }

  KrotovSettings settings_;
  SystemModel model_;
  HermitianBasis basis_;
  std::size_t n_steps_;
  Eigen::MatrixXd drift_;
  Eigen::MatrixXd control_dir_;
  Eigen::MatrixXd update_form_;
  std::vector<Eigen::VectorXd> basis0_;
  std::vector<Eigen::VectorXd> target_;
  std::vector<double> envelope_;
  std::vector<Eigen::MatrixXd> forward_poly_;
  std::vector<Eigen::MatrixXd> backward_poly_;
  double validated_eps_ = -1.0;
};

OptimizationRecord run_sweeps(const ControlField& start,
                              const TargetSet& targets,
                              const SystemModel& model,
                              const KrotovSettings& settings, int max_sweeps) {
  SweepEngine engine(targets, model, settings);

  OptimizationRecord rec;
  rec.field = start;

  std::vector<std::vector<Eigen::VectorXd>> g_hist;
  double f_cur = engine.backward(rec.field, g_hist);
  rec.F_history.push_back(f_cur);

  ControlField best_field = rec.field;
  double best_f = f_cur;
  double lambda = settings.lambda;
  bool retry_pending = false;

  const auto log_inf = [](double f) {
    return std::log10(std::max(1.0 - f / 4.0, 1e-16));
  };

  while (true) {
    if (log_inf(f_cur) <= settings.target_log_infidelity) {
      rec.converged = true;
      break;
    }
    if (rec.iterations_used >= max_sweeps) break;

    ControlField candidate = engine.forward_update(rec.field, g_hist, lambda);

    std::vector<std::vector<Eigen::VectorXd>> g_cand;
    const double f_cand = engine.backward(candidate, g_cand);

    if (f_cand < f_cur - kMonotoneSlack) {
      if (retry_pending) {
        rec.diagnostic = "monotonicity violated twice; lambda exhausted";
        break;
      }
      retry_pending = true;
      lambda *= 0.5;
      continue;  // redo the update from the same field
    }
    retry_pending = false;
    ++rec.iterations_used;  // accepted sweeps
    rec.field = std::move(candidate);
    g_hist = std::move(g_cand);
    f_cur = f_cand;
    rec.F_history.push_back(f_cur);
    if (f_cur > best_f) {
      best_f = f_cur;
      best_field = rec.field;
    }
  }

  if (!rec.converged && best_f > f_cur + kMonotoneSlack) {
    rec.field = best_field;
  }
  return rec;
}

}  // namespace

TargetSet make_targets(const OperatorBasis& basis, const GateTarget& gate) {
  TargetSet set;
  set.basis = basis;
  set.targets.reserve(basis.ops.size());
  for (const auto& g : basis.ops)
    set.targets.push_back(conjugate_by_gate(gate, g));
  return set;
}

double envelope(const KrotovSettings& settings, double t) {
  const double sigma =
      settings.sigma > 0.0 ? settings.sigma : settings.tau_trans / 6.0;
  const double x = t - 0.5 * settings.tau_trans;
  return std::max(std::exp(-0.5 * x * x / (sigma * sigma)),
                  settings.envelope_floor);
}

double fidelity(const TargetSet& targets, const ControlField& field,
                const SystemModel& model) {
  double f = 0.0;
  for (std::size_t j = 0; j < targets.targets.size(); ++j) {
    const Trajectory back = propagate_adjoint_backward(
        targets.targets[j], model, field, field.duration());
    f += hs_inner(targets.basis.ops[j], back.states.front()).real();
  }
  return f;
}

double log_infidelity(double F) {
  if (F > 4.0 + 1e-9)
    throw std::invalid_argument("log_infidelity: F exceeds the ceiling of 4");
  return std::log10(std::max(1.0 - F / 4.0, 1e-16));
}

ControlField initial_guess(const KrotovSettings& settings, double delta) {
  if (delta <= 0.0)
    throw std::invalid_argument("initial_guess: Delta must be positive");
  const auto n =
      static_cast<std::size_t>(std::llround(settings.tau_trans / settings.dt));
  ControlField field;
  field.dt = settings.dt;
  field.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * settings.dt;
    field.samples[k] =
        settings.guess_amplitude * std::cos(delta * t) * envelope(settings, t);
  }
  return field;
}

OptimizationRecord krotov_sweep(const OptimizationRecord& record,
                                const TargetSet& targets,
                                const SystemModel& model,
                                const KrotovSettings& settings) {
  KrotovSettings one = settings;
  one.target_log_infidelity = -std::numeric_limits<double>::infinity();
  OptimizationRecord out = run_sweeps(record.field, targets, model, one, 1);
  out.F_history.insert(out.F_history.begin(), record.F_history.begin(),
                       record.F_history.end());
  out.iterations_used += record.iterations_used;
  return out;
}

OptimizationRecord optimize(const GateTarget& gate, const SystemModel& model,
                            const KrotovSettings& settings) {
  validate_model(model);
  const OperatorBasis basis = make_basis(model.layout);
  const TargetSet targets = make_targets(basis, gate);
  const double delta =
      (model.h0(model.layout.e1, model.layout.e1) -
       model.h0(model.layout.g1, model.layout.g1))
          .real();
  const ControlField guess = initial_guess(settings, delta);
  return run_sweeps(guess, targets, model, settings, settings.max_iterations);
}

}  // namespace qgov
