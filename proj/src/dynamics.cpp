#include "qgov/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace qgov {

namespace {

double inf_norm(const ComplexMatrix& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double inf_norm(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Crude upper bound on the induced norm of the frozen generator.
double generator_norm_bound(const SystemModel& model, double eps_value,
                            double f_value) {
  const ComplexMatrix h = model.h0 + eps_value * model.mu_control +
                          f_value * model.noise_coupling;
  double bound = 2.0 * inf_norm(h);
  for (const auto& ch : model.channels) {
    const double ln = inf_norm(ch.op);
    bound += 3.0 * ch.rate * ln * ln;
  }
  return bound;
}

template <typename Generator>
ComplexMatrix exp_action(const Generator& gen, ComplexMatrix x, double dt,
                         double norm_bound) {
  const int substeps = std::max(1, static_cast<int>(std::ceil(norm_bound * dt)));
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) {
    ComplexMatrix acc = x;
    ComplexMatrix term = x;
    bool converged = false;
    for (int m = 1; m <= 60; ++m) {
      term = gen(term) * (h / m);
      acc += term;
      const double tn = term.cwiseAbs().maxCoeff();
      const double an = std::max(acc.cwiseAbs().maxCoeff(), 1e-300);
      if (tn <= 1e-16 * an) {
        converged = true;
        break;
      }
    }
    if (!converged || !acc.allFinite())
      throw std::runtime_error("step: generator exponential did not converge");
    x = std::move(acc);
  }
  return x;
}

ComplexMatrix symmetrize(const ComplexMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

ComplexMatrix hamiltonian_conjugation(const ComplexMatrix& h,
                                      const ComplexMatrix& x, double dt,
                                      bool forward) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("step: Hamiltonian eigendecomposition failed");
  ComplexVector phases(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    phases(i) = std::exp(Complex(0.0, (forward ? -1.0 : 1.0) *
                                          es.eigenvalues()(i) * dt));
  const ComplexMatrix u =
      es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return u * x * u.adjoint();
}

}  // namespace

SystemModel SystemModel::without_channels() const {
  SystemModel copy = *this;
  copy.channels.clear();
  return copy;
}

void validate_model(const SystemModel& model) {
  const int n = model.dim();
  if (model.h0.cols() != n || model.mu_control.rows() != n ||
      model.noise_coupling.rows() != n)
    throw std::invalid_argument("SystemModel: dimension mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && std::abs(model.h0(i, j)) > 0.0)
        throw std::invalid_argument("SystemModel: H0 must be diagonal");
  if (model.h0.diagonal().imag().cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("SystemModel: H0 must be real");
  if (!is_hermitian(model.mu_control) || !is_hermitian(model.noise_coupling))
    throw std::invalid_argument("SystemModel: couplings must be Hermitian");
  for (const auto& ch : model.channels) {
    if (ch.rate < 0.0 || !std::isfinite(ch.rate))
      throw std::invalid_argument("SystemModel: invalid channel rate");
    if (ch.op.rows() != n || ch.op.cols() != n)
      throw std::invalid_argument("SystemModel: channel dimension mismatch");
    if (ch.op.cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("SystemModel: zero jump operator");
  }
}

std::vector<double> sample_noise(const NoiseProcess& process,
                                 std::size_t n_steps) {
  NoiseStream stream(process);
  std::vector<double> out(n_steps);
  for (auto& f : out) f = stream.next();
  return out;
}

ComplexMatrix liouvillian_apply(const SystemModel& model, double eps_value,
                                double f_value, const ComplexMatrix& rho) {
  if (rho.rows() != model.dim() || rho.cols() != model.dim())
    throw std::invalid_argument("liouvillian_apply: dimension mismatch");
  const ComplexMatrix h = model.h0 + eps_value * model.mu_control +
                          f_value * model.noise_coupling;
  ComplexMatrix out = Complex(0.0, -1.0) * (h * rho - rho * h);
  for (const auto& ch : model.channels) {
    const ComplexMatrix ldl = ch.op.adjoint() * ch.op;
    out += ch.rate * (ch.op * rho * ch.op.adjoint() -
                      0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

ComplexMatrix adjoint_liouvillian_apply(const SystemModel& model,
                                        double eps_value, double f_value,
                                        const ComplexMatrix& g) {
  if (g.rows() != model.dim() || g.cols() != model.dim())
    throw std::invalid_argument("adjoint_liouvillian_apply: dimension mismatch");
  const ComplexMatrix h = model.h0 + eps_value * model.mu_control +
                          f_value * model.noise_coupling;
  ComplexMatrix out = Complex(0.0, 1.0) * (h * g - g * h);
  for (const auto& ch : model.channels) {
    const ComplexMatrix ldl = ch.op.adjoint() * ch.op;
    out += ch.rate * (ch.op.adjoint() * g * ch.op -
                      0.5 * (ldl * g + g * ldl));
  }
  return out;
}

ComplexMatrix step(const ComplexMatrix& rho, const SystemModel& model,
                   double eps_value, double f_value, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step: dt must be positive");
  if (model.channels.empty()) {
    const ComplexMatrix h = model.h0 + eps_value * model.mu_control +
                            f_value * model.noise_coupling;
    return symmetrize(hamiltonian_conjugation(h, rho, dt, true));
  }
  const auto gen = [&](const ComplexMatrix& x) {
    return liouvillian_apply(model, eps_value, f_value, x);
  };
  const double bound = generator_norm_bound(model, eps_value, f_value);
  return symmetrize(exp_action(gen, rho, dt, bound));
}

ComplexMatrix step_adjoint(const ComplexMatrix& g, const SystemModel& model,
                           double eps_value, double f_value, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_adjoint: dt must be positive");
  if (model.channels.empty()) {
    const ComplexMatrix h = model.h0 + eps_value * model.mu_control +
                            f_value * model.noise_coupling;
    return symmetrize(hamiltonian_conjugation(h, g, dt, false));
  }
  const auto gen = [&](const ComplexMatrix& x) {
    return adjoint_liouvillian_apply(model, eps_value, f_value, x);
  };
  const double bound = generator_norm_bound(model, eps_value, f_value);
  return symmetrize(exp_action(gen, g, dt, bound));
}

Trajectory propagate(const ComplexMatrix& rho0, const SystemModel& model,
                     const ControlField* field, const NoiseProcess* noise,
                     double T, double dt, int record_stride) {
  if (T <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("propagate: T and dt must be positive");
  const auto n = static_cast<std::size_t>(std::llround(T / dt));
  if (std::abs(static_cast<double>(n) * dt - T) > 1e-6 * T)
    throw std::invalid_argument("propagate: dt does not divide T");
  if (field) {
    if (std::abs(field->dt - dt) > 1e-12 * dt)
      throw std::invalid_argument("propagate: field grid mismatch");
    if (field->samples.size() < n)
      throw std::invalid_argument("propagate: field does not span T");
  }
  std::optional<NoiseStream> stream;
  if (noise) stream.emplace(*noise);

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);

  ComplexMatrix rho = rho0;
  for (std::size_t k = 0; k < n; ++k) {
    const double eps = field ? field->samples[k] : 0.0;
    const double f = stream ? stream->next() : 0.0;
    rho = step(rho, model, eps, f, dt);
    const bool last = (k + 1 == n);
    if (last || (record_stride > 0 &&
                 (k + 1) % static_cast<std::size_t>(record_stride) == 0)) {
      traj.times.push_back(static_cast<double>(k + 1) * dt);
      traj.states.push_back(rho);
    }
  }
  return traj;
}

Trajectory propagate_adjoint_backward(const ComplexMatrix& g_T,
                                      const SystemModel& model,
                                      const ControlField& field, double T) {
  const double dt = field.dt;
  const auto n = static_cast<std::size_t>(std::llround(T / dt));
  if (field.samples.size() != n)
    throw std::invalid_argument(
        "propagate_adjoint_backward: field must span [0, T] exactly");
  Trajectory traj;
  traj.times.resize(n + 1);
  traj.states.resize(n + 1);
  traj.states[n] = g_T;
  traj.times[n] = T;
  for (std::size_t k = n; k-- > 0;) {
    traj.states[k] =
        step_adjoint(traj.states[k + 1], model, field.samples[k], 0.0, dt);
    traj.times[k] = static_cast<double>(k) * dt;
  }
  return traj;
}

// ---------------------------------------------------------------------

HermitianBasis::HermitianBasis(int n) : n_(n) {
  if (n < 1) throw std::invalid_argument("HermitianBasis: dim must be >= 1");
}

Eigen::VectorXd HermitianBasis::to_bloch(const ComplexMatrix& h) const {
  const double s = std::sqrt(2.0);
  Eigen::VectorXd v(space_dim());
  for (int i = 0; i < n_; ++i) v(i) = h(i, i).real();
  int idx = n_;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) {
      v(idx++) = s * h(i, j).real();
      v(idx++) = s * h(i, j).imag();
    }
  return v;
}

ComplexMatrix HermitianBasis::from_bloch(const Eigen::VectorXd& v) const {
  const double s = 1.0 / std::sqrt(2.0);
  ComplexMatrix h(n_, n_);
  for (int i = 0; i < n_; ++i) h(i, i) = v(i);
  int idx = n_;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) {
      const Complex z(s * v(idx), s * v(idx + 1));
      idx += 2;
      h(i, j) = z;
      h(j, i) = std::conj(z);
    }
  return h;
}

Eigen::MatrixXd bloch_generator(const HermitianBasis& basis,
                                const SystemModel& model, double eps_value,
                                double f_value) {
  const int dim = basis.space_dim();
  const int n = basis.matrix_dim();
  Eigen::MatrixXd out(dim, dim);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
  for (int beta = 0; beta < dim; ++beta) {
    unit(beta) = 1.0;
    const ComplexMatrix b = basis.from_bloch(unit);
    unit(beta) = 0.0;
    out.col(beta) = basis.to_bloch(liouvillian_apply(model, eps_value, f_value, b));
    // The generator is traceless; scrub the roundoff so long cached-step
    // products do not accumulate a systematic trace drift.
    double trace_row = 0.0;
    for (int i = 0; i < n; ++i) trace_row += out(i, beta);
    out(n - 1, beta) -= trace_row;
  }
  return out;
}

std::vector<Eigen::MatrixXd> parametric_exp(const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& b,
                                            double dt, int degree) {
  const int n = static_cast<int>(a.rows());
  const int blocks = degree + 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(blocks * n, blocks * n);
  for (int k = 0; k < blocks; ++k) {
    m.block(k * n, k * n, n, n) = a * dt;
    if (k + 1 < blocks) m.block(k * n, (k + 1) * n, n, n) = b * dt;
  }
  const Eigen::MatrixXd em = m.exp();
  std::vector<Eigen::MatrixXd> coeff(blocks);
  for (int k = 0; k < blocks; ++k) coeff[k] = em.block(0, k * n, n, n);
  return coeff;
}

double parametric_exp_tail_bound(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b, double dt,
                                 int degree, double x_max) {
  const double y = x_max * inf_norm(b) * dt;
  double term = std::exp(inf_norm(a) * dt);
  for (int m = 1; m <= degree + 1; ++m) term *= y / m;
  return term * std::exp(y);
}

NoisySegmentPropagator::NoisySegmentPropagator(const HermitianBasis& basis,
                                               const SystemModel& model,
                                               double eps_value, double dt,
                                               double f_max)
    : NoisySegmentPropagator(
          bloch_generator(basis, model, eps_value, 0.0),
          bloch_generator(basis, model, eps_value, 1.0) -
              bloch_generator(basis, model, eps_value, 0.0),
          dt, f_max) {}

NoisySegmentPropagator::NoisySegmentPropagator(const Eigen::MatrixXd& a,
                                               const Eigen::MatrixXd& b,
                                               double dt, double f_max) {
  if (f_max == 0.0) {
    coeff_ = {parametric_exp(a, b, dt, 0)[0]};
    tmp_.resize(a.rows());
    return;
  }
  int degree = 2;
  while (degree < 10 &&
         parametric_exp_tail_bound(a, b, dt, degree, f_max) > 1e-13)
    ++degree;
  if (parametric_exp_tail_bound(a, b, dt, degree, f_max) > 1e-13)
    throw std::invalid_argument(
        "NoisySegmentPropagator: noise amplitude too large for the cached path");
  coeff_ = parametric_exp(a, b, dt, degree);
  tmp_.resize(a.rows());
}

}  // namespace qgov
