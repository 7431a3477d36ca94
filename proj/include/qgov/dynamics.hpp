#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "qgov/operators.hpp"

// Liouvillian assembly, forward/adjoint propagation and the seeded noise
// drive. All times in atomic units, hbar = 1.
namespace qgov {

struct JumpChannel {
  ComplexMatrix op;  // L
  double rate;       // Gamma >= 0, 1/time
};

struct SystemModel {
  ComplexMatrix h0;              // diagonal, Hartree
  ComplexMatrix mu_control;      // Hermitian; scaled by the control field
  ComplexMatrix noise_coupling;  // Hermitian; scaled by the noise draw f(t)
  std::vector<JumpChannel> channels;
  BasisLayout layout;

  int dim() const { return static_cast<int>(h0.rows()); }
  SystemModel without_channels() const;
};

void validate_model(const SystemModel& model);

// White-noise drive: one draw per integration step, f_k = N * s_k with
// s_k uniform on [-0.5, 0.5). The stream is fully determined by the seed;
// draws come from the 53-bit mantissa of mt19937_64 so sequences are
// identical across platforms. Effective intensity zeta = N^2 dt / 12.
struct NoiseProcess {
  double amplitude = 0.0;  // N
  std::uint64_t seed = 0;
  double dt = 0.0;
};

class NoiseStream {
 public:
  explicit NoiseStream(const NoiseProcess& process)
      : gen_(process.seed), amplitude_(process.amplitude) {}

  double next() {
    const double u =
        static_cast<double>(gen_() >> 11) * 0x1.0p-53;  // [0, 1)
    return amplitude_ * (u - 0.5);
  }

 private:
  std::mt19937_64 gen_;
  double amplitude_;
};

std::vector<double> sample_noise(const NoiseProcess& process, std::size_t n_steps);

// Real pulse on a uniform grid; sample k applies on [k dt, (k+1) dt).
struct ControlField {
  std::vector<double> samples;
  double dt = 0.0;

  double duration() const { return static_cast<double>(samples.size()) * dt; }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ComplexMatrix> states;
};

// d rho/dt = -i[H0 + f*noise + eps*mu, rho] + sum_c Gamma_c (L rho L^dag
// - 1/2 {L^dag L, rho})
ComplexMatrix liouvillian_apply(const SystemModel& model, double eps_value,
                                double f_value, const ComplexMatrix& rho);

// Hilbert-Schmidt adjoint: +i[H, G] + sum_c Gamma_c (L^dag G L
// - 1/2 {L^dag L, G}). Satisfies (adjoint(A) . B) = (A . L(B)).
ComplexMatrix adjoint_liouvillian_apply(const SystemModel& model,
                                        double eps_value, double f_value,
                                        const ComplexMatrix& g);

// rho' = exp(L dt)[rho] for the generator frozen at (eps, f). Exact up to
// machine-precision Taylor truncation; the result is re-symmetrized.
ComplexMatrix step(const ComplexMatrix& rho, const SystemModel& model,
                   double eps_value, double f_value, double dt);

// G' = exp(L^adj dt)[G]; one backward-propagation step.
ComplexMatrix step_adjoint(const ComplexMatrix& g, const SystemModel& model,
                           double eps_value, double f_value, double dt);

// Steps rho over round(T/dt) uniform steps. Field samples, when present,
// must cover the grid; the noise stream advances exactly once per step.
Trajectory propagate(const ComplexMatrix& rho0, const SystemModel& model,
                     const ControlField* field, const NoiseProcess* noise,
                     double T, double dt, int record_stride);

// Integrates the adjoint equation from t = T down to 0 with the
// time-reversed field sample order. states[k] holds G(t_k); states.back()
// is the supplied terminal condition.
Trajectory propagate_adjoint_backward(const ComplexMatrix& g_T,
                                      const SystemModel& model,
                                      const ControlField& field, double T);

// ---------------------------------------------------------------------
// Coherence-vector (Hermitian operator basis) machinery. A Hermitian
// matrix maps to n^2 real coordinates; Lindblad generators become real
// n^2 x n^2 matrices, and Hermiticity is preserved structurally.

class HermitianBasis {
 public:
  explicit HermitianBasis(int n);

  int matrix_dim() const { return n_; }
  int space_dim() const { return n_ * n_; }

  Eigen::VectorXd to_bloch(const ComplexMatrix& h) const;
  ComplexMatrix from_bloch(const Eigen::VectorXd& v) const;

 private:
  int n_;
};

// Real matrix of the forward generator at frozen (eps, f); the adjoint
// generator is its transpose.
Eigen::MatrixXd bloch_generator(const HermitianBasis& basis,
                                const SystemModel& model, double eps_value,
                                double f_value);

// Coefficients T_0..T_degree with exp((A + x B) dt) = sum_m x^m T_m up to
// O(x^{degree+1}), computed from one exponential of the block-bidiagonal
// embedding of (A, B).
std::vector<Eigen::MatrixXd> parametric_exp(const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& b,
                                            double dt, int degree);

// Remainder bound for truncating the series above at `degree`, for
// parameter magnitude |x| <= x_max.
double parametric_exp_tail_bound(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b, double dt,
                                 int degree, double x_max);

// Propagates Bloch vectors through segments whose generator is
// A + f B with f the per-step noise draw. Exact exponential semantics as
// long as the truncation bound at the configured noise amplitude stays
// below tolerance; construction fails otherwise.
class NoisySegmentPropagator {
 public:
  NoisySegmentPropagator(const HermitianBasis& basis, const SystemModel& model,
                         double eps_value, double dt, double f_max);

  // Direct form: generator a + f b in some real representation.
  NoisySegmentPropagator(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double dt, double f_max);

  void apply(Eigen::VectorXd& v, double f) const {
    tmp_ = coeff_[0] * v;
    double fm = f;
    for (std::size_t m = 1; m < coeff_.size(); ++m) {
      tmp_.noalias() += fm * (coeff_[m] * v);
      fm *= f;
    }
    v.swap(tmp_);
  }

 private:
  std::vector<Eigen::MatrixXd> coeff_;
  mutable Eigen::VectorXd tmp_;
};

}  // namespace qgov
