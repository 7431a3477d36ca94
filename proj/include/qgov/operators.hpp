#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

// Dense complex operator algebra on the four-level space: Hilbert-Schmidt
// geometry, density-matrix diagnostics, and the distillation gates and
// operator bases used by the control functional.
namespace qgov {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Tolerances for validity checks; sized for double precision accumulated
// over runs of up to ~1e6-1e8 steps.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPositivityTol = 1e-9;

// Fixed index map for the two-byte level scheme.
// {|1>_g -> 0, |2>_g -> 1, |1>_e -> 2, |2>_e -> 3}; optional sink index 4.
struct BasisLayout {
  int g1 = 0;
  int g2 = 1;
  int e1 = 2;
  int e2 = 3;
  bool has_sink = false;
  int sink = 4;

  int dim() const { return has_sink ? 5 : 4; }
};

// Hermitian unit-trace state. Construction validates; entries are
// immutable afterwards.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix rho);

  const ComplexMatrix& matrix() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

 private:
  ComplexMatrix rho_;
};

enum class GateLabel { swap, general, scrambled };

struct GateTarget {
  ComplexMatrix matrix;
  GateLabel label;
  // (a, b) of the rotated byte; meaningful for general/scrambled labels.
  Complex a{1.0, 0.0};
  Complex b{0.0, 0.0};
};

// Orthonormal Hermitian operators spanning the lower-byte operation
// subspace, each embedded in the full space.
struct OperatorBasis {
  std::vector<ComplexMatrix> ops;
  int dim = 4;  // embedding dimension
};

// (A . B) = Tr{A^dag B}
Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b);

// sqrt(Tr{A^dag A})
double hs_norm(const ComplexMatrix& a);

// Tr{rho^2}
double purity(const DensityMatrix& rho);
double purity(const ComplexMatrix& rho);

// The 4x4 permutation swapping |2>_g and |1>_e.
GateTarget build_swap();

// Block-diagonal byte rotation built from a normalized (a, b) pair;
// columns (a, b) and (b*, -a*) on each byte.
ComplexMatrix build_rotation(Complex a, Complex b);

// U O_d U^dag: the swap distiller conjugated into the (a, b) byte frame.
GateTarget build_general_distiller(Complex a, Complex b);

// (I_g (+) H_e) . O_d^g: general distiller followed by a Hadamard on the
// upper byte.
GateTarget build_scrambled_distiller(Complex a, Complex b);

// Four Hermitian orthonormal operators spanning the lower-byte subspace:
// {|0><0|, |1><1|, (|0><1|+|1><0|)/sqrt2, i(|0><1|-|1><0|)/sqrt2}.
OperatorBasis make_basis(const BasisLayout& layout);

// O G O^dag
ComplexMatrix conjugate_by_gate(const GateTarget& gate, const ComplexMatrix& g);

// Helpers shared across modules.
ComplexMatrix embed(const ComplexMatrix& block, int row0, int col0, int dim);
bool is_hermitian(const ComplexMatrix& m, double tol = kHermitianTol);
bool is_unitary(const ComplexMatrix& m, double tol = kHermitianTol);
double min_eigenvalue(const ComplexMatrix& hermitian);

}  // namespace qgov
