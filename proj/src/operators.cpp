#include "qgov/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace qgov {

namespace {

void require_square(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square");
  if (!m.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

void require_normalized_pair(Complex a, Complex b) {
  const double n = std::norm(a) + std::norm(b);
  if (std::abs(n - 1.0) > 1e-12)
    throw std::invalid_argument("byte amplitudes (a,b) must satisfy |a|^2+|b|^2 = 1");
}

}  // namespace

DensityMatrix::DensityMatrix(ComplexMatrix rho) : rho_(std::move(rho)) {
  require_square(rho_, "DensityMatrix");
  if (!is_hermitian(rho_))
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(rho_.trace().real() - 1.0) > kTraceTol ||
      std::abs(rho_.trace().imag()) > kTraceTol)
    throw std::invalid_argument("DensityMatrix: trace != 1");
  if (min_eigenvalue(rho_) < -kPositivityTol)
    throw std::invalid_argument("DensityMatrix: negative eigenvalue");
}

Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hs_inner: dimension mismatch");
  return (a.adjoint() * b).trace();
}

double hs_norm(const ComplexMatrix& a) {
  require_square(a, "hs_norm");
  return a.norm();  // Frobenius norm = sqrt(Tr{A^dag A})
}

double purity(const ComplexMatrix& rho) {
  return hs_inner(rho, rho).real();
}

double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

GateTarget build_swap() {
  ComplexMatrix o = ComplexMatrix::Zero(4, 4);
  o(0, 0) = 1.0;
  o(1, 2) = 1.0;
  o(2, 1) = 1.0;
  o(3, 3) = 1.0;
  return GateTarget{std::move(o), GateLabel::swap};
}

ComplexMatrix build_rotation(Complex a, Complex b) {
  require_normalized_pair(a, b);
  // Special-unitary convention: columns (a, b) and (-b*, a*), so (a, b) =
  // (1, 0) is the identity. The printed form with a (b*, -a*) second
  // column is an improper (det -1) variant that breaks that limit; the
  // swapped-pair mappings are convention independent.
  ComplexMatrix u = ComplexMatrix::Zero(4, 4);
  for (int block = 0; block < 4; block += 2) {
    u(block, block) = a;
    u(block, block + 1) = -std::conj(b);
    u(block + 1, block) = b;
    u(block + 1, block + 1) = std::conj(a);
  }
  return u;
}

GateTarget build_general_distiller(Complex a, Complex b) {
  const ComplexMatrix u = build_rotation(a, b);
  const ComplexMatrix o = u * build_swap().matrix * u.adjoint();
  GateTarget g{o, GateLabel::general};
  g.a = a;
  g.b = b;
  return g;
}

GateTarget build_scrambled_distiller(Complex a, Complex b) {
  GateTarget base = build_general_distiller(a, b);
  ComplexMatrix h = ComplexMatrix::Identity(4, 4);
  const double s = 1.0 / std::sqrt(2.0);
  h(2, 2) = s;
  h(2, 3) = s;
  h(3, 2) = s;
  h(3, 3) = -s;
  GateTarget g{h * base.matrix, GateLabel::scrambled};
  g.a = a;
  g.b = b;
  return g;
}

OperatorBasis make_basis(const BasisLayout& layout) {
  const int dim = layout.dim();
  const int i0 = layout.g1;
  const int i1 = layout.g2;
  const double s = 1.0 / std::sqrt(2.0);

  OperatorBasis basis;
  basis.dim = dim;

  ComplexMatrix p0 = ComplexMatrix::Zero(dim, dim);
  p0(i0, i0) = 1.0;
  ComplexMatrix p1 = ComplexMatrix::Zero(dim, dim);
  p1(i1, i1) = 1.0;
  ComplexMatrix re = ComplexMatrix::Zero(dim, dim);
  re(i0, i1) = s;
  re(i1, i0) = s;
  ComplexMatrix im = ComplexMatrix::Zero(dim, dim);
  im(i0, i1) = Complex(0.0, s);
  im(i1, i0) = Complex(0.0, -s);

  basis.ops = {p0, p1, re, im};
  return basis;
}

ComplexMatrix conjugate_by_gate(const GateTarget& gate, const ComplexMatrix& g) {
  if (gate.matrix.rows() != g.rows())
    throw std::invalid_argument("conjugate_by_gate: dimension mismatch");
  return gate.matrix * g * gate.matrix.adjoint();
}

ComplexMatrix embed(const ComplexMatrix& block, int row0, int col0, int dim) {
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  out.block(row0, col0, block.rows(), block.cols()) = block;
  return out;
}

bool is_hermitian(const ComplexMatrix& m, double tol) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_unitary(const ComplexMatrix& m, double tol) {
  const ComplexMatrix d =
      m.adjoint() * m - ComplexMatrix::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const ComplexMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian,
                                                  Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace qgov
