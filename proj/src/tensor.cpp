#include "stablab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace stablab {

namespace {

CoeffMatrix coeffs_with_dim(const TensorRep& t, int rows, int cols) {
  CoeffMatrix m = CoeffMatrix::Zero(rows, cols);
  for (const auto& [a, b] : t.pairs) {
    if (a.size() != rows || b.size() != cols)
      throw Error(ErrorKind::DimensionMismatch,
                  "tensor summand has inconsistent dimensions");
    m.noalias() += a * b.transpose();
  }
  return m;
}

Element basis_vector(int dim, int i) {
  Element e = Element::Zero(dim);
  e(i) = 1.0;
  return e;
}

/// ‖D‖ via the canonical decomposition D = Σ_r e_r ⊗ (r-th row): an upper
/// bound on the projective norm for any algebra norm, and exact at D = 0.
double row_decomposition_bound(const Algebra& algebra, const CoeffMatrix& d) {
  double bound = 0.0;
  for (int r = 0; r < d.rows(); ++r) {
    const Element row = d.row(r).transpose();
    bound += element_norm(algebra, basis_vector(algebra.dim, r)) *
             element_norm(algebra, row);
  }
  return bound;
}

double coeff_diff_norm(const Algebra& algebra, const CoeffMatrix& d) {
  if (std::holds_alternative<L1Weighted>(algebra.norm))
    return exact_projective_norm_l1(algebra, d);
  return row_decomposition_bound(algebra, d);
}

}  // namespace

CoeffMatrix to_coeffs(const TensorRep& t) {
  if (t.pairs.empty()) return CoeffMatrix();
  const int rows = static_cast<int>(t.pairs.front().first.size());
  const int cols = static_cast<int>(t.pairs.front().second.size());
  return coeffs_with_dim(t, rows, cols);
}

Element pi(const Algebra& algebra, const TensorRep& t) {
  Element out = Element::Zero(algebra.dim);
  for (const auto& [a, b] : t.pairs) out += multiply(algebra, a, b);
  return out;
}

Element apply_lifted(const BilinearMap& phi, const TensorRep& t) {
  Element out = Element::Zero(phi.codomain->dim);
  for (const auto& [a, b] : t.pairs) out += apply_bilinear(phi, a, b);
  return out;
}

TensorRep act_left(const Algebra& algebra, const Element& a,
                   const TensorRep& t) {
  TensorRep out;
  out.pairs.reserve(t.pairs.size());
  for (const auto& [x, y] : t.pairs)
    out.pairs.emplace_back(multiply(algebra, a, x), y);
  return out;
}

TensorRep act_right(const Algebra& algebra, const TensorRep& t,
                    const Element& a) {
  TensorRep out;
  out.pairs.reserve(t.pairs.size());
  for (const auto& [x, y] : t.pairs)
    out.pairs.emplace_back(x, multiply(algebra, y, a));
  return out;
}

double rep_norm_bound(const Algebra& algebra, const TensorRep& t) {
  double bound = 0.0;
  for (const auto& [a, b] : t.pairs)
    bound += element_norm(algebra, a) * element_norm(algebra, b);
  return bound;
}

double exact_projective_norm_l1(const CoeffMatrix& coeffs,
                                const Eigen::VectorXd& weights_row,
                                const Eigen::VectorXd& weights_col) {
  if (coeffs.rows() != weights_row.size() ||
      coeffs.cols() != weights_col.size())
    throw Error(ErrorKind::DimensionMismatch,
                "projective norm: weights vs coefficient matrix");
  return weights_row.dot(coeffs.cwiseAbs() * weights_col);
}

double exact_projective_norm_l1(const Algebra& algebra,
                                const CoeffMatrix& coeffs) {
  const auto* l1 = std::get_if<L1Weighted>(&algebra.norm);
  if (!l1)
    throw Error(ErrorKind::WrongNormKind,
                "exact projective norm is available only for weighted-ℓ¹ "
                "algebras");
  return exact_projective_norm_l1(coeffs, l1->weights, l1->weights);
}

DiagonalRep group_diagonal(const Algebra& algebra) {
  if (algebra.kind != AlgebraKind::Group || !algebra.group)
    throw Error(ErrorKind::NotAGroupAlgebra,
                "group_diagonal needs an algebra built from a group table");
  const int k = algebra.dim;
  TensorRep rep;
  rep.pairs.reserve(k);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (int g = 0; g < k; ++g) {
    Element a = Element::Zero(k);
    a(g) = inv_k;
    rep.pairs.emplace_back(std::move(a),
                           basis_vector(k, algebra.group->inverses[g]));
  }
  const auto [ru, rc] = diagonal_residuals(algebra, rep);
  DiagonalRep d;
  d.rep = std::move(rep);
  d.M = 1.0;  // Σ_g (1/k)·‖e_g‖·‖e_{g⁻¹}‖ with unit weights
  d.residual_unit = ru;
  d.residual_commute = rc;
  return d;
}

DiagonalRep matrix_diagonal(const Algebra& algebra) {
  if (algebra.kind != AlgebraKind::Matrix)
    throw Error(ErrorKind::WrongAlgebra,
                "matrix_diagonal needs a full matrix algebra");
  const int n = algebra.matrix_n;
  const int dim = algebra.dim;
  TensorRep rep;
  rep.pairs.reserve(n);
  for (int j = 0; j < n; ++j)
    rep.pairs.emplace_back(basis_vector(dim, j * n),  // e_{j,0}
                           basis_vector(dim, j));     // e_{0,j}
  const auto [ru, rc] = diagonal_residuals(algebra, rep);
  DiagonalRep d;
  d.rep = std::move(rep);
  d.M = static_cast<double>(n);  // n summands of unit spectral norm each
  d.residual_unit = ru;
  d.residual_commute = rc;
  return d;
}

std::pair<double, double> diagonal_residuals(const Algebra& algebra,
                                             const TensorRep& t) {
  const int d = algebra.dim;
  const double r_unit = element_norm(algebra, pi(algebra, t) - algebra.unit);
  double r_commute = 0.0;
  for (int i = 0; i < d; ++i) {
    const Element ei = basis_vector(d, i);
    const CoeffMatrix diff =
        coeffs_with_dim(act_left(algebra, ei, t), d, d) -
        coeffs_with_dim(act_right(algebra, t, ei), d, d);
    r_commute = std::max(r_commute, coeff_diff_norm(algebra, diff));
  }
  return {r_unit, r_commute};
}

DiagonalRep validate_diagonal(const Algebra& algebra, const TensorRep& t,
                              double tol) {
  const auto [ru, rc] = diagonal_residuals(algebra, t);
  if (!(ru <= tol) || !(rc <= tol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "candidate diagonal rejected: unit residual " << ru
        << ", commutation residual " << rc << ", tolerance " << tol;
    throw Error(ErrorKind::DiagonalRejected, msg.str());
  }
  const double bound = rep_norm_bound(algebra, t);
  if (bound < 1.0 - 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "candidate diagonal rejected: representation bound " << bound
        << " is below 1, impossible for a unit-preserving tensor";
    throw Error(ErrorKind::DiagonalRejected, msg.str());
  }
  DiagonalRep d;
  d.rep = t;
  d.M = bound;
  d.residual_unit = ru;
  d.residual_commute = rc;
  return d;
}

}  // namespace stablab
