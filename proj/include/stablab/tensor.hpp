#pragma once

#include <Eigen/Core>

#include <vector>

#include "stablab/algebra.hpp"
#include "stablab/maps.hpp"

namespace stablab {

/// Element of A⊗A as an explicit finite sum Σ_j a_j ⊗ b_j.
struct TensorRep {
  std::vector<std::pair<Element, Element>> pairs;
};

/// Canonical coordinates of a tensor: m(i,j) = coefficient of e_i⊗e_j.
using CoeffMatrix = Eigen::MatrixXd;

/// Validated (approximate) diagonal: π_A(rep) ≈ 1 and e_i·rep ≈ rep·e_i in
/// coefficient coordinates.  M is the representation norm bound used as the
/// diagonal constant in every estimate downstream.
struct DiagonalRep {
  TensorRep rep;
  double M = 0.0;
  double residual_unit = 0.0;
  double residual_commute = 0.0;
};

CoeffMatrix to_coeffs(const TensorRep& t);

/// π_A: Σ a_j ⊗ b_j ↦ Σ a_j b_j.
Element pi(const Algebra& algebra, const TensorRep& t);

/// Lift of a bilinear map through ⊗: Σ Φ(a_j, b_j).
Element apply_lifted(const BilinearMap& phi, const TensorRep& t);

/// Module actions a·(x⊗y) = ax⊗y and (x⊗y)·a = x⊗ya, summand by summand.
TensorRep act_left(const Algebra& algebra, const Element& a,
                   const TensorRep& t);
TensorRep act_right(const Algebra& algebra, const TensorRep& t,
                    const Element& a);

/// Representation bound Σ_j ‖a_j‖‖b_j‖ — an upper bound on the projective
/// norm, always computable, used as M.
double rep_norm_bound(const Algebra& algebra, const TensorRep& t);

/// Exact projective norm on ℓ¹⊗̂ℓ¹ (≅ ℓ¹ of the product index set):
/// Σ_{ij} w_i w_j |m(i,j)|.
double exact_projective_norm_l1(const CoeffMatrix& coeffs,
                                const Eigen::VectorXd& weights_row,
                                const Eigen::VectorXd& weights_col);
/// Same, taking both weight vectors from an L1-normed algebra.
double exact_projective_norm_l1(const Algebra& algebra,
                                const CoeffMatrix& coeffs);

/// Exact diagonal (1/k)Σ_g e_g⊗e_{g⁻¹} of a group algebra; M = 1.
DiagonalRep group_diagonal(const Algebra& algebra);

/// Exact diagonal Σ_j e_{j1}⊗e_{1j} of matrix_algebra(n); M = n.
DiagonalRep matrix_diagonal(const Algebra& algebra);

/// Residuals of a candidate diagonal, never throwing on failure:
/// {‖π_A(t) − 1‖, max over basis e_i of the coefficient-level norm of
/// e_i·t − t·e_i} (exact projective norm for L1 algebras, canonical
/// row-decomposition bound otherwise).
std::pair<double, double> diagonal_residuals(const Algebra& algebra,
                                             const TensorRep& t);

/// Checks a candidate diagonal via diagonal_residuals; accepts iff both
/// residuals are ≤ tol, else throws DiagonalRejected.
DiagonalRep validate_diagonal(const Algebra& algebra, const TensorRep& t,
                              double tol);

}  // namespace stablab
