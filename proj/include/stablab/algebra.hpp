#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "stablab/dense.hpp"
#include "stablab/errors.hpp"
#include "stablab/rng.hpp"

namespace stablab {

/// Coordinate vector in an algebra's distinguished basis.
using Element = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Weighted ℓ¹: ‖x‖ = Σ w_i |x_i|, all weights strictly positive.
struct L1Weighted {
  Eigen::VectorXd weights;
};

/// ℓ∞ on d coordinates: ‖x‖ = max |x_i|.
struct LInf {
  int dim = 0;
};

/// Spectral (largest singular value) norm on n×n matrices stored row-major,
/// coords[i*n + j] = entry (i, j); the ambient dimension is n².
struct SpectralMatrix {
  int n = 0;
};

using NormSpec = std::variant<L1Weighted, LInf, SpectralMatrix>;

int norm_dim(const NormSpec& norm);
const char* norm_name(const NormSpec& norm);

double element_norm(const NormSpec& norm, const Element& coords);

/// Number of extreme points of the unit ball when it is a polytope with a
/// tractable vertex list: 2d for L1Weighted, 2^d for LInf with d ≤ 20.
/// Returns -1 when no list is available (SpectralMatrix, large LInf).
long long extreme_point_count(const NormSpec& norm);

/// Writes extreme point #index (in the fixed enumeration order used
/// throughout: L1 → +e_0/w_0, −e_0/w_0, +e_1/w_1, ...; LInf → sign vectors
/// with bit i of index clearing to +1) into `out`.
void extreme_point_into(const NormSpec& norm, long long index,
                        Eigen::VectorXd& out);

/// Materialized vertex list in enumeration order, or nullopt when the ball
/// is not a polytope with a usable list.
std::optional<std::vector<Eigen::VectorXd>> extreme_points(
    const NormSpec& norm);

/// Deterministic pseudo-random vector with ‖x‖ ≤ 1 and ‖x‖ = 1 up to a few
/// ulp from below.  Never exceeds the unit ball, so sampled values of a
/// multilinear map never exceed its true norm.
Element random_unit_vector(const NormSpec& norm, Rng& rng);

// ---------------------------------------------------------------------------
// Algebras
// ---------------------------------------------------------------------------

enum class AlgebraKind { Generic, Group, Matrix, Pointwise };

struct GroupTable {
  std::vector<std::vector<int>> cayley;  // cayley[g][h] = g∘h
  std::vector<int> inverses;
  int identity = 0;
};

/// Finite-dimensional associative unital normed algebra, immutable after
/// construction.  e_i·e_j = Σ_k structure(i,j,k) e_k.  Build through
/// make_algebra or the named constructors; all invariants (associativity,
/// unit laws, ‖1‖ = 1, submultiplicativity) are checked there.
struct Algebra {
  int dim = 0;
  DenseTensor structure;  // d×d×d
  Element unit;
  NormSpec norm;
  AlgebraKind kind = AlgebraKind::Generic;
  std::optional<GroupTable> group;  // set when kind == Group
  int matrix_n = 0;                 // set when kind == Matrix
};

using AlgebraPtr = std::shared_ptr<const Algebra>;

struct MakeOptions {
  /// Downgrades a submultiplicativity failure to a stderr warning.
  bool allow_unnormalized = false;
};

AlgebraPtr make_algebra(DenseTensor structure, Element unit, NormSpec norm,
                        const MakeOptions& opts = {});

/// ℓ¹(Z_k) under convolution: e_i·e_j = e_{(i+j) mod k}, unit weights.
AlgebraPtr cyclic_algebra(int k);

/// ℓ¹(G) for a finite group given by its Cayley table and inverse list.
AlgebraPtr group_algebra(const std::vector<std::vector<int>>& cayley,
                         const std::vector<int>& inverses);

/// M_n with matrix-unit basis e_{ij} ↦ coordinate i*n+j and spectral norm.
AlgebraPtr matrix_algebra(int n);

/// ℓ∞({1..d}) with pointwise product; unit = (1,...,1).
AlgebraPtr pointwise_algebra(int d);

Element multiply(const Algebra& algebra, const Element& x, const Element& y);

inline double element_norm(const Algebra& algebra, const Element& x) {
  return element_norm(algebra.norm, x);
}

}  // namespace stablab
