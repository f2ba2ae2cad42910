#pragma once

#include <cstdint>
#include <vector>

#include "stablab/maps.hpp"

namespace stablab {

// ---------------------------------------------------------------------------
// Multilinear norm computation
// ---------------------------------------------------------------------------

enum class NormMethod { ExtremePointEnumeration, AlternatingAscent };

enum class NormMode {
  Auto,      ///< exact when the vertex grid fits the budget, else estimate
  Exact,     ///< require enumeration; BudgetExceeded when impossible
  Estimate,  ///< force the ascent estimator
};

struct NormOptions {
  long long budget = 1'000'000;  ///< max product of vertex counts for exactness
  std::uint64_t seed = 0;
  NormMode mode = NormMode::Auto;
  int restarts = 32;
  int rounds = 200;
  int samples = 10'000;
};

/// Result of a norm computation.  When exact=false the value is a certified
/// lower bound: it is attained at the recorded witness arguments, each of
/// unit norm or less.
struct NormEstimate {
  double value = 0.0;
  bool exact = false;
  NormMethod method = NormMethod::ExtremePointEnumeration;
  int restarts = 0;  ///< ascent metadata (0 for enumeration)
  int rounds = 0;
  std::vector<Element> witness;  ///< one argument per slot, ‖·‖ ≤ 1
};

/// Core engine: norm of the multilinear map given by `tensor` (shape
/// {out, d1, ..., dk}) with explicit argument norms, measured in out_norm.
/// Exact when every argument ball has a vertex list and the grid fits the
/// budget; otherwise alternating-ascent estimation with a random floor.
NormEstimate multilinear_norm_raw(const DenseTensor& tensor,
                                  const std::vector<const NormSpec*>& arg_norms,
                                  const NormSpec& out_norm,
                                  const NormOptions& opts = {});

NormEstimate multilinear_norm(const LinearOp& T, const NormOptions& opts = {});
NormEstimate multilinear_norm(const BilinearMap& phi,
                              const NormOptions& opts = {});
NormEstimate multilinear_norm(const TrilinearMap& xi,
                              const NormOptions& opts = {});
NormEstimate multilinear_norm(const QuadlinearMap& q,
                              const NormOptions& opts = {});

// ---------------------------------------------------------------------------
// Defect functionals
// ---------------------------------------------------------------------------

/// T^∨(x,y) = T(xy) − Ψ(T(x),T(y)) as a dense bilinear map; measures how far
/// T is from intertwining the product of A with Ψ.
BilinearMap vee(const LinearOp& T, const BilinearMap& psi);

/// Multiplicative defect: ‖vee(T,Ψ)‖ over unit balls of A.
NormEstimate mdef(const LinearOp& T, const BilinearMap& psi,
                  const NormOptions& opts = {});

/// Associator (u,v,w) ↦ Ψ(u,Ψ(v,w)) − Ψ(Ψ(u,v),w) of a candidate product.
TrilinearMap associator_map(const BilinearMap& psi);

/// Associative defect: norm of the associator over unit balls of B.
NormEstimate adef(const BilinearMap& psi, const NormOptions& opts = {});

// ---------------------------------------------------------------------------
// Coboundaries and the derivative
// ---------------------------------------------------------------------------

// Hochschild-style coboundary ladder with the codomain's own product.  The
// degree is carried by the operand type (an element of B is a 0-cochain);
// the 4-linear overload always throws (UnsupportedDegree) and exists to
// state the memory cap.
LinearOp coboundary(const LinearOp& phi, const Element& b);
BilinearMap coboundary(const LinearOp& phi, const LinearOp& psi);
TrilinearMap coboundary(const LinearOp& phi, const BilinearMap& psi);
QuadlinearMap coboundary(const LinearOp& phi, const TrilinearMap& psi);
void coboundary(const LinearOp& phi, const QuadlinearMap& psi);

/// The twisted 2-coboundary used throughout:
/// δ²_T φ(x,y,z) = Ψ(T(x),φ(y,z)) − φ(xy,z) + φ(x,yz) − Ψ(φ(x,y),T(z)).
TrilinearMap delta2(const LinearOp& T, const BilinearMap& psi,
                    const BilinearMap& phi);

/// Derivative of T ↦ T^∨ at T in direction H:
/// [𝖣H](x,y) = H(xy) − Ψ(T(x),H(y)) − Ψ(H(x),T(y)).
BilinearMap derivative_apply(const LinearOp& T, const BilinearMap& psi,
                             const LinearOp& H);

}  // namespace stablab
