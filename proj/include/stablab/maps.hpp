#pragma once

#include <Eigen/Core>

#include <array>

#include "stablab/algebra.hpp"
#include "stablab/dense.hpp"

namespace stablab {

/// Bounded linear operator between algebras, stored as a dense matrix of
/// shape dim(codomain) × dim(domain) acting on coordinate columns.
struct LinearOp {
  Eigen::MatrixXd matrix;
  AlgebraPtr domain;
  AlgebraPtr codomain;
};

/// Bilinear map, tensor shape {dim(out), d1, d2}:
/// Φ(x,y)_o = Σ_{ij} tensor(o,i,j) x_i y_j.
struct BilinearMap {
  DenseTensor tensor;
  AlgebraPtr domain1;
  AlgebraPtr domain2;
  AlgebraPtr codomain;
};

/// Trilinear map, tensor shape {dim(out), d1, d2, d3}.
struct TrilinearMap {
  DenseTensor tensor;
  AlgebraPtr domain1;
  AlgebraPtr domain2;
  AlgebraPtr domain3;
  AlgebraPtr codomain;
};

/// 4-linear map; appears only as the top coboundary degree.
struct QuadlinearMap {
  DenseTensor tensor;
  std::array<AlgebraPtr, 4> domains;
  AlgebraPtr codomain;
};

Element apply_linear(const LinearOp& T, const Element& x);
Element apply_bilinear(const BilinearMap& phi, const Element& x,
                       const Element& y);
Element apply_trilinear(const TrilinearMap& xi, const Element& x,
                        const Element& y, const Element& z);
Element apply_quadlinear(const QuadlinearMap& q, const Element& x,
                         const Element& y, const Element& z, const Element& w);

/// The algebra's own product as a BilinearMap (tensor(o,i,j) = c[i,j,o]).
BilinearMap multiplication_map(const AlgebraPtr& algebra);

LinearOp identity_op(const AlgebraPtr& algebra);
LinearOp zero_op(const AlgebraPtr& domain, const AlgebraPtr& codomain);
BilinearMap zero_bilinear(const AlgebraPtr& domain,
                          const AlgebraPtr& codomain);

/// True when T maps the unit of its domain to the unit of its codomain
/// within tol.
bool is_unital(const LinearOp& T, double tol = 1e-12);

LinearOp add(const LinearOp& a, const LinearOp& b);
LinearOp subtract(const LinearOp& a, const LinearOp& b);
LinearOp scale(double c, const LinearOp& a);
BilinearMap add(const BilinearMap& a, const BilinearMap& b);
BilinearMap subtract(const BilinearMap& a, const BilinearMap& b);
BilinearMap scale(double c, const BilinearMap& a);

}  // namespace stablab
