#include "stablab/maps.hpp"

#include <string>

#include "contract.hpp"

namespace stablab {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw Error(ErrorKind::DimensionMismatch, what);
}

Element contract(const DenseTensor& t,
                 std::initializer_list<const Element*> args) {
  internal::Workspace ws;
  Eigen::VectorXd y;
  internal::contract_all(t, args.begin(), static_cast<int>(args.size()), y,
                         ws);
  return y;
}

}  // namespace

Element apply_linear(const LinearOp& T, const Element& x) {
  require(x.size() == T.matrix.cols(), "apply_linear: argument length");
  return T.matrix * x;
}

Element apply_bilinear(const BilinearMap& phi, const Element& x,
                       const Element& y) {
  require(phi.tensor.rank() == 3, "apply_bilinear: tensor rank");
  require(x.size() == phi.tensor.shape(1) && y.size() == phi.tensor.shape(2),
          "apply_bilinear: argument lengths");
  return contract(phi.tensor, {&x, &y});
}

Element apply_trilinear(const TrilinearMap& xi, const Element& x,
                        const Element& y, const Element& z) {
  require(xi.tensor.rank() == 4, "apply_trilinear: tensor rank");
  require(x.size() == xi.tensor.shape(1) && y.size() == xi.tensor.shape(2) &&
              z.size() == xi.tensor.shape(3),
          "apply_trilinear: argument lengths");
  return contract(xi.tensor, {&x, &y, &z});
}

Element apply_quadlinear(const QuadlinearMap& q, const Element& x,
                         const Element& y, const Element& z,
                         const Element& w) {
  require(q.tensor.rank() == 5, "apply_quadlinear: tensor rank");
  require(x.size() == q.tensor.shape(1) && y.size() == q.tensor.shape(2) &&
              z.size() == q.tensor.shape(3) && w.size() == q.tensor.shape(4),
          "apply_quadlinear: argument lengths");
  return contract(q.tensor, {&x, &y, &z, &w});
}

BilinearMap multiplication_map(const AlgebraPtr& algebra) {
  const int d = algebra->dim;
  DenseTensor t({d, d, d});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int o = 0; o < d; ++o) t(o, i, j) = algebra->structure(i, j, o);
  return BilinearMap{std::move(t), algebra, algebra, algebra};
}

LinearOp identity_op(const AlgebraPtr& algebra) {
  return LinearOp{Eigen::MatrixXd::Identity(algebra->dim, algebra->dim),
                  algebra, algebra};
}

LinearOp zero_op(const AlgebraPtr& domain, const AlgebraPtr& codomain) {
  return LinearOp{Eigen::MatrixXd::Zero(codomain->dim, domain->dim), domain,
                  codomain};
}

BilinearMap zero_bilinear(const AlgebraPtr& domain,
                          const AlgebraPtr& codomain) {
  return BilinearMap{DenseTensor({codomain->dim, domain->dim, domain->dim}),
                     domain, domain, codomain};
}

bool is_unital(const LinearOp& T, double tol) {
  const Element image = apply_linear(T, T.domain->unit);
  return element_norm(T.codomain->norm, image - T.codomain->unit) <= tol;
}

LinearOp add(const LinearOp& a, const LinearOp& b) {
  require(a.matrix.rows() == b.matrix.rows() &&
              a.matrix.cols() == b.matrix.cols(),
          "add(LinearOp): shape mismatch");
  return LinearOp{a.matrix + b.matrix, a.domain, a.codomain};
}

LinearOp subtract(const LinearOp& a, const LinearOp& b) {
  require(a.matrix.rows() == b.matrix.rows() &&
              a.matrix.cols() == b.matrix.cols(),
          "subtract(LinearOp): shape mismatch");
  return LinearOp{a.matrix - b.matrix, a.domain, a.codomain};
}

LinearOp scale(double c, const LinearOp& a) {
  return LinearOp{c * a.matrix, a.domain, a.codomain};
}

BilinearMap add(const BilinearMap& a, const BilinearMap& b) {
  require(a.tensor.same_shape(b.tensor), "add(BilinearMap): shape mismatch");
  BilinearMap out = a;
  out.tensor += b.tensor;
  return out;
}

BilinearMap subtract(const BilinearMap& a, const BilinearMap& b) {
  require(a.tensor.same_shape(b.tensor),
          "subtract(BilinearMap): shape mismatch");
  BilinearMap out = a;
  out.tensor -= b.tensor;
  return out;
}

BilinearMap scale(double c, const BilinearMap& a) {
  BilinearMap out = a;
  out.tensor *= c;
  return out;
}

}  // namespace stablab
