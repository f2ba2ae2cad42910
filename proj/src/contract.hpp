#pragma once

#include <Eigen/Core>

#include "stablab/dense.hpp"

// Contraction kernels shared by the map-apply functions and the norm
// engine.  All loops have a fixed evaluation order so results are
// bit-stable across runs and thread counts.

namespace stablab::internal {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Workspace {
  Eigen::VectorXd a, b;
};

/// y_o = Σ tensor(o, i1..ik) Π_t xs[t](i_t); tensor shape {out, d1, ..., dk}.
inline void contract_all(const DenseTensor& t,
                         const Eigen::VectorXd* const* xs, int k,
                         Eigen::VectorXd& y, Workspace& ws) {
  Eigen::Index n = static_cast<Eigen::Index>(t.size());
  const double* src = t.data();
  bool use_a = true;
  for (int a = k; a >= 1; --a) {
    const Eigen::VectorXd& x = *xs[a - 1];
    const Eigen::Index da = x.size();
    const Eigen::Index rows = n / da;
    Eigen::VectorXd& dst = use_a ? ws.a : ws.b;
    dst.resize(rows);
    Eigen::Map<const RowMat> m(src, rows, da);
    dst.noalias() = m * x;
    src = dst.data();
    n = rows;
    use_a = !use_a;
  }
  y = Eigen::Map<const Eigen::VectorXd>(src, n);
}

/// M(o, i) = contraction of all arguments except `slot`, which stays free.
inline void contract_slice(const DenseTensor& t,
                           const Eigen::VectorXd* const* xs, int k, int slot,
                           RowMat& M, Workspace& ws) {
  const int out = t.shape(0);
  Eigen::Index n = static_cast<Eigen::Index>(t.size());
  const double* src = t.data();
  bool use_a = true;
  for (int a = k; a >= slot + 2; --a) {
    const Eigen::VectorXd& x = *xs[a - 1];
    const Eigen::Index da = x.size();
    const Eigen::Index rows = n / da;
    Eigen::VectorXd& dst = use_a ? ws.a : ws.b;
    dst.resize(rows);
    Eigen::Map<const RowMat> m(src, rows, da);
    dst.noalias() = m * x;
    src = dst.data();
    n = rows;
    use_a = !use_a;
  }
  for (int a = 1; a <= slot; ++a) {
    const Eigen::VectorXd& x = *xs[a - 1];
    const Eigen::Index da = x.size();
    const Eigen::Index rest = n / (out * da);
    Eigen::VectorXd& dst = use_a ? ws.a : ws.b;
    dst.resize(out * rest);
    for (int o = 0; o < out; ++o) {
      Eigen::Map<const RowMat> m(src + static_cast<std::size_t>(o) * da * rest,
                                 da, rest);
      dst.segment(o * rest, rest).noalias() = m.transpose() * x;
    }
    src = dst.data();
    n = out * rest;
    use_a = !use_a;
  }
  M = Eigen::Map<const RowMat>(src, out, n / out);
}

}  // namespace stablab::internal
