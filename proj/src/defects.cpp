#include "stablab/defects.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "contract.hpp"
#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {

namespace {

using internal::RowMat;
using internal::Workspace;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

constexpr int kTrilinearCap = 12;  // dense d⁴/d⁵ tensors stay desk-sized

void require_dims(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::DimensionMismatch, what);
}

void check_trilinear_cap(int d, const char* where) {
  if (d > kTrilinearCap)
    throw Error(ErrorKind::DomainError,
                std::string(where) + ": workflows building tri/quadlinear " +
                    "tensors are capped at dimension " +
                    std::to_string(kTrilinearCap) + ", got " +
                    std::to_string(d));
}

// ---------------------------------------------------------------------------
// Norm engine
// ---------------------------------------------------------------------------

struct EngineView {
  const DenseTensor* tensor;
  const std::vector<const NormSpec*>* args;
  const NormSpec* out;
  int k() const { return static_cast<int>(args->size()); }
};

double evaluate(const EngineView& view, const Eigen::VectorXd* const* xs,
                Eigen::VectorXd& y, Workspace& ws) {
  internal::contract_all(*view.tensor, xs, view.k(), y, ws);
  return element_norm(*view.out, y);
}

struct BestTuple {
  double value = -1.0;
  long long index = -1;
};

/// Sequential scan of tuple indices [begin, end) over the signed vertex
/// grid; ties keep the smallest index, so chunked runs merge to the same
/// answer as a single pass.
void enumerate_range(const EngineView& view,
                     const std::vector<long long>& counts, long long begin,
                     long long end, BestTuple& best) {
  const int k = view.k();
  std::vector<Eigen::VectorXd> xs(k);
  std::vector<const Eigen::VectorXd*> ptrs(k);
  std::vector<long long> digit(k, 0);
  long long rem = begin;
  for (int t = k - 1; t >= 0; --t) {
    digit[t] = rem % counts[t];
    rem /= counts[t];
  }
  for (int t = 0; t < k; ++t) {
    extreme_point_into(*(*view.args)[t], digit[t], xs[t]);
    ptrs[t] = &xs[t];
  }
  Workspace ws;
  Eigen::VectorXd y;
  for (long long idx = begin; idx < end; ++idx) {
    if (idx != begin) {
      int t = k - 1;
      while (true) {
        if (++digit[t] < counts[t]) {
          extreme_point_into(*(*view.args)[t], digit[t], xs[t]);
          break;
        }
        digit[t] = 0;
        extreme_point_into(*(*view.args)[t], 0, xs[t]);
        --t;
      }
    }
    const double v = evaluate(view, ptrs.data(), y, ws);
    if (v > best.value) {
      best.value = v;
      best.index = idx;
    }
  }
}

std::vector<Element> witness_from_index(const EngineView& view,
                                        const std::vector<long long>& counts,
                                        long long index) {
  const int k = view.k();
  std::vector<Element> xs(k);
  std::vector<long long> digit(k, 0);
  long long rem = index;
  for (int t = k - 1; t >= 0; --t) {
    digit[t] = rem % counts[t];
    rem /= counts[t];
  }
  for (int t = 0; t < k; ++t)
    extreme_point_into(*(*view.args)[t], digit[t], xs[t]);
  return xs;
}

/// All-ℓ¹ shortcut: signs factor out of every slot, so the signed-vertex
/// max equals the max over positive scaled basis tuples — d₁···d_k columns
/// instead of the 2^k-fold signed grid.  The witness matches the first
/// maximizer of the full signed enumeration (all-plus signs come first in
/// vertex order).
NormEstimate enumerate_l1_fast(const EngineView& view) {
  const int k = view.k();
  std::vector<int> dims(k);
  std::vector<const Eigen::VectorXd*> weights(k);
  long long cols = 1;
  for (int t = 0; t < k; ++t) {
    const auto& l1 = std::get<L1Weighted>(*(*view.args)[t]);
    dims[t] = static_cast<int>(l1.weights.size());
    weights[t] = &l1.weights;
    cols *= dims[t];
  }
  const int out_dim = view.tensor->shape(0);
  const long long stride = cols;  // distance between consecutive o's
  const double* data = view.tensor->data();

  Eigen::VectorXd col(out_dim);
  std::vector<int> digit(k, 0);
  double best = -1.0;
  long long best_idx = 0;
  for (long long idx = 0; idx < cols; ++idx) {
    if (idx != 0) {
      int t = k - 1;
      while (++digit[t] == dims[t]) {
        digit[t] = 0;
        --t;
      }
    }
    for (int o = 0; o < out_dim; ++o)
      col(o) = data[o * stride + idx];
    double wprod = 1.0;
    for (int t = 0; t < k; ++t) wprod *= (*weights[t])(digit[t]);
    const double v = element_norm(*view.out, col) / wprod;
    if (v > best) {
      best = v;
      best_idx = idx;
    }
  }

  NormEstimate est;
  est.value = std::max(best, 0.0);
  est.exact = true;
  est.method = NormMethod::ExtremePointEnumeration;
  est.witness.resize(k);
  long long rem = best_idx;
  for (int t = k - 1; t >= 0; --t) {
    const int i = static_cast<int>(rem % dims[t]);
    rem /= dims[t];
    est.witness[t] = Element::Zero(dims[t]);
    est.witness[t](i) = 1.0 / (*weights[t])(i);
  }
  return est;
}

NormEstimate enumerate_exact(const EngineView& view,
                             const std::vector<long long>& counts,
                             long long grid) {
  bool all_l1 = true;
  for (const NormSpec* n : *view.args)
    all_l1 = all_l1 && std::holds_alternative<L1Weighted>(*n);
  if (all_l1 && view.k() > 0) return enumerate_l1_fast(view);

  const int threads = thread_budget();
  BestTuple best;
  if (grid >= 4096 && threads > 1) {
    const int n_chunks = std::min<long long>(threads, grid);
    std::vector<BestTuple> partial(n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(n_chunks);
    for (int c = 0; c < n_chunks; ++c) {
      const long long begin = grid * c / n_chunks;
      const long long end = grid * (c + 1) / n_chunks;
      pool.emplace_back([&view, &counts, begin, end, &partial, c] {
        enumerate_range(view, counts, begin, end, partial[c]);
      });
    }
    for (auto& th : pool) th.join();
    for (const BestTuple& p : partial)
      if (p.value > best.value) best = p;  // ties: earlier chunk kept
  } else {
    enumerate_range(view, counts, 0, grid, best);
  }

  NormEstimate est;
  est.value = std::max(best.value, 0.0);
  est.exact = true;
  est.method = NormMethod::ExtremePointEnumeration;
  est.witness = witness_from_index(view, counts, std::max(best.index, 0LL));
  return est;
}

Eigen::VectorXd out_subgradient(const NormSpec& out, const Eigen::VectorXd& y) {
  const int d = static_cast<int>(y.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  if (const auto* l1 = std::get_if<L1Weighted>(&out)) {
    for (int i = 0; i < d; ++i)
      g(i) = y(i) >= 0.0 ? l1->weights(i) : -l1->weights(i);
    return g;
  }
  if (std::holds_alternative<LInf>(out)) {
    int arg = 0;
    double mx = -1.0;
    for (int i = 0; i < d; ++i)
      if (std::abs(y(i)) > mx) {
        mx = std::abs(y(i));
        arg = i;
      }
    g(arg) = y(arg) >= 0.0 ? 1.0 : -1.0;
    return g;
  }
  const int n = std::get<SpectralMatrix>(out).n;
  ConstRowMap ym(y.data(), n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ym,
                                        Eigen::ComputeThinU |
                                            Eigen::ComputeThinV);
  RowMap gm(g.data(), n, n);
  gm = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
  return g;
}

/// One ascent update of slot t given its slice matrix; returns the new
/// argument.  Each case maximizes the linearized objective exactly over the
/// slot's ball, which makes the round value monotone nondecreasing.
Eigen::VectorXd ascend_slot(const NormSpec& arg, const NormSpec& out,
                            const RowMat& slice,
                            const Eigen::VectorXd& current) {
  const int d = static_cast<int>(slice.cols());
  if (const auto* l1 = std::get_if<L1Weighted>(&arg)) {
    // The slice restricted to the ℓ¹ ball is maximized at a scaled basis
    // vector; scan columns directly (stronger than a linearized step).
    int best_i = 0;
    double best_v = -1.0;
    Eigen::VectorXd col(slice.rows());
    for (int i = 0; i < d; ++i) {
      col = slice.col(i);
      const double v = element_norm(out, col) / l1->weights(i);
      if (v > best_v) {
        best_v = v;
        best_i = i;
      }
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    x(best_i) = 1.0 / l1->weights(best_i);
    return x;
  }
  const Eigen::VectorXd y = slice * current;
  const Eigen::VectorXd g = out_subgradient(out, y);
  const Eigen::VectorXd f = slice.transpose() * g;
  if (std::holds_alternative<LInf>(arg)) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = f(i) >= 0.0 ? 1.0 : -1.0;
    return x;
  }
  // Spectral ball: ⟨F, X⟩ is maximized at the polar factor UVᵀ of F.
  const int n = std::get<SpectralMatrix>(arg).n;
  ConstRowMap fm(f.data(), n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fm,
                                        Eigen::ComputeFullU |
                                            Eigen::ComputeFullV);
  Eigen::VectorXd x(d);
  RowMap xm(x.data(), n, n);
  xm = svd.matrixU() * svd.matrixV().transpose();
  return x;
}

NormEstimate ascent_estimate(const EngineView& view, const NormOptions& opts) {
  const int k = view.k();
  Rng rng(mix64(opts.seed) ^ 0x6e6f726d65737431ull);
  Workspace ws;
  Eigen::VectorXd y;

  std::vector<Eigen::VectorXd> xs(k);
  std::vector<const Eigen::VectorXd*> ptrs(k);
  for (int t = 0; t < k; ++t) ptrs[t] = &xs[t];

  double best = -1.0;
  std::vector<Element> best_xs(k);
  auto consider = [&](double v) {
    if (v > best) {
      best = v;
      for (int t = 0; t < k; ++t) best_xs[t] = xs[t];
    }
  };

  for (int s = 0; s < opts.samples; ++s) {
    for (int t = 0; t < k; ++t)
      xs[t] = random_unit_vector(*(*view.args)[t], rng);
    consider(evaluate(view, ptrs.data(), y, ws));
  }

  RowMat slice;
  for (int r = 0; r < opts.restarts; ++r) {
    for (int t = 0; t < k; ++t)
      xs[t] = random_unit_vector(*(*view.args)[t], rng);
    double local = evaluate(view, ptrs.data(), y, ws);
    consider(local);
    for (int round = 0; round < opts.rounds; ++round) {
      for (int t = 0; t < k; ++t) {
        internal::contract_slice(*view.tensor, ptrs.data(), k, t, slice, ws);
        xs[t] = ascend_slot(*(*view.args)[t], *view.out, slice, xs[t]);
      }
      const double v = evaluate(view, ptrs.data(), y, ws);
      consider(v);
      if (v <= local + 1e-15 * std::max(1.0, std::abs(local))) break;
      local = v;
    }
  }

  NormEstimate est;
  est.value = std::max(best, 0.0);
  est.exact = false;
  est.method = NormMethod::AlternatingAscent;
  est.restarts = opts.restarts;
  est.rounds = opts.rounds;
  if (best >= 0.0) est.witness = best_xs;
  return est;
}

}  // namespace

NormEstimate multilinear_norm_raw(const DenseTensor& tensor,
                                  const std::vector<const NormSpec*>& arg_norms,
                                  const NormSpec& out_norm,
                                  const NormOptions& opts) {
  const int k = static_cast<int>(arg_norms.size());
  require_dims(tensor.rank() == k + 1,
               "multilinear_norm: tensor rank vs argument count");
  for (int t = 0; t < k; ++t)
    require_dims(tensor.shape(t + 1) == norm_dim(*arg_norms[t]),
                 "multilinear_norm: argument norm dimension");
  require_dims(tensor.shape(0) == norm_dim(out_norm),
               "multilinear_norm: output norm dimension");
  if (opts.budget < 1 || opts.restarts < 0 || opts.rounds < 0 ||
      opts.samples < 0)
    throw Error(ErrorKind::DomainError, "multilinear_norm: bad options");

  std::vector<long long> counts(k);
  bool enumerable = true;
  long long grid = 1;
  for (int t = 0; t < k; ++t) {
    counts[t] = extreme_point_count(*arg_norms[t]);
    if (counts[t] < 0) {
      enumerable = false;
      break;
    }
    if (grid > opts.budget / counts[t]) {
      grid = opts.budget + 1;  // marks "over budget"; avoids overflow
      break;
    }
    grid *= counts[t];
  }
  const bool within_budget = enumerable && grid <= opts.budget;

  EngineView view{&tensor, &arg_norms, &out_norm};
  if (opts.mode == NormMode::Exact && !within_budget) {
    throw Error(ErrorKind::BudgetExceeded,
                enumerable
                    ? "exact enumeration needs a grid of more than " +
                          std::to_string(opts.budget) + " vertex tuples"
                    : "exact enumeration unavailable: an argument ball has "
                      "no vertex list");
  }
  if (opts.mode != NormMode::Estimate && within_budget)
    return enumerate_exact(view, counts, grid);
  return ascent_estimate(view, opts);
}

namespace {

DenseTensor matrix_as_tensor(const Eigen::MatrixXd& m) {
  DenseTensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  RowMap(t.data(), m.rows(), m.cols()) = m;
  return t;
}

}  // namespace

NormEstimate multilinear_norm(const LinearOp& T, const NormOptions& opts) {
  const DenseTensor t = matrix_as_tensor(T.matrix);
  return multilinear_norm_raw(t, {&T.domain->norm}, T.codomain->norm, opts);
}

NormEstimate multilinear_norm(const BilinearMap& phi, const NormOptions& opts) {
  return multilinear_norm_raw(phi.tensor,
                              {&phi.domain1->norm, &phi.domain2->norm},
                              phi.codomain->norm, opts);
}

NormEstimate multilinear_norm(const TrilinearMap& xi, const NormOptions& opts) {
  return multilinear_norm_raw(
      xi.tensor, {&xi.domain1->norm, &xi.domain2->norm, &xi.domain3->norm},
      xi.codomain->norm, opts);
}

NormEstimate multilinear_norm(const QuadlinearMap& q, const NormOptions& opts) {
  return multilinear_norm_raw(q.tensor,
                              {&q.domains[0]->norm, &q.domains[1]->norm,
                               &q.domains[2]->norm, &q.domains[3]->norm},
                              q.codomain->norm, opts);
}

// ---------------------------------------------------------------------------
// Defect functionals
// ---------------------------------------------------------------------------

BilinearMap vee(const LinearOp& T, const BilinearMap& psi) {
  const int da = T.domain->dim;
  const int db = T.codomain->dim;
  require_dims(T.matrix.rows() == db && T.matrix.cols() == da,
               "vee: operator shape");
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == db && psi.tensor.shape(2) == db,
               "vee: Ψ must act on the codomain");

  DenseTensor v({db, da, da});
  const double* ca = T.domain->structure.data();
  // T(e_i e_j) part, column by column of the structure tensor.
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) {
      Eigen::Map<const Eigen::VectorXd> cvec(
          ca + (static_cast<std::size_t>(i) * da + j) * da, da);
      const Eigen::VectorXd col = T.matrix * cvec;
      for (int o = 0; o < db; ++o) v(o, i, j) = col(o);
    }
  // −Ψ(T e_i, T e_j) part, one dense block per output coordinate.
  for (int o = 0; o < db; ++o) {
    ConstRowMap po(psi.tensor.data() + static_cast<std::size_t>(o) * db * db,
                   db, db);
    RowMap block(v.data() + static_cast<std::size_t>(o) * da * da, da, da);
    block.noalias() -= T.matrix.transpose() * po * T.matrix;
  }
  return BilinearMap{std::move(v), T.domain, T.domain, psi.codomain};
}

NormEstimate mdef(const LinearOp& T, const BilinearMap& psi,
                  const NormOptions& opts) {
  return multilinear_norm(vee(T, psi), opts);
}

TrilinearMap associator_map(const BilinearMap& psi) {
  const int d = psi.tensor.shape(0);
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(1) == d &&
                   psi.tensor.shape(2) == d,
               "associator_map: Ψ must be B×B→B");
  check_trilinear_cap(d, "associator_map");

  const double* p = psi.tensor.data();
  ConstRowMap pview(p, d, d * d);  // [p](v,w)
  DenseTensor assoc({d, d, d, d});
  for (int o = 0; o < d; ++o) {
    // Ψ(u, Ψ(v,w)): contract Ψ's second argument with the inner value.
    for (int u = 0; u < d; ++u) {
      Eigen::Map<const Eigen::VectorXd> row(
          p + (static_cast<std::size_t>(o) * d + u) * d, d);
      Eigen::Map<Eigen::RowVectorXd> dst(
          assoc.data() + (static_cast<std::size_t>(o) * d + u) * d * d, d * d);
      dst.noalias() = row.transpose() * pview;
    }
    // −Ψ(Ψ(u,v), w).
    ConstRowMap po(p + static_cast<std::size_t>(o) * d * d, d, d);
    RowMap block(assoc.data() + static_cast<std::size_t>(o) * d * d * d,
                 d * d, d);
    block.noalias() -= pview.transpose() * po;
  }
  return TrilinearMap{std::move(assoc), psi.codomain, psi.codomain,
                      psi.codomain, psi.codomain};
}

NormEstimate adef(const BilinearMap& psi, const NormOptions& opts) {
  return multilinear_norm(associator_map(psi), opts);
}

// ---------------------------------------------------------------------------
// Coboundaries
// ---------------------------------------------------------------------------

namespace {

// Gathers the o-th output slice of B's product: CB_o(p,q) = c_B[p,q,o].
Eigen::MatrixXd product_slice(const Algebra& B, int o) {
  const int d = B.dim;
  Eigen::MatrixXd cb(d, d);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) cb(p, q) = B.structure(p, q, o);
  return cb;
}

}  // namespace

LinearOp coboundary(const LinearOp& phi, const Element& b) {
  const Algebra& B = *phi.codomain;
  require_dims(b.size() == B.dim, "coboundary: element dimension");
  const int da = phi.domain->dim;
  Eigen::MatrixXd m(B.dim, da);
  for (int i = 0; i < da; ++i) {
    const Element fa = phi.matrix.col(i);
    m.col(i) = multiply(B, fa, b) - multiply(B, b, fa);
  }
  return LinearOp{std::move(m), phi.domain, phi.codomain};
}

BilinearMap coboundary(const LinearOp& phi, const LinearOp& psi) {
  const int da = phi.domain->dim;
  const int db = phi.codomain->dim;
  require_dims(psi.matrix.rows() == db && psi.matrix.cols() == da,
               "coboundary: ψ shape");
  const Algebra& A = *phi.domain;
  const Algebra& B = *phi.codomain;
  ConstRowMap caview(A.structure.data(), da * da, da);  // (i,j)[m]

  DenseTensor out({db, da, da});
  for (int o = 0; o < db; ++o) {
    const Eigen::MatrixXd cbo = product_slice(B, o);
    RowMap block(out.data() + static_cast<std::size_t>(o) * da * da, da, da);
    // φ(a₁)ψ(a₂) + ψ(a₁)φ(a₂), products taken in B.
    block.noalias() = phi.matrix.transpose() * cbo * psi.matrix;
    block.noalias() += psi.matrix.transpose() * cbo * phi.matrix;
    // −ψ(a₁a₂).
    Eigen::VectorXd mids = caview * psi.matrix.row(o).transpose();  // (i,j)
    block -= RowMap(mids.data(), da, da);
  }
  return BilinearMap{std::move(out), phi.domain, phi.domain, phi.codomain};
}

TrilinearMap coboundary(const LinearOp& phi, const BilinearMap& psi) {
  const int da = phi.domain->dim;
  const int db = phi.codomain->dim;
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == da && psi.tensor.shape(2) == da,
               "coboundary: ψ shape");
  check_trilinear_cap(da, "coboundary");
  const Algebra& A = *phi.domain;
  const Algebra& B = *phi.codomain;
  ConstRowMap caview(A.structure.data(), da * da, da);
  ConstRowMap qview(psi.tensor.data(), db, da * da);  // [q](j,k)

  DenseTensor out({db, da, da, da});
  for (int o = 0; o < db; ++o) {
    const Eigen::MatrixXd cbo = product_slice(B, o);
    double* base = out.data() + static_cast<std::size_t>(o) * da * da * da;
    // +φ(a₁)ψ(a₂,a₃)
    RowMap asfirst(base, da, da * da);  // [i](j,k)
    asfirst.noalias() =
        (phi.matrix.transpose() * cbo) * qview;
    // −ψ(a₁a₂,a₃): per (i,j) row over k.
    ConstRowMap qo(psi.tensor.data() + static_cast<std::size_t>(o) * da * da,
                   da, da);
    RowMap aspair(base, da * da, da);  // (i,j)[k]
    aspair.noalias() -= caview * qo;
    // +ψ(a₁,a₂a₃): per i, contract the product into ψ's second slot.
    for (int i = 0; i < da; ++i) {
      Eigen::VectorXd vals =
          caview * qo.row(i).transpose();  // (j,k) ↦ Σ_m c[j,k,m]ψ[o,i,m]
      Eigen::Map<Eigen::VectorXd>(base + static_cast<std::size_t>(i) * da * da,
                                  da * da) += vals;
    }
    // −ψ(a₁,a₂)φ(a₃)
    aspair.noalias() -= qview.transpose() * (cbo * phi.matrix);
  }
  return TrilinearMap{std::move(out), phi.domain, phi.domain, phi.domain,
                      phi.codomain};
}

QuadlinearMap coboundary(const LinearOp& phi, const TrilinearMap& psi) {
  const int da = phi.domain->dim;
  const int db = phi.codomain->dim;
  require_dims(psi.tensor.rank() == 4 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == da && psi.tensor.shape(2) == da &&
                   psi.tensor.shape(3) == da,
               "coboundary: ψ shape");
  check_trilinear_cap(da, "coboundary");
  const Algebra& A = *phi.domain;
  const Algebra& B = *phi.codomain;
  const std::size_t da2 = static_cast<std::size_t>(da) * da;
  const std::size_t da3 = da2 * da;
  ConstRowMap caview(A.structure.data(), da * da, da);
  ConstRowMap qflat(psi.tensor.data(), db, static_cast<Eigen::Index>(da3));

  DenseTensor out({db, da, da, da, da});
  for (int o = 0; o < db; ++o) {
    const Eigen::MatrixXd cbo = product_slice(B, o);
    double* base = out.data() + static_cast<std::size_t>(o) * da3 * da;
    const double* qo = psi.tensor.data() + static_cast<std::size_t>(o) * da3;
    // +φ(a₁)ψ(a₂,a₃,a₄)
    RowMap first(base, da, static_cast<Eigen::Index>(da3));
    first.noalias() = (phi.matrix.transpose() * cbo) * qflat;
    // −ψ(a₁a₂,a₃,a₄)
    ConstRowMap qo12(qo, da, static_cast<Eigen::Index>(da2));  // [m](c,e)
    RowMap pair12(base, da * da, static_cast<Eigen::Index>(da2));
    pair12.noalias() -= caview * qo12;
    // +ψ(a₁,a₂a₃,a₄)
    for (int a = 0; a < da; ++a) {
      ConstRowMap qoa(qo + static_cast<std::size_t>(a) * da2, da, da);
      RowMat vals = caview * qoa;  // (b,c)[e]
      RowMap(base + static_cast<std::size_t>(a) * da3, da * da, da) += vals;
    }
    // −ψ(a₁,a₂,a₃a₄)
    for (int a = 0; a < da; ++a)
      for (int b = 0; b < da; ++b) {
        Eigen::Map<const Eigen::VectorXd> qab(
            qo + static_cast<std::size_t>(a) * da2 +
                static_cast<std::size_t>(b) * da,
            da);
        Eigen::VectorXd vals = caview * qab;  // (c,e)
        Eigen::Map<Eigen::VectorXd>(
            base + static_cast<std::size_t>(a) * da3 +
                static_cast<std::size_t>(b) * da2,
            static_cast<Eigen::Index>(da2)) -= vals;
      }
    // +ψ(a₁,a₂,a₃)φ(a₄)
    RowMap triple(base, static_cast<Eigen::Index>(da3), da);
    triple.noalias() += qflat.transpose() * (cbo * phi.matrix);
  }
  return QuadlinearMap{
      std::move(out),
      {phi.domain, phi.domain, phi.domain, phi.domain},
      phi.codomain};
}

void coboundary(const LinearOp&, const QuadlinearMap&) {
  throw Error(ErrorKind::UnsupportedDegree,
              "coboundary of a 4-linear cochain would need a rank-6 tensor; "
              "degrees above 3 are not supported");
}

TrilinearMap delta2(const LinearOp& T, const BilinearMap& psi,
                    const BilinearMap& phi) {
  const int da = T.domain->dim;
  const int db = T.codomain->dim;
  require_dims(T.matrix.rows() == db && T.matrix.cols() == da,
               "delta2: operator shape");
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == db && psi.tensor.shape(2) == db,
               "delta2: Ψ shape");
  require_dims(phi.tensor.rank() == 3 && phi.tensor.shape(0) == db &&
                   phi.tensor.shape(1) == da && phi.tensor.shape(2) == da,
               "delta2: φ shape");
  check_trilinear_cap(da, "delta2");
  const Algebra& A = *T.domain;
  ConstRowMap caview(A.structure.data(), da * da, da);
  ConstRowMap phiflat(phi.tensor.data(), db, da * da);  // [q](y,z)

  DenseTensor out({db, da, da, da});
  for (int o = 0; o < db; ++o) {
    ConstRowMap po(psi.tensor.data() + static_cast<std::size_t>(o) * db * db,
                   db, db);
    ConstRowMap phio(phi.tensor.data() + static_cast<std::size_t>(o) * da * da,
                     da, da);
    double* base = out.data() + static_cast<std::size_t>(o) * da * da * da;
    // +Ψ(T(x), φ(y,z))
    RowMap asfirst(base, da, da * da);
    asfirst.noalias() = T.matrix.transpose() * (po * phiflat);
    // −φ(xy, z)
    RowMap aspair(base, da * da, da);
    aspair.noalias() -= caview * phio;
    // +φ(x, yz)
    for (int x = 0; x < da; ++x) {
      Eigen::VectorXd vals = caview * phio.row(x).transpose();  // (y,z)
      Eigen::Map<Eigen::VectorXd>(base + static_cast<std::size_t>(x) * da * da,
                                  da * da) += vals;
    }
    // −Ψ(φ(x,y), T(z))
    aspair.noalias() -= phiflat.transpose() * (po * T.matrix);
  }
  return TrilinearMap{std::move(out), T.domain, T.domain, T.domain,
                      psi.codomain};
}

BilinearMap derivative_apply(const LinearOp& T, const BilinearMap& psi,
                             const LinearOp& H) {
  const int da = T.domain->dim;
  const int db = T.codomain->dim;
  require_dims(H.matrix.rows() == db && H.matrix.cols() == da,
               "derivative_apply: H shape");
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == db && psi.tensor.shape(2) == db,
               "derivative_apply: Ψ shape");
  const Algebra& A = *T.domain;
  ConstRowMap caview(A.structure.data(), da * da, da);

  DenseTensor out({db, da, da});
  for (int o = 0; o < db; ++o) {
    ConstRowMap po(psi.tensor.data() + static_cast<std::size_t>(o) * db * db,
                   db, db);
    RowMap block(out.data() + static_cast<std::size_t>(o) * da * da, da, da);
    Eigen::VectorXd hvals = caview * H.matrix.row(o).transpose();  // H(xy)_o
    block = RowMap(hvals.data(), da, da);
    block.noalias() -= T.matrix.transpose() * po * H.matrix;
    block.noalias() -= H.matrix.transpose() * po * T.matrix;
  }
  return BilinearMap{std::move(out), T.domain, T.domain, psi.codomain};
}

}  // namespace stablab
