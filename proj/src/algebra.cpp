#include "stablab/algebra.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <utility>

#include "stablab/defects.hpp"

namespace stablab {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;

constexpr int kMaxDim = 64;          // dense d³ structure tensors
constexpr int kMaxLInfEnum = 20;     // 2^d vertex enumeration cap
constexpr double kStructTol = 1e-12;
constexpr double kUnitNormTol = 1e-9;
constexpr double kSubmultTol = 1e-9;

std::string tuple_str(std::initializer_list<int> ix) {
  std::ostringstream os;
  os << "(";
  bool first = true;
  for (int i : ix) {
    if (!first) os << ",";
    os << i;
    first = false;
  }
  os << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

int norm_dim(const NormSpec& norm) {
  return std::visit(
      [](const auto& n) -> int {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, L1Weighted>)
          return static_cast<int>(n.weights.size());
        else if constexpr (std::is_same_v<N, LInf>)
          return n.dim;
        else
          return n.n * n.n;
      },
      norm);
}

const char* norm_name(const NormSpec& norm) {
  switch (norm.index()) {
    case 0: return "L1Weighted";
    case 1: return "LInf";
    default: return "SpectralMatrix";
  }
}

double element_norm(const NormSpec& norm, const Element& coords) {
  const int d = norm_dim(norm);
  if (coords.size() != d)
    throw Error(ErrorKind::DimensionMismatch,
                "element_norm: vector length " +
                    std::to_string(coords.size()) + " vs norm dimension " +
                    std::to_string(d));
  if (const auto* l1 = std::get_if<L1Weighted>(&norm))
    return l1->weights.dot(coords.cwiseAbs());
  if (std::holds_alternative<LInf>(norm))
    return d == 0 ? 0.0 : coords.cwiseAbs().maxCoeff();
  const int n = std::get<SpectralMatrix>(norm).n;
  ConstRowMap m(coords.data(), n, n);
  if (n == 1) return std::abs(coords(0));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

long long extreme_point_count(const NormSpec& norm) {
  if (std::holds_alternative<L1Weighted>(norm))
    return 2LL * norm_dim(norm);
  if (const auto* li = std::get_if<LInf>(&norm))
    return li->dim <= kMaxLInfEnum ? (1LL << li->dim) : -1;
  return -1;
}

void extreme_point_into(const NormSpec& norm, long long index,
                        Eigen::VectorXd& out) {
  const int d = norm_dim(norm);
  out.setZero(d);
  if (const auto* l1 = std::get_if<L1Weighted>(&norm)) {
    const int i = static_cast<int>(index / 2);
    const double sign = (index % 2 == 0) ? 1.0 : -1.0;
    out(i) = sign / l1->weights(i);
    return;
  }
  if (std::holds_alternative<LInf>(norm)) {
    for (int i = 0; i < d; ++i)
      out(i) = ((index >> i) & 1) ? -1.0 : 1.0;
    return;
  }
  throw Error(ErrorKind::WrongNormKind,
              "extreme_point_into: no vertex list for this norm");
}

std::optional<std::vector<Eigen::VectorXd>> extreme_points(
    const NormSpec& norm) {
  const long long count = extreme_point_count(norm);
  if (count < 0) return std::nullopt;
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i)
    extreme_point_into(norm, i, pts[static_cast<std::size_t>(i)]);
  return pts;
}

Element random_unit_vector(const NormSpec& norm, Rng& rng) {
  const int d = norm_dim(norm);
  Element x(d);
  double nrm = 0.0;
  do {
    for (int i = 0; i < d; ++i) x(i) = rng.uniform_pm1();
    nrm = element_norm(norm, x);
  } while (nrm < 1e-300);
  x /= nrm;
  // Stay strictly inside the ball: sampled values must never beat exact sups.
  for (int guard = 0; guard < 8 && element_norm(norm, x) > 1.0; ++guard)
    x *= 1.0 - 4.0 * 1.1102230246251565e-16;
  return x;
}

// ---------------------------------------------------------------------------
// Construction-time validation
// ---------------------------------------------------------------------------

namespace {

void check_associativity(const DenseTensor& c, int d) {
  // Per fixed i, both sides of Σ_m c[i,j,m]c[m,k,l] = Σ_m c[j,k,m]c[i,m,l]
  // are small matrix products; memory stays O(d³) instead of d⁴.
  ConstRowMap whole2(c.data(), d, d * d);           // [m](k,l)
  ConstRowMap whole1(c.data(), d * d, d);           // (j,k)[m]
  double worst = 0.0;
  int wi = 0, wj = 0, wk = 0, wl = 0;
  RowMat lhs, rhs;
  for (int i = 0; i < d; ++i) {
    ConstRowMap ci(c.data() + static_cast<std::size_t>(i) * d * d, d, d);
    lhs.noalias() = ci * whole2;   // [j](k,l)
    rhs.noalias() = whole1 * ci;   // (j,k)[l]
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const double r = std::abs(lhs(j, k * d + l) - rhs(j * d + k, l));
          if (r > worst) {
            worst = r;
            wi = i; wj = j; wk = k; wl = l;
          }
        }
  }
  if (worst > kStructTol)
    throw Error(ErrorKind::AssociativityViolation,
                "worst residual " + std::to_string(worst) + " at " +
                    tuple_str({wi, wj, wk, wl}));
}

void check_unit_laws(const DenseTensor& c, const Element& unit, int d) {
  double worst = 0.0;
  int wj = 0, wk = 0;
  const char* side = "left";
  ConstRowMap whole2(c.data(), d, d * d);
  Eigen::RowVectorXd left = unit.transpose() * whole2;  // (1·e_j)_k at j*d+k
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      const double r = std::abs(left(j * d + k) - (j == k ? 1.0 : 0.0));
      if (r > worst) {
        worst = r;
        wj = j; wk = k; side = "left";
      }
    }
  for (int j = 0; j < d; ++j) {
    ConstRowMap cj(c.data() + static_cast<std::size_t>(j) * d * d, d, d);
    Eigen::VectorXd right = cj.transpose() * unit;  // (e_j·1)_k
    for (int k = 0; k < d; ++k) {
      const double r = std::abs(right(k) - (j == k ? 1.0 : 0.0));
      if (r > worst) {
        worst = r;
        wj = j; wk = k; side = "right";
      }
    }
  }
  if (worst > kStructTol)
    throw Error(ErrorKind::UnitLawViolation,
                std::string(side) + " unit law, worst residual " +
                    std::to_string(worst) + " at " + tuple_str({wj, wk}));
}

void check_submultiplicative(const Algebra& a, bool allow_unnormalized) {
  // Multiplication map as a {d, d, d} tensor with output axis first.
  const int d = a.dim;
  DenseTensor mult({d, d, d});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) mult(k, i, j) = a.structure(i, j, k);
  NormOptions opts;
  opts.seed = 0;
  opts.restarts = 4;    // light effort: a lower bound suffices to catch
  opts.rounds = 25;     // violations, and valid algebras cannot fail
  opts.samples = 2000;
  const NormEstimate est = multilinear_norm_raw(
      mult, {&a.norm, &a.norm}, a.norm, opts);
  if (est.value > 1.0 + kSubmultTol) {
    const std::string msg =
        "multiplication norm " + std::to_string(est.value) +
        (est.exact ? " (exact)" : " (estimated)") + " exceeds 1";
    if (!allow_unnormalized)
      throw Error(ErrorKind::NotSubmultiplicative, msg);
    std::fprintf(stderr, "stablab: warning: %s (allow_unnormalized set)\n",
                 msg.c_str());
  }
}

}  // namespace

AlgebraPtr make_algebra(DenseTensor structure, Element unit, NormSpec norm,
                        const MakeOptions& opts) {
  if (structure.rank() != 3 || structure.shape(0) != structure.shape(1) ||
      structure.shape(0) != structure.shape(2))
    throw Error(ErrorKind::DimensionMismatch,
                "structure tensor must be d×d×d");
  const int d = structure.shape(0);
  if (d < 1 || d > kMaxDim)
    throw Error(ErrorKind::DomainError,
                "algebra dimension must be in [1, " +
                    std::to_string(kMaxDim) + "], got " + std::to_string(d));
  if (unit.size() != d)
    throw Error(ErrorKind::DimensionMismatch,
                "unit vector length " + std::to_string(unit.size()) +
                    " vs dimension " + std::to_string(d));
  if (norm_dim(norm) != d)
    throw Error(ErrorKind::DimensionMismatch,
                std::string("norm ") + norm_name(norm) + " has dimension " +
                    std::to_string(norm_dim(norm)) + " vs algebra dimension " +
                    std::to_string(d));
  if (const auto* l1 = std::get_if<L1Weighted>(&norm)) {
    for (int i = 0; i < d; ++i)
      if (!(l1->weights(i) > 0.0))
        throw Error(ErrorKind::DomainError,
                    "L1 weight " + std::to_string(i) + " must be positive");
  }

  check_associativity(structure, d);
  check_unit_laws(structure, unit, d);
  const double unit_norm = element_norm(norm, unit);
  if (std::abs(unit_norm - 1.0) > kUnitNormTol)
    throw Error(ErrorKind::UnitLawViolation,
                "‖1‖ = " + std::to_string(unit_norm) + ", expected 1");

  auto algebra = std::make_shared<Algebra>();
  algebra->dim = d;
  algebra->structure = std::move(structure);
  algebra->unit = std::move(unit);
  algebra->norm = std::move(norm);
  check_submultiplicative(*algebra, opts.allow_unnormalized);
  return algebra;
}

// ---------------------------------------------------------------------------
// Built-in algebras
// ---------------------------------------------------------------------------

namespace {

AlgebraPtr finish_group_algebra(const GroupTable& table) {
  const int k = static_cast<int>(table.cayley.size());
  DenseTensor structure({k, k, k});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) structure(i, j, table.cayley[i][j]) = 1.0;
  Element unit = Element::Zero(k);
  unit(table.identity) = 1.0;
  AlgebraPtr base = make_algebra(std::move(structure), std::move(unit),
                                 L1Weighted{Eigen::VectorXd::Ones(k)});
  auto algebra = std::make_shared<Algebra>(*base);
  algebra->kind = AlgebraKind::Group;
  algebra->group = table;
  return algebra;
}

}  // namespace

AlgebraPtr cyclic_algebra(int k) {
  if (k < 1)
    throw Error(ErrorKind::DomainError, "cyclic_algebra requires k >= 1");
  GroupTable table;
  table.cayley.assign(k, std::vector<int>(k));
  table.inverses.resize(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) table.cayley[i][j] = (i + j) % k;
    table.inverses[i] = (k - i) % k;
  }
  table.identity = 0;
  return finish_group_algebra(table);
}

AlgebraPtr group_algebra(const std::vector<std::vector<int>>& cayley,
                         const std::vector<int>& inverses) {
  const int k = static_cast<int>(cayley.size());
  if (k < 1) throw Error(ErrorKind::NotAGroup, "empty Cayley table");
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(cayley[i].size()) != k)
      throw Error(ErrorKind::NotAGroup,
                  "row " + std::to_string(i) + " has wrong length");
    for (int j = 0; j < k; ++j)
      if (cayley[i][j] < 0 || cayley[i][j] >= k)
        throw Error(ErrorKind::NotAGroup,
                    "entry out of range at " + tuple_str({i, j}));
  }
  // Latin square ⇒ cancellation; with associativity this forces a group.
  for (int i = 0; i < k; ++i) {
    std::vector<bool> seen_row(k, false), seen_col(k, false);
    for (int j = 0; j < k; ++j) {
      if (seen_row[cayley[i][j]])
        throw Error(ErrorKind::NotAGroup,
                    "row " + std::to_string(i) + " is not a permutation");
      seen_row[cayley[i][j]] = true;
      if (seen_col[cayley[j][i]])
        throw Error(ErrorKind::NotAGroup,
                    "column " + std::to_string(i) + " is not a permutation");
      seen_col[cayley[j][i]] = true;
    }
  }
  int identity = -1;
  for (int e = 0; e < k && identity < 0; ++e) {
    bool ok = true;
    for (int g = 0; g < k && ok; ++g)
      ok = cayley[e][g] == g && cayley[g][e] == g;
    if (ok) identity = e;
  }
  if (identity < 0)
    throw Error(ErrorKind::NotAGroup, "no two-sided identity element");
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c)
        if (cayley[cayley[a][b]][c] != cayley[a][cayley[b][c]])
          throw Error(ErrorKind::NotAGroup,
                      "associativity fails at " + tuple_str({a, b, c}));
  if (static_cast<int>(inverses.size()) != k)
    throw Error(ErrorKind::NotAGroup, "inverse list has wrong length");
  for (int g = 0; g < k; ++g) {
    const int h = inverses[g];
    if (h < 0 || h >= k || cayley[g][h] != identity ||
        cayley[h][g] != identity)
      throw Error(ErrorKind::NotAGroup,
                  "inverse of element " + std::to_string(g) + " is broken");
  }
  GroupTable table{cayley, inverses, identity};
  return finish_group_algebra(table);
}

AlgebraPtr matrix_algebra(int n) {
  if (n < 1)
    throw Error(ErrorKind::DomainError, "matrix_algebra requires n >= 1");
  const int d = n * n;
  if (d > kMaxDim)
    throw Error(ErrorKind::DomainError,
                "matrix_algebra(" + std::to_string(n) + ") exceeds the " +
                    std::to_string(kMaxDim) + "-dimension cap");
  // e_{ij}e_{kl} = δ_{jk} e_{il}, basis index (i,j) ↦ i*n+j.
  DenseTensor structure({d, d, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        structure(i * n + j, j * n + l, i * n + l) = 1.0;
  Element unit = Element::Zero(d);
  for (int i = 0; i < n; ++i) unit(i * n + i) = 1.0;
  AlgebraPtr base = make_algebra(std::move(structure), std::move(unit),
                                 SpectralMatrix{n});
  auto algebra = std::make_shared<Algebra>(*base);
  algebra->kind = AlgebraKind::Matrix;
  algebra->matrix_n = n;
  return algebra;
}

AlgebraPtr pointwise_algebra(int d) {
  if (d < 1)
    throw Error(ErrorKind::DomainError, "pointwise_algebra requires d >= 1");
  if (d > kMaxDim)
    throw Error(ErrorKind::DomainError,
                "pointwise_algebra dimension exceeds the cap");
  DenseTensor structure({d, d, d});
  for (int i = 0; i < d; ++i) structure(i, i, i) = 1.0;
  AlgebraPtr base =
      make_algebra(std::move(structure), Element::Ones(d), LInf{d});
  auto algebra = std::make_shared<Algebra>(*base);
  algebra->kind = AlgebraKind::Pointwise;
  return algebra;
}

Element multiply(const Algebra& algebra, const Element& x, const Element& y) {
  const int d = algebra.dim;
  if (x.size() != d || y.size() != d)
    throw Error(ErrorKind::DimensionMismatch,
                "multiply: operand lengths " + std::to_string(x.size()) +
                    ", " + std::to_string(y.size()) + " vs dimension " +
                    std::to_string(d));
  Element out = Element::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (x(i) == 0.0) continue;
    ConstRowMap ci(algebra.structure.data() +
                       static_cast<std::size_t>(i) * d * d,
                   d, d);
    out.noalias() += x(i) * (ci.transpose() * y);
  }
  return out;
}

}  // namespace stablab
