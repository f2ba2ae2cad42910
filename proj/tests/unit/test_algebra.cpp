#include <doctest.h>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "stablab/algebra.hpp"
#include "stablab/errors.hpp"
#include "stablab/rng.hpp"

using namespace stablab;

namespace {

// S_3 as permutations of {0,1,2}; composition (p∘q)(i) = p[q[i]].
struct SymmetricGroup3 {
  std::vector<std::array<int, 3>> elems;
  std::vector<std::vector<int>> cayley;
  std::vector<int> inverses;

  SymmetricGroup3() {
    std::array<int, 3> p{0, 1, 2};
    do {
      elems.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    const int n = static_cast<int>(elems.size());
    cayley.assign(n, std::vector<int>(n, -1));
    inverses.assign(n, -1);
    auto index_of = [&](const std::array<int, 3>& q) {
      for (int i = 0; i < n; ++i)
        if (elems[i] == q) return i;
      return -1;
    };
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::array<int, 3> c{};
        for (int i = 0; i < 3; ++i) c[i] = elems[a][elems[b][i]];
        cayley[a][b] = index_of(c);
      }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (cayley[a][b] == 0) inverses[a] = b;
  }
};

Element basis(int dim, int i) {
  Element e = Element::Zero(dim);
  e(i) = 1.0;
  return e;
}

Element random_element(int dim, Rng& rng, double amplitude = 2.0) {
  Element x(dim);
  for (int i = 0; i < dim; ++i) x(i) = amplitude * rng.uniform_pm1();
  return x;
}

// d=3 structure table with unit e_0 baked in; the (1,*) and (2,*) products
// are supplied by the caller.
DenseTensor structure_with_unit(const Element& e11, const Element& e12,
                                const Element& e21, const Element& e22) {
  DenseTensor c({3, 3, 3});
  for (int j = 0; j < 3; ++j) {
    c(0, j, j) = 1.0;  // e_0 e_j = e_j
    c(j, 0, j) = 1.0;  // e_j e_0 = e_j
  }
  for (int k = 0; k < 3; ++k) {
    c(1, 1, k) = e11(k);
    c(1, 2, k) = e12(k);
    c(2, 1, k) = e21(k);
    c(2, 2, k) = e22(k);
  }
  return c;
}

}  // namespace

TEST_CASE("cyclic algebra multiplies basis vectors by index addition") {
  auto A = cyclic_algebra(6);
  REQUIRE(A->dim == 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      Element p = multiply(*A, basis(6, i), basis(6, j));
      for (int k = 0; k < 6; ++k)
        CHECK(p(k) == (k == (i + j) % 6 ? 1.0 : 0.0));
    }
  CHECK(A->kind == AlgebraKind::Group);
  REQUIRE(A->group.has_value());
  CHECK(A->group->identity == 0);
  CHECK(A->group->inverses[2] == 4);
}

TEST_CASE("unit has norm exactly one in every built-in algebra") {
  SymmetricGroup3 s3;
  std::vector<AlgebraPtr> algebras = {
      cyclic_algebra(2), cyclic_algebra(3),          cyclic_algebra(6),
      matrix_algebra(2), pointwise_algebra(4),       cyclic_algebra(1),
      group_algebra(s3.cayley, s3.inverses)};
  for (const auto& A : algebras) {
    CHECK(element_norm(*A, A->unit) == 1.0);
    // unit laws hold to the last bit on basis vectors
    for (int i = 0; i < A->dim; ++i) {
      Element e = basis(A->dim, i);
      CHECK((multiply(*A, A->unit, e) - e).lpNorm<Eigen::Infinity>() == 0.0);
      CHECK((multiply(*A, e, A->unit) - e).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("built-in structure constants are associative to machine precision") {
  SymmetricGroup3 s3;
  std::vector<AlgebraPtr> algebras = {cyclic_algebra(6), matrix_algebra(2),
                                      pointwise_algebra(3),
                                      group_algebra(s3.cayley, s3.inverses)};
  for (const auto& A : algebras) {
    double worst = 0.0;
    for (int i = 0; i < A->dim; ++i)
      for (int j = 0; j < A->dim; ++j)
        for (int k = 0; k < A->dim; ++k) {
          Element lhs = multiply(*A, multiply(*A, basis(A->dim, i),
                                              basis(A->dim, j)),
                                 basis(A->dim, k));
          Element rhs = multiply(*A, basis(A->dim, i),
                                 multiply(*A, basis(A->dim, j),
                                          basis(A->dim, k)));
          worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
        }
    CHECK(worst == 0.0);
  }
}

TEST_CASE("norms are homogeneous and satisfy the triangle inequality") {
  Eigen::VectorXd w(4);
  w << 0.5, 2.0, 1.0, 3.0;
  std::vector<NormSpec> norms = {
      L1Weighted{Eigen::VectorXd::Ones(5)}, L1Weighted{w}, LInf{6},
      SpectralMatrix{2}};
  Rng rng(12345);
  for (const auto& norm : norms) {
    const int d = norm_dim(norm);
    for (int trial = 0; trial < 1000; ++trial) {
      Element x = random_element(d, rng);
      Element y = random_element(d, rng);
      double c = 4.0 * rng.uniform_pm1();
      double nx = element_norm(norm, x);
      double ny = element_norm(norm, y);
      double scale = std::max(1.0, std::abs(c) * nx);
      CHECK(std::abs(element_norm(norm, c * x) - std::abs(c) * nx) <=
            1e-12 * scale);
      CHECK(element_norm(norm, x + y) <= nx + ny + 1e-12 * std::max(1.0, nx + ny));
      CHECK(element_norm(norm, x) >= 0.0);
    }
    // definiteness at zero
    CHECK(element_norm(norm, Element::Zero(d)) == 0.0);
  }
}

TEST_CASE("multiplication is submultiplicative on random pairs") {
  SymmetricGroup3 s3;
  std::vector<AlgebraPtr> algebras = {cyclic_algebra(2), cyclic_algebra(6),
                                      matrix_algebra(2), pointwise_algebra(4),
                                      group_algebra(s3.cayley, s3.inverses)};
  Rng rng(777);
  for (const auto& A : algebras) {
    for (int trial = 0; trial < 1000; ++trial) {
      Element x = random_element(A->dim, rng);
      Element y = random_element(A->dim, rng);
      double nx = element_norm(*A, x);
      double ny = element_norm(*A, y);
      double nxy = element_norm(*A, multiply(*A, x, y));
      CHECK(nxy <= nx * ny * (1.0 + 1e-12) + 1e-12);
    }
  }
}

TEST_CASE("extreme points dominate random samples for linear functionals") {
  Eigen::VectorXd w(3);
  w << 2.0, 0.25, 1.0;
  std::vector<NormSpec> norms = {L1Weighted{Eigen::VectorXd::Ones(4)},
                                 L1Weighted{w}, LInf{5}};
  Rng rng(4242);
  for (const auto& norm : norms) {
    const int d = norm_dim(norm);
    Element f = random_element(d, rng, 3.0);
    auto verts = extreme_points(norm);
    REQUIRE(verts.has_value());
    CHECK(static_cast<long long>(verts->size()) == extreme_point_count(norm));
    double vertex_max = 0.0;
    for (const auto& v : *verts) {
      vertex_max = std::max(vertex_max, std::abs(f.dot(v)));
      CHECK(element_norm(norm, v) <= 1.0 + 1e-15);
    }
    for (int s = 0; s < 10'000; ++s) {
      Element u = random_unit_vector(norm, rng);
      CHECK(std::abs(f.dot(u)) <= vertex_max * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("extreme point enumeration order and counts") {
  Eigen::VectorXd w(3);
  w << 2.0, 0.25, 1.0;
  NormSpec l1 = L1Weighted{w};
  CHECK(extreme_point_count(l1) == 6);
  Eigen::VectorXd out;
  extreme_point_into(l1, 0, out);
  CHECK(out(0) == 0.5);  // +e_0 / w_0
  extreme_point_into(l1, 1, out);
  CHECK(out(0) == -0.5);
  extreme_point_into(l1, 2, out);
  CHECK(out(1) == 4.0);  // +e_1 / w_1

  NormSpec li = LInf{4};
  CHECK(extreme_point_count(li) == 16);
  extreme_point_into(li, 0, out);
  CHECK(out == Eigen::VectorXd::Ones(4));
  extreme_point_into(li, 5, out);  // bits 0 and 2 set → sign flips there
  CHECK(out(0) == -1.0);
  CHECK(out(1) == 1.0);
  CHECK(out(2) == -1.0);
  CHECK(out(3) == 1.0);

  CHECK(extreme_point_count(LInf{21}) == -1);
  CHECK(extreme_point_count(SpectralMatrix{2}) == -1);
  CHECK(!extreme_points(SpectralMatrix{2}).has_value());
}

TEST_CASE("random unit vectors never leave the unit ball") {
  Eigen::VectorXd w(4);
  w << 0.5, 2.0, 1.0, 3.0;
  std::vector<NormSpec> norms = {L1Weighted{w}, LInf{6}, SpectralMatrix{3}};
  Rng rng(99);
  for (const auto& norm : norms) {
    double best = 0.0;
    for (int s = 0; s < 1000; ++s) {
      Element u = random_unit_vector(norm, rng);
      double n = element_norm(norm, u);
      CHECK(n <= 1.0);
      best = std::max(best, n);
    }
    CHECK(best > 0.9);  // nearly tight from below
  }
}

TEST_CASE("make_algebra rejects a non-associative structure") {
  // e_1 e_1 = e_2, e_1 e_2 = e_0, e_2 e_1 = 0:
  // (e_1 e_1) e_1 = 0 but e_1 (e_1 e_1) = e_0.
  DenseTensor c = structure_with_unit(basis(3, 2), basis(3, 0),
                                      Element::Zero(3), Element::Zero(3));
  try {
    make_algebra(c, basis(3, 0), L1Weighted{Eigen::VectorXd::Ones(3)});
    FAIL("expected AssociativityViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AssociativityViolation);
  }
}

TEST_CASE("make_algebra rejects a broken unit row") {
  // Pointwise product on R² (associative), but e_0 is not its unit:
  // e_0 · e_1 = 0 ≠ e_1.
  DenseTensor c({2, 2, 2});
  c(0, 0, 0) = 1.0;
  c(1, 1, 1) = 1.0;
  try {
    make_algebra(c, basis(2, 0), L1Weighted{Eigen::VectorXd::Ones(2)});
    FAIL("expected UnitLawViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnitLawViolation);
  }
}

TEST_CASE("make_algebra rejects a unit of norm other than one") {
  DenseTensor c({2, 2, 2});
  c(0, 0, 0) = 1.0;
  c(0, 1, 1) = 1.0;
  c(1, 0, 1) = 1.0;
  c(1, 1, 0) = 1.0;
  Eigen::VectorXd w(2);
  w << 2.0, 2.0;  // ‖e_0‖ = 2
  try {
    make_algebra(c, basis(2, 0), L1Weighted{w});
    FAIL("expected UnitLawViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnitLawViolation);
  }
}

TEST_CASE("make_algebra enforces submultiplicativity unless told otherwise") {
  DenseTensor c({2, 2, 2});
  c(0, 0, 0) = 1.0;
  c(0, 1, 1) = 1.0;
  c(1, 0, 1) = 1.0;
  c(1, 1, 0) = 4.0;  // ‖e_1 e_1‖ = 4 > ‖e_1‖²  (still associative/commutative)
  NormSpec norm = L1Weighted{Eigen::VectorXd::Ones(2)};
  try {
    make_algebra(c, basis(2, 0), norm);
    FAIL("expected NotSubmultiplicative");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotSubmultiplicative);
  }
  MakeOptions opts;
  opts.allow_unnormalized = true;
  auto A = make_algebra(c, basis(2, 0), norm, opts);
  CHECK(A->dim == 2);
  Element sq = multiply(*A, basis(2, 1), basis(2, 1));
  CHECK(sq(0) == 4.0);
}

TEST_CASE("make_algebra rejects mismatched shapes") {
  DenseTensor c({2, 2, 3});
  CHECK_THROWS_AS(
      make_algebra(c, basis(2, 0), L1Weighted{Eigen::VectorXd::Ones(2)}),
      Error);
  DenseTensor ok({2, 2, 2});
  CHECK_THROWS_AS(
      make_algebra(ok, basis(3, 0), L1Weighted{Eigen::VectorXd::Ones(2)}),
      Error);
}

TEST_CASE("symmetric group algebra is a valid non-commutative group algebra") {
  SymmetricGroup3 s3;
  auto A = group_algebra(s3.cayley, s3.inverses);
  REQUIRE(A->dim == 6);
  CHECK(A->kind == AlgebraKind::Group);
  CHECK(element_norm(*A, A->unit) == 1.0);
  bool noncommutative = false;
  for (int a = 0; a < 6 && !noncommutative; ++a)
    for (int b = 0; b < 6; ++b) {
      Element ab = multiply(*A, basis(6, a), basis(6, b));
      Element ba = multiply(*A, basis(6, b), basis(6, a));
      if ((ab - ba).lpNorm<Eigen::Infinity>() > 0.5) {
        noncommutative = true;
        break;
      }
    }
  CHECK(noncommutative);
  // g · g⁻¹ = identity on the nose
  for (int g = 0; g < 6; ++g) {
    Element p = multiply(*A, basis(6, g), basis(6, s3.inverses[g]));
    CHECK((p - A->unit).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("group_algebra rejects tables that are not groups") {
  // Not a Latin square: row with a repeated entry.
  std::vector<std::vector<int>> bad = {{0, 1}, {1, 1}};
  std::vector<int> inv = {0, 1};
  try {
    group_algebra(bad, inv);
    FAIL("expected NotAGroup");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotAGroup);
  }
  // Wrong inverse list.
  std::vector<std::vector<int>> z2 = {{0, 1}, {1, 0}};
  std::vector<int> wrong_inv = {1, 0};
  CHECK_THROWS_AS(group_algebra(z2, wrong_inv), Error);
  // Associativity failure in the table (quasigroup, not a group).
  std::vector<std::vector<int>> loop = {{0, 1, 2, 3, 4},
                                        {1, 0, 3, 4, 2},
                                        {2, 4, 0, 1, 3},
                                        {3, 2, 4, 0, 1},
                                        {4, 3, 1, 2, 0}};
  std::vector<int> loop_inv = {0, 1, 2, 3, 4};
  CHECK_THROWS_AS(group_algebra(loop, loop_inv), Error);
}

TEST_CASE("cyclic algebra edge cases") {
  auto A1 = cyclic_algebra(1);
  CHECK(A1->dim == 1);
  CHECK(element_norm(*A1, A1->unit) == 1.0);
  Element sq = multiply(*A1, A1->unit, A1->unit);
  CHECK(sq(0) == 1.0);
  CHECK_THROWS_AS(cyclic_algebra(0), Error);
  CHECK_THROWS_AS(cyclic_algebra(-3), Error);
}

TEST_CASE("matrix algebra multiplies matrix units correctly") {
  auto A = matrix_algebra(2);
  REQUIRE(A->dim == 4);
  CHECK(A->matrix_n == 2);
  auto unit_idx = [](int i, int j) { return i * 2 + j; };
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          Element p = multiply(*A, basis(4, unit_idx(i, j)),
                               basis(4, unit_idx(k, l)));
          Element expect = Element::Zero(4);
          if (j == k) expect(unit_idx(i, l)) = 1.0;
          CHECK((p - expect).lpNorm<Eigen::Infinity>() == 0.0);
        }
  // every matrix unit has spectral norm 1; the identity too
  for (int f = 0; f < 4; ++f) CHECK(element_norm(*A, basis(4, f)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(element_norm(*A, A->unit) == 1.0);
}

TEST_CASE("pointwise algebra is the diagonal product under the sup norm") {
  auto A = pointwise_algebra(3);
  REQUIRE(A->dim == 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Element p = multiply(*A, basis(3, i), basis(3, j));
      Element expect = Element::Zero(3);
      if (i == j) expect(i) = 1.0;
      CHECK((p - expect).lpNorm<Eigen::Infinity>() == 0.0);
    }
  CHECK(element_norm(*A, A->unit) == 1.0);
  CHECK(std::holds_alternative<LInf>(A->norm));
}
