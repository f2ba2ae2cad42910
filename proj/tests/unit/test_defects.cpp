#include <doctest.h>

#include <Eigen/Core>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "stablab/defects.hpp"
#include "stablab/errors.hpp"
#include "stablab/maps.hpp"
#include "stablab/rng.hpp"

using namespace stablab;

namespace {

Element basis(int dim, int i) {
  Element e = Element::Zero(dim);
  e(i) = 1.0;
  return e;
}

LinearOp diag_op(const AlgebraPtr& A, std::initializer_list<double> entries) {
  Eigen::VectorXd d(static_cast<int>(entries.size()));
  int i = 0;
  for (double v : entries) d(i++) = v;
  return LinearOp{Eigen::MatrixXd(d.asDiagonal()), A, A};
}

// Z_2 convolution deformed with an asymmetric ε·u₁v₀·e_1 term; genuinely
// non-associative for ε ≠ 0, unlike the symmetric u₁v₁ deformation (which
// stays a commutative polynomial algebra).
BilinearMap asymmetric_deformation(const AlgebraPtr& Z2, double eps) {
  BilinearMap psi = multiplication_map(Z2);
  psi.tensor(1, 1, 0) += eps;
  return psi;
}

BilinearMap random_bilinear(const AlgebraPtr& dom, const AlgebraPtr& cod,
                            Rng& rng, double amplitude = 1.0) {
  BilinearMap phi = zero_bilinear(dom, cod);
  for (std::size_t f = 0; f < phi.tensor.size(); ++f)
    phi.tensor[f] = amplitude * rng.uniform_pm1();
  return phi;
}

LinearOp random_op(const AlgebraPtr& dom, const AlgebraPtr& cod, Rng& rng,
                   double amplitude = 1.0) {
  LinearOp T = zero_op(dom, cod);
  for (int r = 0; r < T.matrix.rows(); ++r)
    for (int c = 0; c < T.matrix.cols(); ++c)
      T.matrix(r, c) = amplitude * rng.uniform_pm1();
  return T;
}

double tensor_sup(const DenseTensor& t) {
  double m = 0.0;
  for (std::size_t f = 0; f < t.size(); ++f) m = std::max(m, std::abs(t[f]));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// vee
// ---------------------------------------------------------------------------

TEST_CASE("vee of a homomorphism vanishes identically") {
  auto A = cyclic_algebra(6);
  BilinearMap v = vee(identity_op(A), multiplication_map(A));
  CHECK(tensor_sup(v.tensor) == 0.0);
}

TEST_CASE("vee of the zero operator vanishes identically") {
  auto A = cyclic_algebra(3);
  BilinearMap v = vee(zero_op(A, A), multiplication_map(A));
  CHECK(tensor_sup(v.tensor) == 0.0);
}

TEST_CASE("vee of the diagonal scaling on Z_2 concentrates at (e_1,e_1)") {
  const double s = 0.01;
  auto A = cyclic_algebra(2);
  LinearOp T = diag_op(A, {1.0, 1.0 + s});
  BilinearMap v = vee(T, multiplication_map(A));
  // T(e_1 e_1) − T(e_1)T(e_1) = (1 − (1+s)²) e_0
  Element at11 = apply_bilinear(v, basis(2, 1), basis(2, 1));
  CHECK(at11(0) == -((1.0 + s) * (1.0 + s) - 1.0));
  CHECK(at11(1) == 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (i == 1 && j == 1) continue;
      Element z = apply_bilinear(v, basis(2, i), basis(2, j));
      CHECK(z.lpNorm<Eigen::Infinity>() == 0.0);
    }
}

// ---------------------------------------------------------------------------
// multilinear_norm: exact path
// ---------------------------------------------------------------------------

TEST_CASE("norm of the convolution product is exactly one") {
  auto A = cyclic_algebra(6);
  NormEstimate n = multilinear_norm(multiplication_map(A));
  CHECK(n.exact);
  CHECK(n.value == 1.0);
  REQUIRE(n.witness.size() == 2);
  // the witness pair certifies the value
  Element out = apply_bilinear(multiplication_map(A), n.witness[0],
                               n.witness[1]);
  CHECK(element_norm(*A, out) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("norm of the zero map is zero") {
  auto A = cyclic_algebra(4);
  NormEstimate n = multilinear_norm(zero_bilinear(A, A));
  CHECK(n.exact);
  CHECK(n.value == 0.0);
}

TEST_CASE("multiplicative defect of the Z_2 diagonal scaling is exact") {
  const double s = 0.01;
  auto A = cyclic_algebra(2);
  LinearOp T = diag_op(A, {1.0, 1.0 + s});
  NormEstimate n = mdef(T, multiplication_map(A));
  CHECK(n.exact);
  CHECK(n.value == (1.0 + s) * (1.0 + s) - 1.0);
  NormEstimate tn = multilinear_norm(T);
  CHECK(tn.exact);
  CHECK(tn.value == 1.0 + s);
}

TEST_CASE("exact norm dominates dense random sampling") {
  Rng seeds(2024);
  for (int inst = 0; inst < 10; ++inst) {
    int d1 = 2 + seeds.uniform_int(3);
    int d2 = 2 + seeds.uniform_int(3);
    auto dom1 = cyclic_algebra(d1);
    auto dom2 = cyclic_algebra(d2);
    auto cod = cyclic_algebra(3);
    BilinearMap phi{DenseTensor({3, d1, d2}), dom1, dom2, cod};
    for (std::size_t f = 0; f < phi.tensor.size(); ++f)
      phi.tensor[f] = seeds.uniform_pm1();
    NormEstimate n = multilinear_norm(phi);
    REQUIRE(n.exact);
    Rng rng(500 + inst);
    double sampled = 0.0;
    for (int s = 0; s < 100'000; ++s) {
      Element x = random_unit_vector(dom1->norm, rng);
      Element y = random_unit_vector(dom2->norm, rng);
      sampled = std::max(sampled,
                         element_norm(*cod, apply_bilinear(phi, x, y)));
    }
    CHECK(sampled <= n.value * (1.0 + 1e-12));
    CHECK(sampled >= 0.5 * n.value);  // sanity: sampling is not degenerate
  }
}

TEST_CASE("enumeration refuses spectral arguments in exact mode") {
  auto M2 = matrix_algebra(2);
  NormOptions opts;
  opts.mode = NormMode::Exact;
  try {
    multilinear_norm(multiplication_map(M2), opts);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
  }
  // Auto mode falls back to the ascent estimator instead
  NormEstimate est = multilinear_norm(multiplication_map(M2));
  CHECK(!est.exact);
  CHECK(est.value <= 1.0 + 1e-10);
  CHECK(est.value >= 0.999);
}

TEST_CASE("tiny budgets force the estimator unless exactness was demanded") {
  auto A = cyclic_algebra(6);
  NormOptions opts;
  opts.budget = 10;  // grid is 12 × 12 = 144 > 10
  NormEstimate est = multilinear_norm(multiplication_map(A), opts);
  CHECK(!est.exact);
  CHECK(est.value == doctest::Approx(1.0).epsilon(1e-12));
  opts.mode = NormMode::Exact;
  CHECK_THROWS_AS(multilinear_norm(multiplication_map(A), opts), Error);
}

TEST_CASE("ascent estimator is sound and nearly sharp on small instances") {
  Rng seeds(909);
  int sharp = 0;
  const int total = 200;
  for (int inst = 0; inst < total; ++inst) {
    int d1 = 1 + seeds.uniform_int(4);
    int d2 = 1 + seeds.uniform_int(4);
    auto dom1 = cyclic_algebra(d1);
    auto dom2 = cyclic_algebra(d2);
    auto cod = cyclic_algebra(2);
    BilinearMap phi{DenseTensor({2, d1, d2}), dom1, dom2, cod};
    for (std::size_t f = 0; f < phi.tensor.size(); ++f)
      phi.tensor[f] = seeds.uniform_pm1();

    NormOptions exact_opts;
    exact_opts.mode = NormMode::Exact;
    NormEstimate exact = multilinear_norm(phi, exact_opts);
    REQUIRE(exact.exact);

    NormOptions est_opts;
    est_opts.mode = NormMode::Estimate;
    est_opts.seed = 7000 + inst;
    NormEstimate est = multilinear_norm(phi, est_opts);
    CHECK(!est.exact);
    CHECK(est.value <= exact.value * (1.0 + 1e-12) + 1e-15);
    if (est.value >= 0.999 * exact.value) ++sharp;

    // the reported witness attains the reported value
    REQUIRE(est.witness.size() == 2);
    double attained = element_norm(
        *cod, apply_bilinear(phi, est.witness[0], est.witness[1]));
    CHECK(attained == doctest::Approx(est.value).epsilon(1e-10));
  }
  CHECK(sharp >= 190);  // ≥ 95 %
}

TEST_CASE("norm computations are deterministic under thread splitting") {
  // 2^12 LInf vertices × 4 L1 vertices = 16384 grid points: large enough to
  // take the chunked path when more than one worker is allowed.
  auto left = pointwise_algebra(12);
  auto right = cyclic_algebra(2);
  Rng rng(11);
  BilinearMap phi{DenseTensor({2, 12, 2}), left, right, right};
  for (std::size_t f = 0; f < phi.tensor.size(); ++f)
    phi.tensor[f] = rng.uniform_pm1();
  setenv("STABLAB_THREADS", "1", 1);
  NormEstimate serial = multilinear_norm(phi);
  setenv("STABLAB_THREADS", "3", 1);
  NormEstimate threaded = multilinear_norm(phi);
  unsetenv("STABLAB_THREADS");
  REQUIRE(serial.exact);
  REQUIRE(threaded.exact);
  CHECK(serial.value == threaded.value);
  REQUIRE(serial.witness.size() == threaded.witness.size());
  for (std::size_t s = 0; s < serial.witness.size(); ++s)
    CHECK((serial.witness[s] - threaded.witness[s])
              .lpNorm<Eigen::Infinity>() == 0.0);
  // and the estimator is reproducible call-to-call
  NormOptions est_opts;
  est_opts.mode = NormMode::Estimate;
  est_opts.seed = 99;
  NormEstimate e1 = multilinear_norm(phi, est_opts);
  NormEstimate e2 = multilinear_norm(phi, est_opts);
  CHECK(e1.value == e2.value);
}

// ---------------------------------------------------------------------------
// adef
// ---------------------------------------------------------------------------

TEST_CASE("associative defect of built-in products is zero") {
  CHECK(adef(multiplication_map(cyclic_algebra(6))).value == 0.0);
  NormEstimate m2 = adef(multiplication_map(matrix_algebra(2)));
  CHECK(!m2.exact);  // spectral ball → ascent estimate
  CHECK(m2.value == 0.0);
}

TEST_CASE("associative defect matches a brute-force vertex search") {
  auto Z2 = cyclic_algebra(2);
  const double eps = 1e-3;
  BilinearMap psi = asymmetric_deformation(Z2, eps);
  // independent oracle: evaluate the associator at all 4³ signed basis
  // triples directly through apply_bilinear
  std::vector<Element> verts;
  for (int i = 0; i < 2; ++i) {
    verts.push_back(basis(2, i));
    verts.push_back(-basis(2, i));
  }
  double brute = 0.0;
  for (const auto& u : verts)
    for (const auto& v : verts)
      for (const auto& w : verts) {
        Element lhs = apply_bilinear(psi, u, apply_bilinear(psi, v, w));
        Element rhs = apply_bilinear(psi, apply_bilinear(psi, u, v), w);
        brute = std::max(brute, (lhs - rhs).cwiseAbs().sum());
      }
  NormEstimate a = adef(psi);
  REQUIRE(a.exact);
  CHECK(a.value == doctest::Approx(brute).epsilon(1e-14));
  CHECK(a.value == doctest::Approx(eps * (1.0 + eps)).epsilon(1e-12));
}

TEST_CASE("associative defect scales linearly in the deformation size") {
  auto Z2 = cyclic_algebra(2);
  double r4 = adef(asymmetric_deformation(Z2, 1e-4)).value / 1e-4;
  double r6 = adef(asymmetric_deformation(Z2, 1e-6)).value / 1e-6;
  CHECK(std::abs(r4 / r6 - 1.0) <= 2e-4);
}

TEST_CASE("associator tensor agrees with pointwise evaluation") {
  auto Z3 = cyclic_algebra(3);
  BilinearMap psi = multiplication_map(Z3);
  Rng rng(42);
  for (std::size_t f = 0; f < psi.tensor.size(); ++f)
    psi.tensor[f] += 0.05 * rng.uniform_pm1();
  TrilinearMap assoc = associator_map(psi);
  for (int trial = 0; trial < 50; ++trial) {
    Element u(3), v(3), w(3);
    for (int i = 0; i < 3; ++i) {
      u(i) = rng.uniform_pm1();
      v(i) = rng.uniform_pm1();
      w(i) = rng.uniform_pm1();
    }
    Element direct = apply_bilinear(psi, u, apply_bilinear(psi, v, w)) -
                     apply_bilinear(psi, apply_bilinear(psi, u, v), w);
    Element via_tensor = apply_trilinear(assoc, u, v, w);
    CHECK((direct - via_tensor).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("trilinear workflows refuse dimensions beyond the cap") {
  auto big = pointwise_algebra(13);
  CHECK_THROWS_AS(associator_map(multiplication_map(big)), Error);
  try {
    delta2(identity_op(big), multiplication_map(big),
           multiplication_map(big));
    FAIL("expected DomainError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DomainError);
  }
}

// ---------------------------------------------------------------------------
// coboundary ladder
// ---------------------------------------------------------------------------

TEST_CASE("degree-one coboundary of the identity map on Z_2") {
  auto A = cyclic_algebra(2);
  LinearOp id = identity_op(A);
  BilinearMap cob = coboundary(id, id);
  // φ(a)ψ(b) − ψ(ab) + ψ(a)φ(b) at (e_1, e_1): e_0 − e_0 + e_0 = e_0
  Element at11 = apply_bilinear(cob, basis(2, 1), basis(2, 1));
  CHECK(at11(0) == 1.0);
  CHECK(at11(1) == 0.0);
  // at (e_0, e_1): e_1 − e_1 + e_1 = e_1
  Element at01 = apply_bilinear(cob, basis(2, 0), basis(2, 1));
  CHECK(at01(0) == 0.0);
  CHECK(at01(1) == 1.0);
}

TEST_CASE("degree-zero coboundary measures failure to be central") {
  auto Z6 = cyclic_algebra(6);
  Rng rng(3);
  Element b(6);
  for (int i = 0; i < 6; ++i) b(i) = rng.uniform_pm1();
  LinearOp c = coboundary(identity_op(Z6), b);  // commutative → zero
  CHECK(c.matrix.cwiseAbs().maxCoeff() == 0.0);

  auto M2 = matrix_algebra(2);
  LinearOp nc = coboundary(identity_op(M2), basis(4, 1));  // b = e_{01}
  // a = e_{00}: e_{00}e_{01} − e_{01}e_{00} = e_{01}
  Element col = apply_linear(nc, basis(4, 0));
  CHECK((col - basis(4, 1)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("coboundary of the zero cochain is zero in every degree") {
  auto A = cyclic_algebra(3);
  LinearOp phi = identity_op(A);
  CHECK(tensor_sup(coboundary(phi, zero_op(A, A)).tensor) == 0.0);
  CHECK(tensor_sup(coboundary(phi, zero_bilinear(A, A)).tensor) == 0.0);
}

TEST_CASE("coboundary squares to zero along a homomorphism") {
  auto A = cyclic_algebra(5);
  LinearOp phi = identity_op(A);
  Rng rng(64);
  // degree 1 → 2 → 3
  LinearOp psi1 = random_op(A, A, rng);
  BilinearMap d1 = coboundary(phi, psi1);
  TrilinearMap d2d1 = coboundary(phi, d1);
  CHECK(tensor_sup(d2d1.tensor) <= 1e-12);
  // degree 2 → 3 → 4
  BilinearMap psi2 = random_bilinear(A, A, rng);
  TrilinearMap d2 = coboundary(phi, psi2);
  QuadlinearMap d3d2 = coboundary(phi, d2);
  CHECK(tensor_sup(d3d2.tensor) <= 1e-12);
}

TEST_CASE("the ladder stops above degree three") {
  auto A = cyclic_algebra(2);
  LinearOp phi = identity_op(A);
  QuadlinearMap q{DenseTensor({2, 2, 2, 2, 2}), {A, A, A, A}, A};
  try {
    coboundary(phi, q);
    FAIL("expected UnsupportedDegree");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedDegree);
  }
}

// ---------------------------------------------------------------------------
// delta2 and the derivative
// ---------------------------------------------------------------------------

TEST_CASE("twisted coboundary of zero is zero") {
  auto A = cyclic_algebra(4);
  TrilinearMap z = delta2(identity_op(A), multiplication_map(A),
                          zero_bilinear(A, A));
  CHECK(tensor_sup(z.tensor) == 0.0);
}

TEST_CASE("twisted coboundary of the defect reduces to the associator") {
  // δ²_T(T^∨)(x,y,z) = Ψ(Ψ(Tx,Ty),Tz) − Ψ(Tx,Ψ(Ty,Tz)) pointwise — the
  // cross terms cancel identically without any associativity assumption.
  auto A = cyclic_algebra(3);
  Rng rng(17);
  BilinearMap psi = multiplication_map(A);
  for (std::size_t f = 0; f < psi.tensor.size(); ++f)
    psi.tensor[f] += 0.1 * rng.uniform_pm1();
  LinearOp T = random_op(A, A, rng);
  TrilinearMap lhs = delta2(T, psi, vee(T, psi));
  for (int trial = 0; trial < 50; ++trial) {
    Element x(3), y(3), z(3);
    for (int i = 0; i < 3; ++i) {
      x(i) = rng.uniform_pm1();
      y(i) = rng.uniform_pm1();
      z(i) = rng.uniform_pm1();
    }
    Element tx = apply_linear(T, x), ty = apply_linear(T, y),
            tz = apply_linear(T, z);
    Element expect =
        apply_bilinear(psi, apply_bilinear(psi, tx, ty), tz) -
        apply_bilinear(psi, tx, apply_bilinear(psi, ty, tz));
    Element got = apply_trilinear(lhs, x, y, z);
    CHECK((got - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("defect of a homomorphism sits in the kernel of delta2") {
  auto A = cyclic_algebra(6);
  LinearOp T = identity_op(A);
  BilinearMap psi = multiplication_map(A);
  TrilinearMap k = delta2(T, psi, vee(T, psi));
  CHECK(tensor_sup(k.tensor) == 0.0);
}

TEST_CASE("defects nearly annihilate delta2 when the product nearly associates") {
  auto A = cyclic_algebra(3);
  Rng rng(23);
  for (int inst = 0; inst < 20; ++inst) {
    BilinearMap psi = multiplication_map(A);
    for (std::size_t f = 0; f < psi.tensor.size(); ++f)
      psi.tensor[f] += 0.05 * rng.uniform_pm1();
    LinearOp T = random_op(A, A, rng);
    double lhs = multilinear_norm(delta2(T, psi, vee(T, psi))).value;
    double a = adef(psi).value;
    double tn = multilinear_norm(T).value;
    CHECK(lhs <= a * tn * tn * tn + 1e-10);
  }
}

TEST_CASE("derivative at T annihilates the zero direction") {
  auto A = cyclic_algebra(4);
  BilinearMap d = derivative_apply(identity_op(A), multiplication_map(A),
                                   zero_op(A, A));
  CHECK(tensor_sup(d.tensor) == 0.0);
}

TEST_CASE("derivative is linear in the direction") {
  auto A = cyclic_algebra(3);
  Rng rng(51);
  BilinearMap psi = multiplication_map(A);
  LinearOp T = random_op(A, A, rng);
  LinearOp H1 = random_op(A, A, rng);
  LinearOp H2 = random_op(A, A, rng);
  BilinearMap lhs = derivative_apply(T, psi, add(H1, scale(2.5, H2)));
  BilinearMap rhs = add(derivative_apply(T, psi, H1),
                        scale(2.5, derivative_apply(T, psi, H2)));
  CHECK(tensor_sup(subtract(lhs, rhs).tensor) <= 1e-12);
}

TEST_CASE("expanding the defect of a perturbation leaves a quadratic remainder") {
  auto A = cyclic_algebra(3);
  Rng rng(88);
  BilinearMap psi = multiplication_map(A);
  for (std::size_t f = 0; f < psi.tensor.size(); ++f)
    psi.tensor[f] += 0.1 * rng.uniform_pm1();
  for (int inst = 0; inst < 20; ++inst) {
    LinearOp T = random_op(A, A, rng);
    LinearOp H = random_op(A, A, rng, 0.5);
    BilinearMap remainder = subtract(
        subtract(vee(add(T, H), psi), vee(T, psi)),
        derivative_apply(T, psi, H));
    // pointwise: remainder(x,y) = −Ψ(Hx, Hy)
    for (int trial = 0; trial < 10; ++trial) {
      Element x(3), y(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = rng.uniform_pm1();
        y(i) = rng.uniform_pm1();
      }
      Element expect = -apply_bilinear(psi, apply_linear(H, x),
                                       apply_linear(H, y));
      Element got = apply_bilinear(remainder, x, y);
      CHECK((got - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
    // in norm: ‖remainder‖ ≤ ‖Ψ‖‖H‖²
    double rn = multilinear_norm(remainder).value;
    double pn = multilinear_norm(psi).value;
    double hn = multilinear_norm(H).value;
    CHECK(rn <= pn * hn * hn * (1.0 + 1e-12) + 1e-12);
  }
}

TEST_CASE("finite differences confirm the derivative to second order") {
  auto A = cyclic_algebra(4);
  Rng rng(5150);
  BilinearMap psi = multiplication_map(A);
  LinearOp T = random_op(A, A, rng);
  LinearOp H = random_op(A, A, rng);
  double pn = multilinear_norm(psi).value;
  double hn = multilinear_norm(H).value;
  for (double h : {1e-2, 1e-4}) {
    BilinearMap diff = subtract(
        subtract(vee(add(T, scale(h, H)), psi), vee(T, psi)),
        scale(h, derivative_apply(T, psi, H)));
    double value = multilinear_norm(diff).value / h;
    CHECK(value <= pn * hn * hn * h * (1.0 + 1e-9) + 1e-15);
  }
}
