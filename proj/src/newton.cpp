#include "stablab/newton.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <utility>

#include "stablab/rng.hpp"

namespace stablab {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require_dims(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::DimensionMismatch, what);
}

void check_unital_pair(const Instance& inst) {
  const Algebra& B = *inst.B;
  const double tol = 1e-12;
  const Element t_unit = inst.T.matrix * inst.A->unit;
  if (element_norm(B, t_unit - B.unit) > tol)
    throw Error(ErrorKind::NonUnitalInput,
                "theorem hypotheses need T(1) = 1 within 1e-12");
  for (int q = 0; q < B.dim; ++q) {
    Element eq = Element::Zero(B.dim);
    eq(q) = 1.0;
    if (element_norm(B, apply_bilinear(inst.psi, B.unit, eq) - eq) > tol ||
        element_norm(B, apply_bilinear(inst.psi, eq, B.unit) - eq) > tol)
      throw Error(ErrorKind::NonUnitalInput,
                  "theorem hypotheses need Ψ(1,u) = Ψ(u,1) = u within 1e-12");
  }
}

/// x ↦ Σ_j Ψ(T_mat(a_j), R(b_j, x)) over the diagonal's summands.
Eigen::MatrixXd correction_matrix(const Instance& inst,
                                  const Eigen::MatrixXd& t_mat,
                                  const BilinearMap& R) {
  const int da = inst.A->dim;
  const int db = inst.B->dim;
  require_dims(R.tensor.rank() == 3 && R.tensor.shape(0) == db &&
                   R.tensor.shape(1) == da && R.tensor.shape(2) == da,
               "correction: R must be an A×A→B cochain");
  const double* pdata = inst.psi.tensor.data();
  const double* rdata = R.tensor.data();

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(db, da);
  Eigen::MatrixXd left_mult(db, db);  // rows: (T a_j)ᵀ · Ψ_o
  Eigen::MatrixXd r_slice(db, da);    // rows: b_jᵀ · R_o
  for (const auto& [a, b] : inst.diagonal.rep.pairs) {
    const Element ta = t_mat * a;
    for (int o = 0; o < db; ++o) {
      ConstRowMap po(pdata + static_cast<std::size_t>(o) * db * db, db, db);
      left_mult.row(o) = ta.transpose() * po;
      ConstRowMap ro(rdata + static_cast<std::size_t>(o) * da * da, da, da);
      r_slice.row(o) = b.transpose() * ro;
    }
    J.noalias() += left_mult * r_slice;
  }
  return J;
}

double op_norm(const Instance& inst, const Eigen::MatrixXd& m) {
  return multilinear_norm(LinearOp{m, inst.A, inst.B}, inst.norm_opts).value;
}

NormEstimate defect_at(const Instance& inst, const Eigen::MatrixXd& t_mat) {
  return mdef(LinearOp{t_mat, inst.A, inst.B}, inst.psi, inst.norm_opts);
}

}  // namespace

Instance make_instance(AlgebraPtr A, AlgebraPtr B, DiagonalRep diagonal,
                       BilinearMap psi, LinearOp T, bool theorem_hypotheses,
                       const NormOptions& norm_opts) {
  const int da = A->dim;
  const int db = B->dim;
  require_dims(T.matrix.rows() == db && T.matrix.cols() == da,
               "make_instance: T must map A into B");
  require_dims(psi.tensor.rank() == 3 && psi.tensor.shape(0) == db &&
                   psi.tensor.shape(1) == db && psi.tensor.shape(2) == db,
               "make_instance: Ψ must be B×B→B");
  require_dims(!diagonal.rep.pairs.empty() &&
                   diagonal.rep.pairs.front().first.size() == da,
               "make_instance: diagonal lives in A⊗A");

  Instance inst;
  inst.A = std::move(A);
  inst.B = std::move(B);
  inst.diagonal = std::move(diagonal);
  inst.psi = std::move(psi);
  inst.T = std::move(T);
  inst.theorem_hypotheses = theorem_hypotheses;
  inst.norm_opts = norm_opts;
  if (theorem_hypotheses) check_unital_pair(inst);

  inst.norm_T = multilinear_norm(inst.T, norm_opts);
  inst.norm_psi = multilinear_norm(inst.psi, norm_opts);
  inst.K = std::max(1.0, inst.norm_T.value);
  inst.L = std::max(1.0, inst.norm_psi.value);
  inst.M = std::max(1.0, inst.diagonal.M);
  return inst;
}

LinearOp j_apply(const Instance& inst, const BilinearMap& R) {
  return LinearOp{correction_matrix(inst, inst.T.matrix, R), inst.A, inst.B};
}

LinearOp improve(const Instance& inst) {
  const BilinearMap defect = vee(inst.T, inst.psi);
  Eigen::MatrixXd m =
      inst.T.matrix + correction_matrix(inst, inst.T.matrix, defect);
  return LinearOp{std::move(m), inst.A, inst.B};
}

Constants constants(double L, double K_bound, double M) {
  const double k2 = K_bound * K_bound;
  Constants c;
  c.c1 = L * L * L * k2 * M * M + 2.0 * L * M;
  c.c2 = k2 * M;
  c.c3 = L * k2 * k2 * M;
  return c;
}

double delta_threshold(double K, double L, double M, double theta,
                       double epsilon) {
  if (!(K >= 1.0) || !(L >= 1.0) || !(M >= 1.0))
    throw Error(ErrorKind::DomainError,
                "delta_threshold needs K, L, M ≥ 1");
  if (!(theta > 0.0) || !(theta < 1.0) || !(epsilon > 0.0) ||
      !(epsilon < 1.0))
    throw Error(ErrorKind::DomainError,
                "delta_threshold needs θ, ε in (0,1)");
  const double lm = L * M;
  const double k2 = K * K;
  const double base = 2.0 * (2.0 * lm +
                             std::exp(4.0 * lm) * (L * L * L * M * M + M) * k2 +
                             std::exp(8.0 * lm) * lm * k2 * k2);
  return std::pow(base, -1.0 / theta) * epsilon;
}

double theta_from_eta(double eta) {
  if (!(eta > 0.0) || !(eta < 1.0))
    throw Error(ErrorKind::DomainError, "theta_from_eta needs η in (0,1)");
  return std::min(0.5 * eta / (1.0 - eta), 0.99);
}

ScheduleStep schedule(double delta, double theta, double L, double M, double K,
                      int n) {
  if (n < 0) throw Error(ErrorKind::DomainError, "schedule: n must be ≥ 0");
  if (!(delta > 0.0) || !(theta > 0.0))
    throw Error(ErrorKind::DomainError, "schedule: need δ > 0 and θ > 0");
  double omega = 0.0;
  double beta = 1.0;
  for (int j = 0; j < n; ++j) {
    const double delta_j = std::exp2(-omega) * delta;
    beta *= 1.0 + L * M * delta_j;
    omega = 1.0 + (1.0 + theta) * omega;
  }
  const double cap = std::exp(2.0 * L * M);
  if (beta > cap * (1.0 + 1e-12))
    throw Error(ErrorKind::DomainError,
                "schedule: growth certificate β_n ≤ e^{2LM} fails (δ > 1?)");
  ScheduleStep s;
  s.omega = omega;
  s.delta_n = std::exp2(-omega) * delta;
  s.beta_n = beta;
  s.K_n = beta * K;
  return s;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::ExactSolution: return "ExactSolution";
    case Outcome::TerminatedAtN: return "TerminatedAtN";
    case Outcome::BudgetExhausted: return "BudgetExhausted";
    case Outcome::Diverged: return "Diverged";
  }
  return "?";
}

IterationTrace stabilize(const Instance& inst, const IterationConfig& config) {
  if (config.eta.has_value() == config.theta.has_value())
    throw Error(ErrorKind::DomainError,
                "iteration config: set exactly one of eta and theta");
  const double theta =
      config.theta ? *config.theta : theta_from_eta(*config.eta);
  if (!(theta > 0.0) || !(theta < 1.0))
    throw Error(ErrorKind::DomainError, "iteration config: θ must be in (0,1)");
  if (!(config.epsilon > 0.0) || !(config.epsilon < 1.0))
    throw Error(ErrorKind::DomainError,
                "iteration config: ε must be in (0,1)");
  if (config.max_iters < 0 || !(config.abs_tol > 0.0) ||
      !(config.divergence_factor > 1.0))
    throw Error(ErrorKind::DomainError, "iteration config: bad limits");

  IterationTrace trace;
  trace.theta = theta;
  trace.epsilon = config.epsilon;

  const NormEstimate alpha = adef(inst.psi, inst.norm_opts);
  trace.alpha = alpha.value;
  trace.alpha_exact = alpha.exact;
  trace.delta =
      delta_threshold(inst.K, inst.L, inst.M, theta, config.epsilon);
  trace.endgame_bound = 2.0 * trace.delta *
                        std::exp(2.0 * inst.L * inst.M) * inst.K * inst.L *
                        inst.M;

  Eigen::MatrixXd t_cur = inst.T.matrix;
  NormEstimate mdef_cur = defect_at(inst, t_cur);
  trace.hypothesis_satisfied = mdef_cur.value <= trace.delta;
  if (inst.theorem_hypotheses && !trace.hypothesis_satisfied)
    std::fprintf(stderr,
                 "warning: starting defect %.17g exceeds threshold %.17g; "
                 "the convergence certificate does not apply\n",
                 mdef_cur.value, trace.delta);

  double prop34_prev = std::numeric_limits<double>::quiet_NaN();
  for (int n = 0;; ++n) {
    const ScheduleStep sched =
        schedule(trace.delta, theta, inst.L, inst.M, inst.K, n);
    const BilinearMap defect = vee(LinearOp{t_cur, inst.A, inst.B}, inst.psi);
    const Eigen::MatrixXd corr = correction_matrix(inst, t_cur, defect);

    StepRecord rec;
    rec.n = n;
    rec.mdef_n = mdef_cur;
    rec.op_norm_n = op_norm(inst, t_cur);
    rec.correction_norm = op_norm(inst, corr);
    rec.omega_n = sched.omega;
    rec.delta_n = sched.delta_n;
    rec.beta_n = sched.beta_n;
    rec.K_n = sched.K_n;
    rec.claim_ii_ok = mdef_cur.value <= sched.delta_n;
    rec.claim_iii_ok = rec.op_norm_n <= sched.K_n;
    rec.adef_threshold_crossed =
        alpha.value > std::pow(mdef_cur.value, 1.0 + theta);
    rec.prop34_lhs = mdef_cur.value;
    rec.prop34_bound = prop34_prev;
    trace.steps.push_back(rec);

    if (rec.adef_threshold_crossed) {
      trace.outcome = Outcome::TerminatedAtN;
      trace.N = n;
      break;
    }
    if (mdef_cur.value <= config.abs_tol) {
      trace.outcome = Outcome::ExactSolution;
      break;
    }
    if (n == config.max_iters) {
      trace.outcome = Outcome::BudgetExhausted;
      break;
    }

    // Bound on the next defect, from this step's actual norms.
    const Constants c =
        constants(inst.norm_psi.value, rec.op_norm_n, inst.diagonal.M);
    prop34_prev = c.c1 * mdef_cur.value * mdef_cur.value +
                  c.c2 * alpha.value * mdef_cur.value + c.c3 * alpha.value;

    const Eigen::MatrixXd t_next = t_cur + corr;
    const NormEstimate mdef_next = defect_at(inst, t_next);
    if (mdef_next.value >
        config.divergence_factor * std::max(mdef_cur.value, sched.delta_n)) {
      trace.outcome = Outcome::Diverged;
      break;  // keep t_cur: the last operator before the blow-up
    }
    t_cur = t_next;
    mdef_cur = mdef_next;
  }

  trace.final_op = LinearOp{t_cur, inst.A, inst.B};
  trace.distance_to_start = op_norm(inst, t_cur - inst.T.matrix);
  return trace;
}

BoundReport verify_bounds(const Instance& inst, std::uint64_t seed) {
  const int da = inst.A->dim;
  const int db = inst.B->dim;
  const double norm_t = inst.norm_T.value;
  const double norm_psi = inst.norm_psi.value;
  const double m_diag = inst.diagonal.M;
  const NormEstimate alpha = adef(inst.psi, inst.norm_opts);
  const BilinearMap defect = vee(inst.T, inst.psi);
  const double mdef_t = multilinear_norm(defect, inst.norm_opts).value;

  BoundReport report;
  auto add = [&report](std::string name, double lhs, double rhs) {
    report.checks.push_back(BoundCheck{std::move(name), lhs, rhs, rhs - lhs});
  };

  // ‖δ²_T T^∨‖ ≤ adef(Ψ)·‖T‖³ (an exact identity makes the left side a
  // triple-Ψ expression).
  {
    const TrilinearMap d2 = delta2(inst.T, inst.psi, defect);
    const double lhs = multilinear_norm(d2, inst.norm_opts).value;
    add("delta2_defect", lhs, alpha.value * norm_t * norm_t * norm_t);
  }

  // ‖(T+H)^∨ − T^∨ − 𝖣H‖ ≤ ‖Ψ‖·‖H‖² for a seeded random perturbation H.
  {
    Rng rng(mix64(seed) ^ 0x70657274757262ull);
    Eigen::MatrixXd hm(db, da);
    for (int o = 0; o < db; ++o)
      for (int i = 0; i < da; ++i) hm(o, i) = rng.uniform_pm1();
    const LinearOp H{hm, inst.A, inst.B};
    const double norm_h = multilinear_norm(H, inst.norm_opts).value;
    const LinearOp TH{inst.T.matrix + hm, inst.A, inst.B};
    BilinearMap resid = vee(TH, inst.psi);
    const BilinearMap dh = derivative_apply(inst.T, inst.psi, H);
    for (std::size_t f = 0; f < resid.tensor.size(); ++f)
      resid.tensor[f] -=
          defect.tensor[f] + dh.tensor[f];
    const double lhs = multilinear_norm(resid, inst.norm_opts).value;
    add("derivative_remainder", lhs, norm_psi * norm_h * norm_h);
  }

  // ‖R + 𝖣𝖩R‖ against the approximate-inverse estimate, for a seeded
  // random 2-cochain R and for R = T^∨ itself.
  const auto inverse_check = [&](const char* name, const BilinearMap& R,
                                 double rhs_override) {
    const LinearOp JR = j_apply(inst, R);
    const BilinearMap djr = derivative_apply(inst.T, inst.psi, JR);
    BilinearMap sum = R;
    for (std::size_t f = 0; f < sum.tensor.size(); ++f)
      sum.tensor[f] += djr.tensor[f];
    const double lhs = multilinear_norm(sum, inst.norm_opts).value;
    add(name, lhs, rhs_override);
  };
  {
    Rng rng(mix64(seed) ^ 0x636f636861696eull);
    DenseTensor rt({db, da, da});
    for (std::size_t f = 0; f < rt.size(); ++f) rt[f] = rng.uniform_pm1();
    const BilinearMap R{std::move(rt), inst.A, inst.A, inst.B};
    const double norm_r = multilinear_norm(R, inst.norm_opts).value;
    const double d2r =
        multilinear_norm(delta2(inst.T, inst.psi, R), inst.norm_opts).value;
    const double rhs = (2.0 * mdef_t * norm_psi * norm_r +
                        norm_psi * norm_t * d2r +
                        alpha.value * norm_t * norm_t * norm_r) *
                       m_diag;
    inverse_check("approximate_inverse", R, rhs);
  }
  {
    const double k2 = norm_t * norm_t;
    const double rhs = (2.0 * mdef_t * mdef_t * norm_psi +
                        alpha.value * mdef_t * k2 +
                        alpha.value * norm_psi * k2 * k2) *
                       m_diag;
    inverse_check("approximate_inverse_at_defect", defect, rhs);
  }

  // Defect of the improved operator against the quadratic-contraction bound.
  {
    const LinearOp F = improve(inst);
    const double lhs = mdef(F, inst.psi, inst.norm_opts).value;
    const Constants c = constants(norm_psi, norm_t, m_diag);
    add("improved_defect", lhs,
        c.c1 * mdef_t * mdef_t + c.c2 * alpha.value * mdef_t +
            c.c3 * alpha.value);
  }

  // ‖𝖩T^∨‖ ≤ mdef(T)·‖Ψ‖·‖T‖·M.
  {
    const LinearOp JT = j_apply(inst, defect);
    const double lhs = multilinear_norm(JT, inst.norm_opts).value;
    add("correction_norm", lhs, mdef_t * norm_psi * norm_t * m_diag);
  }
  return report;
}

}  // namespace stablab
