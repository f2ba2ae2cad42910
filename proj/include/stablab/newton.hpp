#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stablab/defects.hpp"
#include "stablab/tensor.hpp"

namespace stablab {

/// A stabilization problem: domain algebra A with a validated diagonal,
/// codomain B, candidate product Ψ on B, and the operator T to improve.
/// K, L, M are the constants fed to the threshold/schedule formulas —
/// cached norms clamped up to 1 as the underlying estimates require.
struct Instance {
  AlgebraPtr A;
  AlgebraPtr B;
  DiagonalRep diagonal;
  BilinearMap psi;
  LinearOp T;
  bool theorem_hypotheses = true;  ///< enforce Ψ/T unitality at 1e-12
  NormOptions norm_opts;

  NormEstimate norm_T;    ///< ‖T‖
  NormEstimate norm_psi;  ///< ‖Ψ‖
  double K = 1.0;         ///< max(1, ‖T‖)
  double L = 1.0;         ///< max(1, ‖Ψ‖)
  double M = 1.0;         ///< max(1, diagonal.M)
};

/// Builds an Instance, computing the cached norms and (when
/// theorem_hypotheses) checking Ψ(1,u) = Ψ(u,1) = u and T(1) = 1 within
/// 1e-12 (NonUnitalInput otherwise).
Instance make_instance(AlgebraPtr A, AlgebraPtr B, DiagonalRep diagonal,
                       BilinearMap psi, LinearOp T,
                       bool theorem_hypotheses = true,
                       const NormOptions& norm_opts = {});

/// Correction operator: x ↦ Σ_j Ψ(T(a_j), R(b_j, x)) summed over the
/// diagonal's pairs.
LinearOp j_apply(const Instance& inst, const BilinearMap& R);

/// Improving operator 𝓕T = T + 𝖩T^∨.
LinearOp improve(const Instance& inst);

struct Constants {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

/// C₁ = L³K²M² + 2LM, C₂ = K²M, C₃ = LK⁴M with L = ‖Ψ‖, K = ‖T‖.
Constants constants(double L, double K_bound, double M);

/// δ = [2(2LM + e^{4LM}(L³M² + M)K² + e^{8LM}LMK⁴)]^{−1/θ}·ε.
/// Requires K, L, M ≥ 1 and θ, ε ∈ (0,1).
double delta_threshold(double K, double L, double M, double theta,
                       double epsilon);

/// θ = min(0.5·η/(1−η), 0.99); always satisfies (1+θ)^{−1} > 1−η.
double theta_from_eta(double eta);

struct ScheduleStep {
  double omega = 0.0;
  double delta_n = 0.0;
  double beta_n = 1.0;
  double K_n = 0.0;
};

/// ω₀ = 0, ω_n = 1+(1+θ)ω_{n−1}; δ_n = 2^{−ω_n}δ; β_n = Π_{j<n}(1+LMδ_j);
/// K_n = β_n·K.  Checks β_n ≤ e^{2LM} (needs δ ≤ 1).
ScheduleStep schedule(double delta, double theta, double L, double M, double K,
                      int n);

struct IterationConfig {
  std::optional<double> eta;    // exactly one of eta/theta
  std::optional<double> theta;
  double epsilon = 0.5;
  double abs_tol = 1e-13;
  int max_iters = 64;
  double divergence_factor = 10.0;
};

enum class Outcome { ExactSolution, TerminatedAtN, BudgetExhausted, Diverged };

const char* to_string(Outcome o);

struct StepRecord {
  int n = 0;
  NormEstimate mdef_n;
  double op_norm_n = 0.0;
  double correction_norm = 0.0;  ///< ‖𝖩T_n^∨‖
  double omega_n = 0.0;
  double delta_n = 0.0;
  double beta_n = 1.0;
  double K_n = 0.0;
  bool claim_ii_ok = false;   ///< mdef(T_n) ≤ δ_n
  bool claim_iii_ok = false;  ///< ‖T_n‖ ≤ K_n
  bool adef_threshold_crossed = false;  ///< α > mdef(T_n)^{1+θ}
  double prop34_lhs = 0.0;    ///< mdef(T_n); NaN-free
  double prop34_bound = 0.0;  ///< C₁mdef² + C₂αmdef + C₃α at step n−1 (NaN at n=0)
};

struct IterationTrace {
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::BudgetExhausted;
  int N = -1;  ///< set for TerminatedAtN
  LinearOp final_op;
  double distance_to_start = 0.0;  ///< ‖T_final − T₀‖, exact when possible
  double endgame_bound = 0.0;      ///< 2δe^{2LM}KLM
  double alpha = 0.0;              ///< adef(Ψ)
  bool alpha_exact = false;
  double delta = 0.0;
  double theta = 0.0;
  double epsilon = 0.0;
  bool hypothesis_satisfied = false;  ///< mdef(T₀) ≤ δ
};

/// Iterates T_{n+1} = 𝓕T_n with the proof's schedule bookkeeping until the
/// defect-vs-α termination rule fires, the defect hits abs_tol, the step
/// budget runs out, or the defect blows up past the divergence guard.
IterationTrace stabilize(const Instance& inst, const IterationConfig& config);

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  ///< rhs − lhs; ≥ −1e-10 expected under hypotheses
};

struct BoundReport {
  std::vector<BoundCheck> checks;
};

/// Evaluates each proved inequality of the stabilization analysis on this
/// instance: both sides from definitions, margins reported.  `seed` drives
/// the auxiliary random maps (the R of the approximate-inverse bound, the
/// H of the remainder bound).
BoundReport verify_bounds(const Instance& inst, std::uint64_t seed = 0);

}  // namespace stablab
