#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stablab/newton.hpp"

namespace stablab {

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// Ψ = mult_B + ε_ψ·Γ with Γ a seeded random bilinear tensor (entries
/// uniform in [−1,1]) rescaled to unit map-norm estimate.  With
/// preserve_unit, Γ is first projected so Γ(1,·) = Γ(·,1) = 0:
///   Γ'(x,y) = Γ(x,y) − (⟨u,x⟩/s)Γ(u,y) − (⟨u,y⟩/s)Γ(x,u)
///             + (⟨u,x⟩⟨u,y⟩/s²)Γ(u,u),   u = 1_B, s = ⟨u,u⟩,
/// which zeroes both unit slices exactly (bit-exactly when 1_B = e_0).
BilinearMap gen_perturbed_product(const AlgebraPtr& B, double epsilon_psi,
                                  bool preserve_unit, std::uint64_t seed);

/// T = base + ε_t·H with H seeded random of unit norm estimate; with
/// preserve_unit, H is first projected so H(1_A) = 0 (column projection
/// H ← H − (H·u)uᵀ/⟨u,u⟩).  Requires mdef(base, mult_B) ≤ 1e-12.
LinearOp gen_perturbed_hom(const AlgebraPtr& A, const AlgebraPtr& B,
                           const LinearOp& base, double epsilon_t,
                           bool preserve_unit, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Parsed experiment description; see docs/config.schema.json for the JSON
/// layout.  Kept as raw JSON plus resolved iteration/budget fields: algebra
/// and generator specs are interpreted lazily by build_instance so that
/// sweeps can override single fields.
struct ExperimentConfig {
  nlohmann::json algebra_domain;
  nlohmann::json algebra_codomain;
  nlohmann::json diagonal;  // "builtin" or explicit pairs
  nlohmann::json psi;
  nlohmann::json t_op;
  IterationConfig iteration;
  long long norm_budget = 1'000'000;
  std::uint64_t base_seed = 0;
  /// When set, forces the unitality hypotheses on/off; otherwise
  /// build_instance detects them numerically and records the result.
  std::optional<bool> theorem_hypotheses;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

/// Materializes algebras, diagonal, Ψ, T from a config.  norm_seed drives
/// norm estimation; gen_salt != 0 re-derives the generator seeds (used by
/// `verify --trials` to spread instances around the configured one).
Instance build_instance(const ExperimentConfig& config,
                        std::uint64_t norm_seed, std::uint64_t gen_salt = 0);

AlgebraPtr build_algebra(const nlohmann::json& spec);

// ---------------------------------------------------------------------------
// Serialization + CLI
// ---------------------------------------------------------------------------

nlohmann::ordered_json step_to_json(const StepRecord& step);
nlohmann::ordered_json trace_summary_json(const IterationTrace& trace);

/// Batch CLI entry point; argv excludes the program name.  Returns the
/// process exit code: 0 success, 1 assertion/verification failure, 2
/// configuration or usage error.
int run_command(const std::vector<std::string>& argv);

}  // namespace stablab
