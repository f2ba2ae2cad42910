#include "stablab/lab.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <utility>

#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& path,
                               const std::string& message) {
  throw Error(ErrorKind::ConfigError,
              "config field '" + path + "': " + message);
}

const json& req_field(const json& obj, const char* key,
                      const std::string& path) {
  if (!obj.is_object() || !obj.contains(key))
    config_error(path + "." + key, "missing");
  return obj.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_error(path, "expected a number");
  return v.get<double>();
}

long long as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_error(path, "expected an integer");
  return v.get<long long>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_error(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_error(path, "expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) config_error(path, "expected an array");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) =
        as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

DenseTensor as_cube(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) config_error(path, "expected a 3-d array");
  const int d = static_cast<int>(v.size());
  DenseTensor t({d, d, d});
  for (int i = 0; i < d; ++i) {
    const json& layer = v[i];
    if (!layer.is_array() || static_cast<int>(layer.size()) != d)
      config_error(path, "expected a d×d×d array");
    for (int j = 0; j < d; ++j) {
      const json& row = layer[j];
      if (!row.is_array() || static_cast<int>(row.size()) != d)
        config_error(path, "expected a d×d×d array");
      for (int k = 0; k < d; ++k)
        t(i, j, k) = as_number(row[k], path + "[" + std::to_string(i) + "][" +
                                           std::to_string(j) + "][" +
                                           std::to_string(k) + "]");
    }
  }
  return t;
}

NormSpec parse_norm(const json& v, int dim, const std::string& path) {
  const std::string kind = as_string(req_field(v, "kind", path), path + ".kind");
  if (kind == "l1") {
    if (v.contains("weights")) {
      Eigen::VectorXd w = as_vector(v.at("weights"), path + ".weights");
      if (w.size() != dim) config_error(path + ".weights", "wrong length");
      return L1Weighted{std::move(w)};
    }
    return L1Weighted{Eigen::VectorXd::Ones(dim)};
  }
  if (kind == "linf") return LInf{dim};
  if (kind == "spectral") {
    const int n = static_cast<int>(std::lround(std::sqrt(double(dim))));
    if (n * n != dim)
      config_error(path, "spectral norm needs a square dimension");
    return SpectralMatrix{n};
  }
  config_error(path + ".kind", "expected l1, linf or spectral");
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_error(path, "expected an integer seed");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const long long s = v.get<long long>();
  if (s < 0) config_error(path, "seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

/// Derives the seed a generator actually uses: the configured one, unless a
/// trial salt re-keys it (so `verify --trials` explores nearby instances).
std::uint64_t effective_seed(std::uint64_t cfg_seed, std::uint64_t salt,
                             std::uint64_t tag) {
  return salt == 0 ? cfg_seed : mix64(salt ^ cfg_seed ^ tag);
}

bool psi_is_unital(const Algebra& B, const BilinearMap& psi, double tol) {
  for (int q = 0; q < B.dim; ++q) {
    Element eq = Element::Zero(B.dim);
    eq(q) = 1.0;
    if (element_norm(B, apply_bilinear(psi, B.unit, eq) - eq) > tol ||
        element_norm(B, apply_bilinear(psi, eq, B.unit) - eq) > tol)
      return false;
  }
  return true;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

BilinearMap gen_perturbed_product(const AlgebraPtr& B, double epsilon_psi,
                                  bool preserve_unit, std::uint64_t seed) {
  if (epsilon_psi < 0.0)
    throw Error(ErrorKind::DomainError, "epsilon_psi must be ≥ 0");
  const int d = B->dim;
  BilinearMap psi = multiplication_map(B);
  if (epsilon_psi == 0.0) return psi;

  Rng rng(mix64(seed) ^ 0x67616d6d61707369ull);
  DenseTensor g({d, d, d});
  for (std::size_t f = 0; f < g.size(); ++f) g[f] = rng.uniform_pm1();

  if (preserve_unit) {
    // Project Γ so both unit slices vanish:
    //   Γ'(x,y) = Γ(x,y) − (⟨u,x⟩/s)Γ(u,y) − (⟨u,y⟩/s)Γ(x,u)
    //             + (⟨u,x⟩⟨u,y⟩/s²)Γ(u,u),   u = 1_B, s = ⟨u,u⟩.
    // When the unit is a single basis vector the cancellation is bit-exact.
    const Eigen::VectorXd& u = B->unit;
    const double s = u.dot(u);
    Eigen::MatrixXd left(d, d);   // (1/s)·Γ(u, e_q) per output o
    Eigen::MatrixXd right(d, d);  // (1/s)·Γ(e_p, u)
    Eigen::VectorXd both(d);      // (1/s²)·Γ(u, u)
    left.setZero();
    right.setZero();
    both.setZero();
    for (int o = 0; o < d; ++o)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) {
          left(o, q) += u(p) * g(o, p, q) / s;
          right(o, p) += u(q) * g(o, p, q) / s;
        }
    for (int o = 0; o < d; ++o) {
      double acc = 0.0;
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) acc += u(p) * u(q) * g(o, p, q);
      both(o) = acc / (s * s);
    }
    for (int o = 0; o < d; ++o)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q)
          g(o, p, q) = ((g(o, p, q) - u(p) * left(o, q)) - u(q) * right(o, p)) +
                       u(p) * u(q) * both(o);
  }

  BilinearMap gamma{std::move(g), B, B, B};
  NormOptions opts;
  opts.seed = mix64(seed) ^ 0x7363616c65ull;
  const double norm = multilinear_norm(gamma, opts).value;
  const double scale = norm > 0.0 ? epsilon_psi / norm : epsilon_psi;
  for (std::size_t f = 0; f < gamma.tensor.size(); ++f)
    psi.tensor[f] += scale * gamma.tensor[f];
  return psi;
}

LinearOp gen_perturbed_hom(const AlgebraPtr& A, const AlgebraPtr& B,
                           const LinearOp& base, double epsilon_t,
                           bool preserve_unit, std::uint64_t seed) {
  if (epsilon_t < 0.0)
    throw Error(ErrorKind::DomainError, "epsilon_t must be ≥ 0");
  const int da = A->dim;
  const int db = B->dim;
  if (base.matrix.rows() != db || base.matrix.cols() != da)
    throw Error(ErrorKind::DimensionMismatch, "base operator shape");
  {
    NormOptions opts;
    opts.seed = mix64(seed) ^ 0x62617365ull;
    const double md =
        mdef(base, multiplication_map(B), opts).value;
    if (md > 1e-12) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "base operator is not multiplicative: defect " << md;
      throw Error(ErrorKind::BaseNotMultiplicative, msg.str());
    }
  }
  if (epsilon_t == 0.0) return base;

  Rng rng(mix64(seed) ^ 0x686f6d7065727475ull);
  Eigen::MatrixXd h(db, da);
  for (int o = 0; o < db; ++o)
    for (int i = 0; i < da; ++i) h(o, i) = rng.uniform_pm1();
  if (preserve_unit) {
    // H ← H − (H·u)uᵀ/⟨u,u⟩ kills H(1); bit-exact for basis-vector units.
    const Eigen::VectorXd& u = A->unit;
    const double s = u.dot(u);
    const Eigen::VectorXd hu = h * u;
    for (int o = 0; o < db; ++o)
      for (int i = 0; i < da; ++i) h(o, i) -= hu(o) * u(i) / s;
  }
  NormOptions opts;
  opts.seed = mix64(seed) ^ 0x7363616c65ull;
  const double norm = multilinear_norm(LinearOp{h, A, B}, opts).value;
  const double scale = norm > 0.0 ? epsilon_t / norm : epsilon_t;
  return LinearOp{base.matrix + scale * h, A, B};
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object())
    throw Error(ErrorKind::ConfigError, "config root must be a JSON object");
  ExperimentConfig c;
  c.algebra_domain = req_field(doc, "algebra_domain", "config");
  c.algebra_codomain = req_field(doc, "algebra_codomain", "config");
  c.diagonal = doc.contains("diagonal") ? doc.at("diagonal") : json("builtin");
  c.psi = req_field(doc, "psi", "config");
  c.t_op = req_field(doc, "t_op", "config");

  if (doc.contains("iteration")) {
    const json& it = doc.at("iteration");
    if (!it.is_object()) config_error("iteration", "expected an object");
    if (it.contains("eta"))
      c.iteration.eta = as_number(it.at("eta"), "iteration.eta");
    if (it.contains("theta"))
      c.iteration.theta = as_number(it.at("theta"), "iteration.theta");
    if (c.iteration.eta && c.iteration.theta)
      config_error("iteration", "set at most one of eta and theta");
    if (it.contains("epsilon"))
      c.iteration.epsilon = as_number(it.at("epsilon"), "iteration.epsilon");
    if (it.contains("abs_tol"))
      c.iteration.abs_tol = as_number(it.at("abs_tol"), "iteration.abs_tol");
    if (it.contains("max_iters"))
      c.iteration.max_iters = static_cast<int>(
          as_integer(it.at("max_iters"), "iteration.max_iters"));
    if (it.contains("divergence_factor"))
      c.iteration.divergence_factor = as_number(
          it.at("divergence_factor"), "iteration.divergence_factor");
  }
  if (!c.iteration.eta && !c.iteration.theta) c.iteration.eta = 0.5;

  if (doc.contains("norm_budget")) {
    c.norm_budget = as_integer(doc.at("norm_budget"), "norm_budget");
    if (c.norm_budget < 1) config_error("norm_budget", "must be ≥ 1");
  }
  if (doc.contains("base_seed"))
    c.base_seed = as_seed(doc.at("base_seed"), "base_seed");
  if (doc.contains("theorem_hypotheses"))
    c.theorem_hypotheses =
        as_bool(doc.at("theorem_hypotheses"), "theorem_hypotheses");
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::ConfigError, "cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError,
                "cannot parse " + path + ": " + e.what());
  }
  return parse_config(doc);
}

AlgebraPtr build_algebra(const json& spec) {
  const std::string path = "algebra";
  const std::string kind =
      as_string(req_field(spec, "kind", path), path + ".kind");
  if (kind == "cyclic")
    return cyclic_algebra(
        static_cast<int>(as_integer(req_field(spec, "k", path), path + ".k")));
  if (kind == "group") {
    const json& cj = req_field(spec, "cayley", path);
    if (!cj.is_array()) config_error(path + ".cayley", "expected an array");
    std::vector<std::vector<int>> cayley;
    for (std::size_t i = 0; i < cj.size(); ++i) {
      if (!cj[i].is_array())
        config_error(path + ".cayley", "expected an array of rows");
      std::vector<int> row;
      for (const json& e : cj[i])
        row.push_back(static_cast<int>(as_integer(e, path + ".cayley")));
      cayley.push_back(std::move(row));
    }
    std::vector<int> inverses;
    for (const json& e : req_field(spec, "inverses", path))
      inverses.push_back(static_cast<int>(as_integer(e, path + ".inverses")));
    return group_algebra(cayley, inverses);
  }
  if (kind == "matrix")
    return matrix_algebra(
        static_cast<int>(as_integer(req_field(spec, "n", path), path + ".n")));
  if (kind == "pointwise")
    return pointwise_algebra(
        static_cast<int>(as_integer(req_field(spec, "d", path), path + ".d")));
  if (kind == "explicit") {
    DenseTensor structure =
        as_cube(req_field(spec, "structure", path), path + ".structure");
    Element unit = as_vector(req_field(spec, "unit", path), path + ".unit");
    if (unit.size() != structure.shape(0))
      config_error(path + ".unit", "length must match the structure tensor");
    NormSpec norm = parse_norm(req_field(spec, "norm", path),
                               static_cast<int>(unit.size()), path + ".norm");
    MakeOptions opts;
    if (spec.contains("allow_unnormalized"))
      opts.allow_unnormalized =
          as_bool(spec.at("allow_unnormalized"), path + ".allow_unnormalized");
    return make_algebra(structure, unit, norm, opts);
  }
  config_error(path + ".kind",
               "expected cyclic, group, matrix, pointwise or explicit");
}

namespace {

DiagonalRep build_diagonal(const AlgebraPtr& A, const json& spec) {
  if (spec.is_string() && spec.get<std::string>() == "builtin") {
    switch (A->kind) {
      case AlgebraKind::Group:
        return group_diagonal(*A);
      case AlgebraKind::Matrix:
        return matrix_diagonal(*A);
      case AlgebraKind::Pointwise: {
        TensorRep rep;
        for (int i = 0; i < A->dim; ++i) {
          Element e = Element::Zero(A->dim);
          e(i) = 1.0;
          rep.pairs.emplace_back(e, e);
        }
        return validate_diagonal(*A, rep, 1e-12);
      }
      default:
        config_error("diagonal",
                     "no builtin diagonal for this algebra; give explicit "
                     "pairs");
    }
  }
  if (!spec.is_object() ||
      as_string(req_field(spec, "kind", "diagonal"), "diagonal.kind") !=
          "explicit")
    config_error("diagonal", "expected \"builtin\" or an explicit spec");
  const json& pj = req_field(spec, "pairs", "diagonal");
  if (!pj.is_array() || pj.empty())
    config_error("diagonal.pairs", "expected a nonempty array");
  TensorRep rep;
  for (std::size_t j = 0; j < pj.size(); ++j) {
    const std::string p = "diagonal.pairs[" + std::to_string(j) + "]";
    if (!pj[j].is_array() || pj[j].size() != 2)
      config_error(p, "expected [a, b]");
    rep.pairs.emplace_back(as_vector(pj[j][0], p + "[0]"),
                           as_vector(pj[j][1], p + "[1]"));
  }
  double tol = 1e-12;
  if (spec.contains("tol")) tol = as_number(spec.at("tol"), "diagonal.tol");
  return validate_diagonal(*A, rep, tol);
}

BilinearMap build_psi(const AlgebraPtr& B, const json& spec,
                      std::uint64_t gen_salt) {
  const std::string kind =
      as_string(req_field(spec, "kind", "psi"), "psi.kind");
  if (kind == "exact_product") return multiplication_map(B);
  if (kind == "perturbed_product") {
    const double eps =
        as_number(req_field(spec, "epsilon_psi", "psi"), "psi.epsilon_psi");
    bool preserve = true;
    if (spec.contains("preserve_unit"))
      preserve = as_bool(spec.at("preserve_unit"), "psi.preserve_unit");
    std::uint64_t seed = 0;
    if (spec.contains("seed")) seed = as_seed(spec.at("seed"), "psi.seed");
    return gen_perturbed_product(
        B, eps, preserve, effective_seed(seed, gen_salt, 0x707369ull));
  }
  if (kind == "explicit") {
    DenseTensor t = as_cube(req_field(spec, "tensor", "psi"), "psi.tensor");
    if (t.shape(0) != B->dim)
      config_error("psi.tensor", "dimension must match the codomain");
    return BilinearMap{std::move(t), B, B, B};
  }
  config_error("psi.kind",
               "expected exact_product, perturbed_product or explicit");
}

LinearOp build_t(const AlgebraPtr& A, const AlgebraPtr& B, const json& spec,
                 std::uint64_t gen_salt, const std::string& path) {
  const std::string kind =
      as_string(req_field(spec, "kind", path), path + ".kind");
  if (kind == "identity") {
    if (A->dim != B->dim)
      config_error(path, "identity needs matching dimensions");
    return LinearOp{Eigen::MatrixXd::Identity(B->dim, A->dim), A, B};
  }
  if (kind == "group_hom") {
    if (A->kind != AlgebraKind::Group || B->kind != AlgebraKind::Group)
      config_error(path, "group_hom needs group algebras on both sides");
    std::vector<int> map;
    for (const json& e : req_field(spec, "map", path))
      map.push_back(static_cast<int>(as_integer(e, path + ".map")));
    const auto& ga = *A->group;
    const auto& gb = *B->group;
    if (static_cast<int>(map.size()) != A->dim)
      config_error(path + ".map", "length must equal the domain order");
    for (int v : map)
      if (v < 0 || v >= B->dim)
        config_error(path + ".map", "entry out of range");
    if (map[ga.identity] != gb.identity)
      config_error(path + ".map", "does not send identity to identity");
    for (int i = 0; i < A->dim; ++i)
      for (int j = 0; j < A->dim; ++j)
        if (map[ga.cayley[i][j]] != gb.cayley[map[i]][map[j]])
          config_error(path + ".map",
                       "not a homomorphism at pair (" + std::to_string(i) +
                           "," + std::to_string(j) + ")");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(B->dim, A->dim);
    for (int i = 0; i < A->dim; ++i) m(map[i], i) = 1.0;
    return LinearOp{std::move(m), A, B};
  }
  if (kind == "perturbed") {
    const LinearOp base = build_t(A, B, req_field(spec, "base", path),
                                  gen_salt, path + ".base");
    const double eps =
        as_number(req_field(spec, "epsilon_t", path), path + ".epsilon_t");
    bool preserve = true;
    if (spec.contains("preserve_unit"))
      preserve = as_bool(spec.at("preserve_unit"), path + ".preserve_unit");
    std::uint64_t seed = 0;
    if (spec.contains("seed")) seed = as_seed(spec.at("seed"), path + ".seed");
    return gen_perturbed_hom(A, B, base, eps, preserve,
                             effective_seed(seed, gen_salt, 0x746f70ull));
  }
  if (kind == "explicit") {
    const json& mj = req_field(spec, "matrix", path);
    if (!mj.is_array() || mj.empty())
      config_error(path + ".matrix", "expected a 2-d array");
    const int rows = static_cast<int>(mj.size());
    Eigen::MatrixXd m;
    for (int r = 0; r < rows; ++r) {
      const Eigen::VectorXd row = as_vector(
          mj[r], path + ".matrix[" + std::to_string(r) + "]");
      if (r == 0)
        m.resize(rows, row.size());
      else if (row.size() != m.cols())
        config_error(path + ".matrix", "ragged rows");
      m.row(r) = row;
    }
    if (m.rows() != B->dim || m.cols() != A->dim)
      config_error(path + ".matrix", "shape must be codomain × domain");
    return LinearOp{std::move(m), A, B};
  }
  config_error(path + ".kind",
               "expected identity, group_hom, perturbed or explicit");
}

}  // namespace

Instance build_instance(const ExperimentConfig& config,
                        std::uint64_t norm_seed, std::uint64_t gen_salt) {
  AlgebraPtr A = build_algebra(config.algebra_domain);
  AlgebraPtr B = build_algebra(config.algebra_codomain);
  DiagonalRep diag = build_diagonal(A, config.diagonal);
  BilinearMap psi = build_psi(B, config.psi, gen_salt);
  LinearOp T = build_t(A, B, config.t_op, gen_salt, "t_op");

  NormOptions opts;
  opts.budget = config.norm_budget;
  opts.seed = norm_seed;

  bool hyp;
  if (config.theorem_hypotheses) {
    hyp = *config.theorem_hypotheses;
  } else {
    hyp = is_unital(T) && psi_is_unital(*B, psi, 1e-12);
  }
  return make_instance(std::move(A), std::move(B), std::move(diag),
                       std::move(psi), std::move(T), hyp, opts);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

ordered_json step_to_json(const StepRecord& step) {
  ordered_json j;
  j["n"] = step.n;
  j["mdef"] = step.mdef_n.value;
  j["mdef_exact"] = step.mdef_n.exact;
  j["op_norm"] = step.op_norm_n;
  j["correction_norm"] = step.correction_norm;
  j["omega"] = step.omega_n;
  j["delta_n"] = step.delta_n;
  j["beta_n"] = step.beta_n;
  j["K_n"] = step.K_n;
  j["claim_ii_ok"] = step.claim_ii_ok;
  j["claim_iii_ok"] = step.claim_iii_ok;
  j["prop34_lhs"] = step.prop34_lhs;
  if (std::isnan(step.prop34_bound))
    j["prop34_rhs"] = nullptr;  // no bound exists before the first step
  else
    j["prop34_rhs"] = step.prop34_bound;
  return j;
}

ordered_json trace_summary_json(const IterationTrace& trace) {
  ordered_json j;
  j["outcome"] = to_string(trace.outcome);
  if (trace.N >= 0)
    j["N"] = trace.N;
  else
    j["N"] = nullptr;
  j["steps"] = trace.steps.size();
  const StepRecord& last = trace.steps.back();
  j["final_mdef"] = last.mdef_n.value;
  j["final_mdef_exact"] = last.mdef_n.exact;
  j["distance_to_start"] = trace.distance_to_start;
  j["endgame_bound"] = trace.endgame_bound;
  j["alpha"] = trace.alpha;
  j["alpha_exact"] = trace.alpha_exact;
  j["alpha_power_bound"] =
      std::pow(trace.alpha, 1.0 / (1.0 + trace.theta));
  j["delta"] = trace.delta;
  j["theta"] = trace.theta;
  j["epsilon"] = trace.epsilon;
  j["hypothesis_satisfied"] = trace.hypothesis_satisfied;
  return j;
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

namespace {

const char* method_name(const NormEstimate& e) {
  return e.method == NormMethod::ExtremePointEnumeration ? "enumeration"
                                                         : "ascent";
}

int cmd_defects(const std::string& config_path, bool as_json) {
  const ExperimentConfig cfg = load_config_file(config_path);
  const Instance inst = build_instance(cfg, cfg.base_seed);
  const NormEstimate md = mdef(inst.T, inst.psi, inst.norm_opts);
  const NormEstimate ad = adef(inst.psi, inst.norm_opts);

  if (as_json) {
    ordered_json out;
    for (const auto& [name, est] :
         {std::pair<const char*, const NormEstimate*>{"mdef", &md},
          {"adef", &ad},
          {"norm_T", &inst.norm_T},
          {"norm_psi", &inst.norm_psi}}) {
      ordered_json e;
      e["value"] = est->value;
      e["exact"] = est->exact;
      e["method"] = method_name(*est);
      out[name] = e;
    }
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
  }
  const auto line = [](const char* name, const NormEstimate& e) {
    std::printf("%-8s = %s  (%s)\n", name, fmt17(e.value).c_str(),
                e.exact ? "exact" : "estimate");
  };
  line("mdef", md);
  line("adef", ad);
  line("norm_T", inst.norm_T);
  line("norm_psi", inst.norm_psi);
  return 0;
}

int cmd_stabilize(const std::string& config_path, const std::string& out_path,
                  const std::string& summary_path) {
  const ExperimentConfig cfg = load_config_file(config_path);
  const Instance inst = build_instance(cfg, cfg.base_seed);
  const IterationTrace trace = stabilize(inst, cfg.iteration);

  std::ofstream out(out_path);
  if (!out)
    throw Error(ErrorKind::ConfigError, "cannot open output: " + out_path);
  for (const StepRecord& step : trace.steps)
    out << step_to_json(step).dump() << '\n';
  ordered_json summary;
  summary["summary"] = trace_summary_json(trace);
  out << summary.dump() << '\n';
  out.close();

  if (!summary_path.empty()) {
    std::ofstream s(summary_path);
    if (!s)
      throw Error(ErrorKind::ConfigError,
                  "cannot open summary output: " + summary_path);
    s << trace_summary_json(trace).dump(2) << '\n';
  } else {
    std::printf("%s\n", trace_summary_json(trace).dump(2).c_str());
  }
  return 0;
}

int cmd_verify(const std::string& config_path, int trials) {
  if (trials < 1)
    throw Error(ErrorKind::ConfigError, "--trials must be ≥ 1");
  const ExperimentConfig cfg = load_config_file(config_path);

  struct Worst {
    double margin = std::numeric_limits<double>::infinity();
    double lhs = 0.0, rhs = 0.0;
    int trial = -1;
  };
  std::map<std::string, Worst> worst;
  std::vector<std::string> order;

  for (int i = 0; i < trials; ++i) {
    const std::uint64_t salt = i == 0 ? 0 : trial_seed(cfg.base_seed, i);
    const Instance inst = build_instance(
        cfg, trial_seed(cfg.base_seed, static_cast<std::uint64_t>(i)), salt);
    const BoundReport report =
        verify_bounds(inst, trial_seed(cfg.base_seed, i));
    for (const BoundCheck& c : report.checks) {
      auto it = worst.find(c.name);
      if (it == worst.end()) {
        order.push_back(c.name);
        it = worst.emplace(c.name, Worst{}).first;
      }
      if (c.margin < it->second.margin)
        it->second = Worst{c.margin, c.lhs, c.rhs, i};
    }
  }

  std::printf("%-30s %24s %24s %24s\n", "check", "lhs", "rhs", "margin(min)");
  bool failed = false;
  for (const std::string& name : order) {
    const Worst& w = worst.at(name);
    std::printf("%-30s %24s %24s %24s\n", name.c_str(), fmt17(w.lhs).c_str(),
                fmt17(w.rhs).c_str(), fmt17(w.margin).c_str());
    if (w.margin < -1e-10) failed = true;
  }
  std::printf("trials: %d\n", trials);
  return failed ? 1 : 0;
}

int cmd_diagonal(const std::string& config_path) {
  const ExperimentConfig cfg = load_config_file(config_path);
  const AlgebraPtr A = build_algebra(cfg.algebra_domain);

  TensorRep rep;
  double tol = 1e-12;
  std::optional<double> builtin_m;
  if (cfg.diagonal.is_string() &&
      cfg.diagonal.get<std::string>() == "builtin") {
    const DiagonalRep d = build_diagonal(A, cfg.diagonal);
    rep = d.rep;
    builtin_m = d.M;
  } else {
    const json& pj = req_field(cfg.diagonal, "pairs", "diagonal");
    for (std::size_t j = 0; j < pj.size(); ++j) {
      const std::string p = "diagonal.pairs[" + std::to_string(j) + "]";
      if (!pj[j].is_array() || pj[j].size() != 2)
        config_error(p, "expected [a, b]");
      rep.pairs.emplace_back(as_vector(pj[j][0], p + "[0]"),
                             as_vector(pj[j][1], p + "[1]"));
    }
    if (cfg.diagonal.contains("tol"))
      tol = as_number(cfg.diagonal.at("tol"), "diagonal.tol");
  }

  const auto [ru, rc] = diagonal_residuals(*A, rep);
  const double bound = builtin_m ? *builtin_m : rep_norm_bound(*A, rep);
  std::printf("residual_unit    = %s\n", fmt17(ru).c_str());
  std::printf("residual_commute = %s\n", fmt17(rc).c_str());
  std::printf("M                = %s\n", fmt17(bound).c_str());
  const bool ok = ru <= tol && rc <= tol;
  std::printf("%s (tol %s)\n", ok ? "accepted" : "rejected",
              fmt17(tol).c_str());
  return ok ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& vary,
              const std::string& grid_arg, const std::string& out_path) {
  if (vary != "eta" && vary != "epsilon_t" && vary != "epsilon_psi")
    throw Error(ErrorKind::ConfigError,
                "--vary must be eta, epsilon_t or epsilon_psi");
  std::vector<double> grid;
  {
    std::stringstream ss(grid_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument(item);
        grid.push_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorKind::ConfigError,
                    "--grid: cannot parse value '" + item + "'");
      }
    }
  }
  if (grid.empty())
    throw Error(ErrorKind::ConfigError, "--grid must list at least one value");

  const ExperimentConfig base = load_config_file(config_path);
  if (vary == "epsilon_t" &&
      (!base.t_op.is_object() ||
       base.t_op.value("kind", std::string()) != "perturbed"))
    throw Error(ErrorKind::ConfigError,
                "sweeping epsilon_t needs t_op.kind == perturbed");
  if (vary == "epsilon_psi" &&
      (!base.psi.is_object() ||
       base.psi.value("kind", std::string()) != "perturbed_product"))
    throw Error(ErrorKind::ConfigError,
                "sweeping epsilon_psi needs psi.kind == perturbed_product");

  const int n = static_cast<int>(grid.size());
  std::vector<std::string> rows(n);
  std::vector<std::exception_ptr> errors(n);

  const auto run_trial = [&](int i) {
    ExperimentConfig cfg = base;
    if (vary == "eta") {
      cfg.iteration.eta = grid[i];
      cfg.iteration.theta.reset();
    } else if (vary == "epsilon_t") {
      cfg.t_op["epsilon_t"] = grid[i];
    } else {
      cfg.psi["epsilon_psi"] = grid[i];
    }
    const Instance inst = build_instance(
        cfg, trial_seed(base.base_seed, static_cast<std::uint64_t>(i)));
    const IterationTrace trace = stabilize(inst, cfg.iteration);

    std::string row = fmt17(grid[i]);
    row += ',' + fmt17(trace.alpha);
    row += ',' + fmt17(trace.theta);
    row += ',' + fmt17(trace.delta);
    row += ',';
    if (trace.outcome == Outcome::TerminatedAtN)
      row += std::to_string(trace.N);
    else
      row += to_string(trace.outcome);
    row += ',' + fmt17(trace.steps.back().mdef_n.value);
    row += ',' + fmt17(std::pow(trace.alpha, 1.0 / (1.0 + trace.theta)));
    row += ',' + fmt17(trace.distance_to_start);
    return row;
  };

  const int threads = std::min(thread_budget(), n);
  if (threads > 1) {
    std::atomic<int> next{0};
    const auto worker = [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          rows[i] = run_trial(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  } else {
    for (int i = 0; i < n; ++i) {
      try {
        rows[i] = run_trial(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ofstream out(out_path);
  if (!out)
    throw Error(ErrorKind::ConfigError, "cannot open output: " + out_path);
  out << vary
      << ",alpha,theta,delta,N_or_outcome,final_mdef,alpha_power_bound,"
         "distance\n";
  for (const std::string& row : rows) out << row << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& argv) {
  CLI::App app{"Defect functionals and stabilization experiments on "
               "finite-dimensional normed algebras"};
  app.require_subcommand(1);

  std::string config_path, out_path, summary_path, vary, grid;
  int trials = 1;
  bool as_json = false;

  CLI::App* defects_cmd = app.add_subcommand(
      "defects", "Print mdef, adef and the operator norms for a config");
  defects_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  defects_cmd->add_flag("--json", as_json, "machine-readable output");

  CLI::App* stabilize_cmd = app.add_subcommand(
      "stabilize", "Run the defect-correction iteration, tracing each step");
  stabilize_cmd->add_option("--config", config_path, "experiment config")
      ->required();
  stabilize_cmd->add_option("--out", out_path, "step trace (JSON Lines)")
      ->required();
  stabilize_cmd->add_option("--summary", summary_path,
                            "also write the summary object here");

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "Check every proved inequality on seeded instances");
  verify_cmd->add_option("--config", config_path, "experiment config")
      ->required();
  verify_cmd->add_option("--trials", trials, "number of seeded instances");

  CLI::App* diagonal_cmd = app.add_subcommand(
      "diagonal", "Validate the configured diagonal tensor");
  diagonal_cmd->add_option("--config", config_path, "experiment config")
      ->required();

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Rerun stabilize over a parameter grid, emitting CSV");
  sweep_cmd->add_option("--config", config_path, "experiment config")
      ->required();
  sweep_cmd->add_option("--vary", vary, "eta | epsilon_t | epsilon_psi")
      ->required();
  sweep_cmd->add_option("--grid", grid, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out_path, "CSV output path")->required();

  std::vector<std::string> full;
  full.reserve(argv.size() + 1);
  full.push_back("stablab");
  full.insert(full.end(), argv.begin(), argv.end());
  std::vector<const char*> ptrs;
  ptrs.reserve(full.size());
  for (const std::string& s : full) ptrs.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
    if (app.got_subcommand(defects_cmd))
      return cmd_defects(config_path, as_json);
    if (app.got_subcommand(stabilize_cmd))
      return cmd_stabilize(config_path, out_path, summary_path);
    if (app.got_subcommand(verify_cmd)) return cmd_verify(config_path, trials);
    if (app.got_subcommand(diagonal_cmd)) return cmd_diagonal(config_path);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(config_path, vary, grid, out_path);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace stablab
