#include "specgrad/harness.h"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "specgrad/grade.h"
#include "specgrad/rng.h"

namespace specgrad::harness {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw std::invalid_argument(field + ": " + why);
}

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) bad(join_path(path, it.key()), "unknown key");
  }
}

double get_num(const json& j, const char* key, const std::string& path, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) bad(join_path(path, key), "expected a number");
  return j[key].get<double>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& path,
                      std::uint64_t def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_unsigned()) bad(join_path(path, key), "expected a nonnegative integer");
  return j[key].get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, const std::string& path, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) bad(join_path(path, key), "expected a boolean");
  return j[key].get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& path,
                    const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) bad(join_path(path, key), "expected a string");
  return j[key].get<std::string>();
}

std::vector<double> get_vec(const json& j, const char* key, const std::string& path) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) bad(join_path(path, key), "expected an array of numbers");
  for (const auto& v : j[key]) {
    if (!v.is_number()) bad(join_path(path, key), "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

ProblemSpec parse_problem(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  check_keys(j, path,
             {"kind", "seed", "eigenvalues", "b", "rotate", "p", "sigma_reg", "target_c",
              "mf_n", "mf_m", "mf_r", "mf_c", "mf_c_scale", "dataset_path", "synth_m",
              "synth_d", "strong_dirs", "strong_scale", "l2"});
  ProblemSpec spec;
  const std::string kind = get_str(j, "kind", path, "");
  if (kind == "quadratic")
    spec.kind = ProblemKind::Quadratic;
  else if (kind == "reg-quadratic")
    spec.kind = ProblemKind::RegQuadratic;
  else if (kind == "diagonal-nn")
    spec.kind = ProblemKind::DiagonalNN;
  else if (kind == "matrix-factorization")
    spec.kind = ProblemKind::MatrixFactorization;
  else if (kind == "logistic")
    spec.kind = ProblemKind::Logistic;
  else
    bad(join_path(path, "kind"), "unknown value '" + kind + "'");

  spec.seed = get_u64(j, "seed", path, 0);
  spec.eigenvalues = get_vec(j, "eigenvalues", path);
  spec.b = get_vec(j, "b", path);
  spec.rotate = get_bool(j, "rotate", path, false);
  spec.p = get_num(j, "p", path, 3.0);
  spec.sigma_reg = get_num(j, "sigma_reg", path, 0.0);
  spec.target_c = get_vec(j, "target_c", path);
  spec.mf_n = static_cast<std::size_t>(get_u64(j, "mf_n", path, 0));
  spec.mf_m = static_cast<std::size_t>(get_u64(j, "mf_m", path, 0));
  spec.mf_r = static_cast<std::size_t>(get_u64(j, "mf_r", path, 0));
  spec.mf_c = get_vec(j, "mf_c", path);
  spec.mf_c_scale = get_num(j, "mf_c_scale", path, 1.0);
  spec.dataset_path = get_str(j, "dataset_path", path, "");
  spec.synth_m = static_cast<std::size_t>(get_u64(j, "synth_m", path, 0));
  spec.synth_d = static_cast<std::size_t>(get_u64(j, "synth_d", path, 0));
  spec.strong_dirs = static_cast<std::size_t>(get_u64(j, "strong_dirs", path, 0));
  spec.strong_scale = get_num(j, "strong_scale", path, 1.0);
  spec.l2 = get_num(j, "l2", path, 0.0);
  return spec;
}

Regularizer parse_psi(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  check_keys(j, path, {"kind", "coeff", "lo", "hi"});
  Regularizer psi;
  const std::string kind = get_str(j, "kind", path, "zero");
  if (kind == "zero")
    psi.kind = RegKind::Zero;
  else if (kind == "squared-l2")
    psi.kind = RegKind::SquaredL2;
  else if (kind == "l1")
    psi.kind = RegKind::L1;
  else if (kind == "box")
    psi.kind = RegKind::Box;
  else
    bad(join_path(path, "kind"), "unknown value '" + kind + "'");
  psi.coeff = get_num(j, "coeff", path, 0.0);
  psi.lo = get_num(j, "lo", path, psi.lo);
  psi.hi = get_num(j, "hi", path, psi.hi);
  if (psi.coeff < 0.0) bad(join_path(path, "coeff"), "must be nonnegative");
  if (psi.lo > psi.hi) bad(join_path(path, "lo"), "lower bound exceeds upper bound");
  return psi;
}

SolverConfig parse_solver(const json& j, const std::string& path, bool* dense_reference) {
  check_keys(j, path,
             {"name", "tau", "rule", "power", "term", "check_mode", "mode",
              "dense_reference", "inner_tol"});
  SolverConfig cfg;
  cfg.tau = static_cast<std::size_t>(get_u64(j, "tau", path, 0));

  if (!j.contains("rule")) bad(join_path(path, "rule"), "missing");
  const json& jr = j["rule"];
  const std::string rpath = join_path(path, "rule");
  if (!jr.is_object()) bad(rpath, "expected an object");
  check_keys(jr, rpath,
             {"kind", "L", "sigma_tau", "sigma_tau_plus", "M", "fixed_alpha", "delta",
              "delta_minus", "adaptive", "initial_L", "growth", "shrink"});
  const std::string rk = get_str(jr, "kind", rpath, "");
  if (rk == "lipschitz")
    cfg.rule.rule = StepRule::Lipschitz;
  else if (rk == "cubic-cut")
    cfg.rule.rule = StepRule::CubicCut;
  else if (rk == "qsc")
    cfg.rule.rule = StepRule::Qsc;
  else if (rk == "fixed")
    cfg.rule.rule = StepRule::Fixed;
  else
    bad(join_path(rpath, "kind"), "unknown value '" + rk + "'");
  cfg.rule.L = get_num(jr, "L", rpath, 0.0);
  cfg.rule.sigma_tau = get_num(jr, "sigma_tau", rpath, 0.0);
  cfg.rule.sigma_tau_plus = get_num(jr, "sigma_tau_plus", rpath, 0.0);
  cfg.rule.M = get_num(jr, "M", rpath, 0.0);
  cfg.rule.fixed_alpha = get_num(jr, "fixed_alpha", rpath, 0.0);
  if (jr.contains("delta")) cfg.rule.delta = get_num(jr, "delta", rpath, 0.0);
  if (jr.contains("delta_minus"))
    cfg.rule.delta_minus = get_num(jr, "delta_minus", rpath, 0.0);
  cfg.rule.adaptive = get_bool(jr, "adaptive", rpath, false);
  cfg.rule.initial_L = get_num(jr, "initial_L", rpath, 1.0);
  cfg.rule.growth = get_num(jr, "growth", rpath, 2.0);
  cfg.rule.shrink = get_num(jr, "shrink", rpath, 0.5);

  if (j.contains("power")) {
    const json& jp = j["power"];
    const std::string ppath = join_path(path, "power");
    if (!jp.is_object()) bad(ppath, "expected an object");
    check_keys(jp, ppath, {"warmup_T", "hot_T", "seed"});
    if (jp.contains("seed"))
      bad(join_path(ppath, "seed"), "set the experiment-level seed instead");
    cfg.power.warmup_T = static_cast<std::size_t>(get_u64(jp, "warmup_T", ppath, 20));
    cfg.power.hot_T = static_cast<std::size_t>(get_u64(jp, "hot_T", ppath, 1));
  }

  if (j.contains("term")) {
    const json& jt = j["term"];
    const std::string tpath = join_path(path, "term");
    if (!jt.is_object()) bad(tpath, "expected an object");
    check_keys(jt, tpath, {"eps", "max_iters", "max_hvp_calls", "target_f"});
    cfg.term.eps = get_num(jt, "eps", tpath, 1e-8);
    cfg.term.max_iters = static_cast<std::size_t>(get_u64(jt, "max_iters", tpath, 1000));
    cfg.term.max_hvp_calls =
        static_cast<long long>(get_u64(jt, "max_hvp_calls", tpath, 0));
    if (jt.contains("target_f")) cfg.term.target_f = get_num(jt, "target_f", tpath, 0.0);
    if (cfg.term.eps <= 0.0) bad(join_path(tpath, "eps"), "must be positive");
    if (cfg.term.max_iters < 1) bad(join_path(tpath, "max_iters"), "must be >= 1");
  }

  const std::string cm = get_str(j, "check_mode", path, "warn");
  if (cm == "off")
    cfg.check_mode = CheckMode::Off;
  else if (cm == "warn")
    cfg.check_mode = CheckMode::Warn;
  else if (cm == "strict")
    cfg.check_mode = CheckMode::Strict;
  else
    bad(join_path(path, "check_mode"), "unknown value '" + cm + "'");

  const std::string md = get_str(j, "mode", path, "plain");
  if (md == "plain")
    cfg.mode = SolverMode::Plain;
  else if (md == "cut-negative")
    cfg.mode = SolverMode::CutNegative;
  else if (md == "composite")
    cfg.mode = SolverMode::Composite;
  else
    bad(join_path(path, "mode"), "unknown value '" + md + "'");

  *dense_reference = get_bool(j, "dense_reference", path, false);
  cfg.use_dense_reference = *dense_reference;
  cfg.inner_tol = get_num(j, "inner_tol", path, 0.0);
  return cfg;
}

const char* kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::RegQuadratic: return "reg-quadratic";
    case ProblemKind::DiagonalNN: return "diagonal-nn";
    case ProblemKind::MatrixFactorization: return "matrix-factorization";
    case ProblemKind::Logistic: return "logistic";
  }
  return "?";
}

const char* rule_name(StepRule r) {
  switch (r) {
    case StepRule::Lipschitz: return "lipschitz";
    case StepRule::CubicCut: return "cubic-cut";
    case StepRule::Qsc: return "qsc";
    case StepRule::Fixed: return "fixed";
  }
  return "?";
}

const char* psi_name(RegKind k) {
  switch (k) {
    case RegKind::Zero: return "zero";
    case RegKind::SquaredL2: return "squared-l2";
    case RegKind::L1: return "l1";
    case RegKind::Box: return "box";
  }
  return "?";
}

json problem_to_json(const ProblemSpec& p) {
  json j;
  j["kind"] = kind_name(p.kind);
  j["seed"] = p.seed;
  switch (p.kind) {
    case ProblemKind::RegQuadratic:
      j["p"] = p.p;
      j["sigma_reg"] = p.sigma_reg;
      [[fallthrough]];
    case ProblemKind::Quadratic:
      j["eigenvalues"] = p.eigenvalues;
      if (!p.b.empty()) j["b"] = p.b;
      j["rotate"] = p.rotate;
      break;
    case ProblemKind::DiagonalNN:
      j["target_c"] = p.target_c;
      break;
    case ProblemKind::MatrixFactorization:
      j["mf_n"] = p.mf_n;
      j["mf_m"] = p.mf_m;
      j["mf_r"] = p.mf_r;
      if (!p.mf_c.empty()) j["mf_c"] = p.mf_c;
      j["mf_c_scale"] = p.mf_c_scale;
      break;
    case ProblemKind::Logistic:
      if (!p.dataset_path.empty()) {
        j["dataset_path"] = p.dataset_path;
      } else {
        j["synth_m"] = p.synth_m;
        j["synth_d"] = p.synth_d;
        j["strong_dirs"] = p.strong_dirs;
        j["strong_scale"] = p.strong_scale;
      }
      j["l2"] = p.l2;
      break;
  }
  return j;
}

json run_to_json(const RunSpec& r) {
  json j;
  j["name"] = r.name;
  j["tau"] = r.solver.tau;
  json jr;
  jr["kind"] = rule_name(r.solver.rule.rule);
  jr["L"] = r.solver.rule.L;
  jr["sigma_tau"] = r.solver.rule.sigma_tau;
  jr["sigma_tau_plus"] = r.solver.rule.sigma_tau_plus;
  jr["M"] = r.solver.rule.M;
  jr["fixed_alpha"] = r.solver.rule.fixed_alpha;
  if (r.solver.rule.delta) jr["delta"] = *r.solver.rule.delta;
  if (r.solver.rule.delta_minus) jr["delta_minus"] = *r.solver.rule.delta_minus;
  jr["adaptive"] = r.solver.rule.adaptive;
  jr["initial_L"] = r.solver.rule.initial_L;
  jr["growth"] = r.solver.rule.growth;
  jr["shrink"] = r.solver.rule.shrink;
  j["rule"] = std::move(jr);
  j["power"] = {{"warmup_T", r.solver.power.warmup_T}, {"hot_T", r.solver.power.hot_T}};
  json jt = {{"eps", r.solver.term.eps},
             {"max_iters", r.solver.term.max_iters},
             {"max_hvp_calls", r.solver.term.max_hvp_calls}};
  if (r.solver.term.target_f) jt["target_f"] = *r.solver.term.target_f;
  j["term"] = std::move(jt);
  j["check_mode"] = to_string(r.solver.check_mode);
  j["mode"] = to_string(r.solver.mode);
  j["dense_reference"] = r.dense_reference;
  j["inner_tol"] = r.solver.inner_tol;
  return j;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["problem"] = problem_to_json(cfg.problem);
  if (cfg.has_psi) j["psi"] = {{"kind", psi_name(cfg.psi.kind)},
                               {"coeff", cfg.psi.coeff},
                               {"lo", cfg.psi.lo},
                               {"hi", cfg.psi.hi}};
  if (!cfg.x0.empty()) j["x0"] = cfg.x0;
  json jr = json::array();
  for (const auto& r : cfg.runs) jr.push_back(run_to_json(r));
  j["runs"] = std::move(jr);
  j["output"] = {{"directory", cfg.output_dir},
                 {"formats", [&] {
                    json f = json::array();
                    if (cfg.write_csv) f.push_back("csv");
                    if (cfg.write_json) f.push_back("json");
                    return f;
                  }()}};
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  return j;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

long long modeled_flops_per_iter(std::size_t tau, std::size_t n, std::size_t T) {
  const long long t = static_cast<long long>(tau);
  const long long nn = static_cast<long long>(n);
  return (static_cast<long long>(T) + 1) * t * t * nn + t * t * t + nn;
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  out << kTraceCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& r : trace) {
    out << r.k << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ','
        << opt(r.fprime_norm) << ',' << opt(r.y_grad_norm) << ',' << opt(r.alpha) << ','
        << opt(r.step_norm) << ',' << r.tau << ',';
    if (r.T) out << *r.T;
    out << ',' << opt(r.delta_est) << ',' << r.grad_evals << ',' << r.hvp_calls << ','
        << r.inner_iters << ',';
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    out << wall << '\n';
  }
  return out.str();
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, true);  /* allow comments */
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) bad("config", "top level must be an object");
  check_keys(j, "", {"problem", "psi", "x0", "runs", "output", "seed", "parallelism"});

  ExperimentConfig cfg;
  if (!j.contains("problem")) bad("problem", "missing");
  cfg.problem = parse_problem(j["problem"], "problem");

  if (j.contains("psi")) {
    cfg.psi = parse_psi(j["psi"], "psi");
    cfg.has_psi = true;
  }
  cfg.x0 = get_vec(j, "x0", "");

  if (!j.contains("runs") || !j["runs"].is_array() || j["runs"].empty())
    bad("runs", "must be non-empty");
  std::size_t dense_runs = 0;
  for (std::size_t i = 0; i < j["runs"].size(); ++i) {
    const std::string path = "runs[" + std::to_string(i) + "]";
    const json& jr = j["runs"][i];
    if (!jr.is_object()) bad(path, "expected an object");
    RunSpec run;
    run.name = get_str(jr, "name", path, "");
    if (run.name.empty()) bad(join_path(path, "name"), "missing or empty");
    if (run.name.find('/') != std::string::npos || run.name.find('\\') != std::string::npos)
      bad(join_path(path, "name"), "must not contain path separators");
    run.solver = parse_solver(jr, path, &run.dense_reference);
    if (run.dense_reference) ++dense_runs;
    if (cfg.has_psi && !cfg.psi.is_zero() && run.solver.mode != SolverMode::Composite)
      bad(join_path(path, "mode"), "must be \"composite\" when psi is present");
    for (const auto& prev : cfg.runs)
      if (prev.name == run.name) bad("runs", "duplicate name '" + run.name + "'");
    cfg.runs.push_back(std::move(run));
  }
  if (dense_runs > 1) bad("runs", "at most one dense-reference run per experiment");

  if (j.contains("output")) {
    const json& jo = j["output"];
    if (!jo.is_object()) bad("output", "expected an object");
    check_keys(jo, "output", {"directory", "formats"});
    cfg.output_dir = get_str(jo, "directory", "output", ".");
    if (jo.contains("formats")) {
      if (!jo["formats"].is_array()) bad("output.formats", "expected an array");
      cfg.write_csv = false;
      cfg.write_json = false;
      for (const auto& f : jo["formats"]) {
        if (!f.is_string()) bad("output.formats", "expected strings");
        const std::string s = f.get<std::string>();
        if (s == "csv")
          cfg.write_csv = true;
        else if (s == "json")
          cfg.write_json = true;
        else
          bad("output.formats", "unknown format '" + s + "'");
      }
      if (!cfg.write_csv && !cfg.write_json) bad("output.formats", "must be non-empty");
    }
  }
  cfg.seed = get_u64(j, "seed", "", 0);
  cfg.parallelism = static_cast<int>(get_u64(j, "parallelism", "", 1));
  if (cfg.parallelism < 1) bad("parallelism", "must be >= 1");
  return cfg;
}

namespace {

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& ov) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.check_mode)
    for (auto& r : cfg.runs) r.solver.check_mode = *ov.check_mode;
}

/* Per-run power seeds are drawn from the experiment seed in run order, so a
 * config (or its manifest echo) fully determines every stream. */
void resolve_run_seeds(ExperimentConfig& cfg) {
  SplitMix64 master(cfg.seed);
  for (auto& r : cfg.runs) r.solver.power.seed = master.next_u64();
}

struct RunOutcome {
  SolveResult result;
  std::string error;
  bool failed = false;
};

}  // namespace

int run_experiment(const std::string& config_path, const CliOverrides& ov) {
  ExperimentConfig cfg;
  std::unique_ptr<ObjectiveOracle> oracle;
  std::vector<double> x0;
  try {
    cfg = parse_experiment_config(read_file(config_path));
    apply_overrides(cfg, ov);
    resolve_run_seeds(cfg);
    oracle = build_oracle(cfg.problem);
    x0 = cfg.x0.empty() ? default_x0(cfg.problem, *oracle) : cfg.x0;
    if (x0.size() != oracle->dim()) bad("x0", "dimension mismatch with the problem");
    cfg.x0 = x0;  /* echo the resolved start so the manifest re-runs exactly */
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specgrad run: config error: %s\n", e.what());
    return 2;
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) {
    std::fprintf(stderr, "specgrad run: cannot create output directory %s: %s\n",
                 cfg.output_dir.c_str(), ec.message().c_str());
    return 2;
  }

  std::vector<RunOutcome> outcomes(cfg.runs.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), cfg.runs.size());
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.runs.size()) return;
      RunOutcome& out = outcomes[i];
      try {
        if (cfg.has_psi) {
          CompositeOracle co{oracle.get(), cfg.psi};
          out.result = minimize(co, x0, cfg.runs[i].solver);
        } else {
          out.result = minimize(*oracle, x0, cfg.runs[i].solver);
        }
        if (cfg.write_csv) {
          std::ofstream f(std::filesystem::path(cfg.output_dir) /
                          (cfg.runs[i].name + ".csv"));
          f << trace_to_csv(out.result.trace);
          if (!f) throw std::runtime_error("failed to write trace CSV");
        }
        if (cfg.write_json) {
          json jt = json::array();
          for (const auto& r : out.result.trace) {
            json row;
            row["iter"] = r.k;
            row["f"] = r.f;
            row["grad_norm"] = r.grad_norm;
            row["fprime_norm"] = r.fprime_norm ? json(*r.fprime_norm) : json();
            row["y_grad_norm"] = r.y_grad_norm ? json(*r.y_grad_norm) : json();
            row["alpha"] = r.alpha ? json(*r.alpha) : json();
            row["step_norm"] = r.step_norm ? json(*r.step_norm) : json();
            row["tau"] = r.tau;
            row["T"] = r.T ? json(*r.T) : json();
            row["delta_est"] = r.delta_est ? json(*r.delta_est) : json();
            row["grad_evals"] = r.grad_evals;
            row["hvp_calls"] = r.hvp_calls;
            row["inner_iters"] = r.inner_iters;
            row["wall_ms"] = r.wall_ms;
            jt.push_back(std::move(row));
          }
          std::ofstream f(std::filesystem::path(cfg.output_dir) /
                          (cfg.runs[i].name + ".json"));
          f << json{{"trace", std::move(jt)}}.dump(2) << '\n';
          if (!f) throw std::runtime_error("failed to write trace JSON");
        }
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  json manifest;
  manifest["specgrad_version"] = kVersion;
  manifest["config"] = config_to_json(cfg);
  json resolved;
  resolved["dim"] = oracle->dim();
  json seeds = json::object();
  for (const auto& r : cfg.runs) seeds[r.name] = r.solver.power.seed;
  resolved["run_seeds"] = std::move(seeds);
  manifest["resolved"] = std::move(resolved);

  bool any_failed = false;
  json jruns = json::array();
  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    const RunOutcome& out = outcomes[i];
    json r;
    r["name"] = cfg.runs[i].name;
    if (out.failed) {
      any_failed = true;
      r["error"] = out.error;
    } else {
      r["termination"] = to_string(out.result.reason);
      r["iterations"] = out.result.iterations;
      r["f_final"] = out.result.f_final;
      r["best_stopping_norm"] = out.result.best_stopping_norm;
      r["best_iter"] = out.result.best_iter;
      r["f_min"] = out.result.f_min;
      r["grad_evals"] = out.result.grad_evals;
      r["hvp_calls"] = out.result.hvp_calls;
      r["f_evals"] = out.result.f_evals;
      r["inner_iters"] = out.result.inner_iters;
      r["violations"] = out.result.violations.size();
      if (!out.result.trace.empty()) r["wall_ms"] = out.result.trace.back().wall_ms;
    }
    jruns.push_back(std::move(r));
  }
  manifest["runs"] = std::move(jruns);

  {
    std::ofstream f(std::filesystem::path(cfg.output_dir) / "manifest.json");
    f << manifest.dump(2) << '\n';
    if (!f) {
      std::fprintf(stderr, "specgrad run: failed to write manifest\n");
      return 1;
    }
  }

  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    if (outcomes[i].failed)
      std::fprintf(stderr, "specgrad run: run '%s' failed: %s\n", cfg.runs[i].name.c_str(),
                   outcomes[i].error.c_str());
    else
      std::fprintf(stdout, "%s: %s after %zu iterations, f = %.12g, best norm = %.6g\n",
                   cfg.runs[i].name.c_str(), to_string(outcomes[i].result.reason),
                   outcomes[i].result.iterations, outcomes[i].result.f_final,
                   outcomes[i].result.best_stopping_norm);
  }
  return any_failed ? 1 : 0;
}

int spectrum_command(const std::string& config_path, std::size_t samples, double radius,
                     const std::string& output_prefix, const CliOverrides& ov) {
  ProblemSpec spec;
  std::unique_ptr<ObjectiveOracle> oracle;
  std::vector<double> center;
  std::uint64_t seed = 0;
  try {
    json j = json::parse(read_file(config_path), nullptr, true, true);
    if (!j.is_object() || !j.contains("problem")) bad("problem", "missing");
    spec = parse_problem(j["problem"], "problem");
    center = get_vec(j, "x0", "");
    seed = get_u64(j, "seed", "", 0);
    if (ov.seed) seed = *ov.seed;
    oracle = build_oracle(spec);
    if (center.empty()) center = default_x0(spec, *oracle);
    if (center.size() != oracle->dim()) bad("x0", "dimension mismatch with the problem");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specgrad spectrum: config error: %s\n", e.what());
    return 2;
  }
  if (oracle->dim() > dense_limit()) {
    std::fprintf(stderr,
                 "specgrad spectrum: dimension %zu exceeds dense_limit %zu "
                 "(set SPECGRAD_DENSE_LIMIT to raise it)\n",
                 oracle->dim(), dense_limit());
    return 2;
  }

  BallSampler sampler;
  sampler.center = center;
  sampler.radius = radius;
  sampler.count = samples == 0 ? 10 : samples;
  sampler.seed = seed;

  SpectrumReport rep;
  try {
    rep = sample_spectrum(*oracle, sampler);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specgrad spectrum: %s\n", e.what());
    return 1;
  }

  std::string prefix = output_prefix;
  if (ov.output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*ov.output_dir, ec);
    prefix = (std::filesystem::path(*ov.output_dir) /
              std::filesystem::path(output_prefix).filename())
                 .string();
  }

  json out;
  out["problem"] = problem_to_json(spec);
  out["samples"] = rep.points.size();
  out["empirical_grade"] = rep.certified_grade;
  out["tol_eig"] = rep.tol_eig;
  out["sigma_tau"] = [&] {
    /* sigma_tau[n] can be -inf for convex problems; JSON has no inf. */
    json a = json::array();
    for (double v : rep.sigma_tau)
      a.push_back(std::isfinite(v) ? json(v) : json());
    return a;
  }();
  out["sigma_tau_plus"] = rep.sigma_tau_plus;
  out["eigenvalues"] = rep.eigenvalues;
  {
    std::ofstream f(prefix + ".json");
    f << out.dump(2) << '\n';
    if (!f) {
      std::fprintf(stderr, "specgrad spectrum: failed to write %s.json\n", prefix.c_str());
      return 1;
    }
  }
  {
    std::ofstream f(prefix + ".csv");
    f << "sample";
    for (std::size_t i = 1; i <= oracle->dim(); ++i) f << ",lambda_" << i;
    f << '\n';
    for (std::size_t s = 0; s < rep.eigenvalues.size(); ++s) {
      f << s;
      for (double v : rep.eigenvalues[s]) f << ',' << format_double(v);
      f << '\n';
    }
    if (!f) {
      std::fprintf(stderr, "specgrad spectrum: failed to write %s.csv\n", prefix.c_str());
      return 1;
    }
  }
  std::fprintf(stdout, "empirical grade %zu of %zu (tol_eig %.3g) over %zu samples\n",
               rep.certified_grade, oracle->dim(), rep.tol_eig, rep.points.size());
  return 0;
}

namespace {

struct TraceSummary {
  std::string name;
  std::vector<std::optional<long long>> iters_to;  /* per ladder epsilon */
  double final_f = 0.0;
  double final_norm = 0.0;
  long long hvp_total = 0;
  std::optional<long long> flops;
};

constexpr double kLadder[] = {1e-2, 1e-4, 1e-6, 1e-8};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<std::size_t> manifest_dim(const std::string& trace_path) {
  const auto dir = std::filesystem::path(trace_path).parent_path();
  const auto mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) return std::nullopt;
  try {
    json m = json::parse(in);
    if (m.contains("resolved") && m["resolved"].contains("dim"))
      return m["resolved"]["dim"].get<std::size_t>();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

}  // namespace

int compare_command(const std::vector<std::string>& trace_files,
                    std::optional<std::size_t> dim_hint) {
  if (trace_files.size() < 2) {
    std::fprintf(stderr, "specgrad compare: need at least two traces\n");
    return 2;
  }

  const std::vector<std::string> schema = split_csv_line(kTraceCsvHeader);
  std::vector<TraceSummary> summaries;

  for (const auto& path : trace_files) {
    std::ifstream in(path);
    if (!in) {
      std::fprintf(stderr, "specgrad compare: cannot open %s\n", path.c_str());
      return 2;
    }
    std::string line;
    if (!std::getline(in, line)) {
      std::fprintf(stderr, "specgrad compare: %s: empty file\n", path.c_str());
      return 2;
    }
    const auto header = split_csv_line(line);
    std::vector<std::size_t> col(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
      bool found = false;
      for (std::size_t h = 0; h < header.size(); ++h)
        if (header[h] == schema[i]) {
          col[i] = h;
          found = true;
          break;
        }
      if (!found) {
        std::fprintf(stderr, "specgrad compare: %s: missing column %s\n", path.c_str(),
                     schema[i].c_str());
        return 2;
      }
    }
    auto idx = [&](const char* name) {
      for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i] == name) return col[i];
      return std::size_t{0};
    };
    const std::size_t c_iter = idx("iter"), c_f = idx("f"), c_gn = idx("grad_norm");
    const std::size_t c_fp = idx("fprime_norm"), c_yn = idx("y_grad_norm");
    const std::size_t c_tau = idx("tau"), c_T = idx("T"), c_hvp = idx("hvp_calls");

    TraceSummary s;
    s.name = std::filesystem::path(path).stem().string();
    s.iters_to.assign(std::size(kLadder), std::nullopt);
    bool use_fp = false, use_yn = false, any_row = false;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != header.size()) {
        std::fprintf(stderr, "specgrad compare: %s: ragged row\n", path.c_str());
        return 2;
      }
      if (!cells[c_fp].empty()) use_fp = true;
      if (!cells[c_yn].empty()) use_yn = true;
      any_row = true;
      rows.push_back(std::move(cells));
    }
    if (!any_row) {
      std::fprintf(stderr, "specgrad compare: %s: no data rows\n", path.c_str());
      return 2;
    }

    long long flops = 0;
    bool flops_ok = dim_hint.has_value();
    std::size_t n = dim_hint.value_or(0);
    if (!flops_ok) {
      if (auto d = manifest_dim(path)) {
        n = *d;
        flops_ok = true;
      }
    }
    for (const auto& cells : rows) {
      const long long iter = std::strtoll(cells[c_iter].c_str(), nullptr, 10);
      const std::string& norm_cell =
          use_fp ? cells[c_fp] : (use_yn ? cells[c_yn] : cells[c_gn]);
      if (!norm_cell.empty()) {
        const double norm = std::strtod(norm_cell.c_str(), nullptr);
        for (std::size_t e = 0; e < std::size(kLadder); ++e)
          if (!s.iters_to[e] && norm <= kLadder[e]) s.iters_to[e] = iter;
        s.final_norm = norm;
      }
      s.final_f = std::strtod(cells[c_f].c_str(), nullptr);
      s.hvp_total = std::strtoll(cells[c_hvp].c_str(), nullptr, 10);
      if (flops_ok && !cells[c_T].empty()) {
        const auto tau = static_cast<std::size_t>(std::strtoull(cells[c_tau].c_str(), nullptr, 10));
        const auto T = static_cast<std::size_t>(std::strtoull(cells[c_T].c_str(), nullptr, 10));
        flops += modeled_flops_per_iter(tau, n, T);
      } else if (flops_ok) {
        /* tau = 0 rows and the terminal row have no T; count the O(n) term
         * for step rows only (terminal rows have empty alpha too). */
        const auto tau = static_cast<std::size_t>(std::strtoull(cells[c_tau].c_str(), nullptr, 10));
        if (!cells[idx("alpha")].empty()) flops += modeled_flops_per_iter(tau, n, 0);
      }
    }
    if (flops_ok) s.flops = flops;
    summaries.push_back(std::move(s));
  }

  std::printf("%-24s", "run");
  for (double eps : kLadder) std::printf("  it<=%-8.0e", eps);
  std::printf("  %-14s  %-12s  %-12s  %-12s\n", "final_f", "final_norm", "hvp_calls",
              "modeled_flops");
  for (const auto& s : summaries) {
    std::printf("%-24s", s.name.c_str());
    for (const auto& it : s.iters_to) {
      if (it)
        std::printf("  %-12lld", *it);
      else
        std::printf("  %-12s", "-");
    }
    std::printf("  %-14.6e  %-12.4e  %-12lld  ", s.final_f, s.final_norm, s.hvp_total);
    if (s.flops)
      std::printf("%lld\n", *s.flops);
    else
      std::printf("-\n");
  }
  return 0;
}

int grade_check_command(const std::string& config_path, std::size_t samples,
                        std::optional<std::size_t> expect_grade, const CliOverrides& ov) {
  try {
    json j = json::parse(read_file(config_path), nullptr, true, true);
    if (!j.is_object() || !j.contains("problem")) bad("problem", "missing");
    const ProblemSpec spec = parse_problem(j["problem"], "problem");
    auto oracle = build_oracle(spec);
    if (oracle->dim() > dense_limit()) {
      std::fprintf(stderr, "specgrad grade-check: dimension %zu exceeds dense_limit %zu\n",
                   oracle->dim(), dense_limit());
      return 2;
    }
    std::vector<double> center = get_vec(j, "x0", "");
    if (center.empty()) center = default_x0(spec, *oracle);
    std::uint64_t seed = get_u64(j, "seed", "", 0);
    if (ov.seed) seed = *ov.seed;

    BallSampler sampler;
    sampler.center = center;
    sampler.count = samples == 0 ? 20 : samples;
    sampler.seed = seed;
    const auto points = sample_ball(sampler, oracle->dim());

    if (j.contains("problem_g")) {
      const ProblemSpec spec_g = parse_problem(j["problem_g"], "problem_g");
      auto g = build_oracle(spec_g);
      const GradingRuleResult rr = check_grading_rule(*oracle, *g, points);
      std::fprintf(stdout,
                   "grade(f) = %zu, grade(g) = %zu, grade(f + g) = %zu, "
                   "bound i + j - n = %lld: %s\n",
                   rr.grade_f, rr.grade_g, rr.grade_sum,
                   static_cast<long long>(rr.grade_f + rr.grade_g) -
                       static_cast<long long>(oracle->dim()),
                   rr.pass ? "pass" : "FAIL");
      return rr.pass ? 0 : 1;
    }

    const SpectrumReport rep = sample_spectrum(*oracle, points);
    std::fprintf(stdout, "empirical grade %zu of %zu (tol_eig %.3g) over %zu samples\n",
                 rep.certified_grade, oracle->dim(), rep.tol_eig, points.size());
    if (expect_grade) {
      if (rep.certified_grade >= *expect_grade) {
        std::fprintf(stdout, "expected grade >= %zu: pass\n", *expect_grade);
        return 0;
      }
      std::fprintf(stdout, "expected grade >= %zu: FAIL\n", *expect_grade);
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specgrad grade-check: %s\n", e.what());
    return 2;
  }
}

}  // namespace specgrad::harness
