/*
 * Experiment front end: JSON configs, solver sweeps with per-run trace
 * files and a manifest, spectrum reports, trace comparison, and grade
 * checks.  Exit codes: 0 success, 1 runtime failure, 2 invalid config or
 * arguments.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specgrad/composite.h"
#include "specgrad/problems.h"
#include "specgrad/solver.h"

namespace specgrad::harness {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<CheckMode> check_mode;
};

struct RunSpec {
  std::string name;
  SolverConfig solver;
  bool dense_reference = false;
};

struct ExperimentConfig {
  ProblemSpec problem;
  Regularizer psi;
  bool has_psi = false;
  std::vector<double> x0;  /* empty = default_x0 */
  std::vector<RunSpec> runs;
  std::string output_dir = ".";
  bool write_csv = true;
  bool write_json = true;
  std::uint64_t seed = 0;
  int parallelism = 1;
};

/* Fixed trace CSV schema; absent quantities are empty fields. */
inline constexpr const char* kTraceCsvHeader =
    "iter,f,grad_norm,fprime_norm,y_grad_norm,alpha,step_norm,tau,T,delta_est,"
    "grad_evals,hvp_calls,inner_iters,wall_ms";

std::string trace_to_csv(const std::vector<TraceRecord>& trace);

/* Modeled per-iteration flop count, a pure function of (tau, n, T):
 * (T + 1) tau^2 n + tau^3 + n.  tau = 0 reduces to the O(n) gradient-descent
 * term. */
long long modeled_flops_per_iter(std::size_t tau, std::size_t n, std::size_t T);

/* Parse / validate an experiment config.  Throws std::invalid_argument with
 * a message naming the offending field. */
ExperimentConfig parse_experiment_config(const std::string& json_text);

/* Subcommand entry points (return process exit codes). */
int run_experiment(const std::string& config_path, const CliOverrides& ov);
int spectrum_command(const std::string& config_path, std::size_t samples, double radius,
                     const std::string& output_prefix, const CliOverrides& ov);
int compare_command(const std::vector<std::string>& trace_files,
                    std::optional<std::size_t> dim_hint);
int grade_check_command(const std::string& config_path, std::size_t samples,
                        std::optional<std::size_t> expect_grade, const CliOverrides& ov);

}  // namespace specgrad::harness
