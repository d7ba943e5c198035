/*
 * specgrad command-line front end.
 *
 *   specgrad run <config.json>            solver sweep, traces + manifest
 *   specgrad spectrum <config.json>       sampled Hessian spectra report
 *   specgrad compare <trace.csv>...       summary table across traces
 *   specgrad grade-check <config.json>    empirical grade certification
 *
 * Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments.
 */
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specgrad/harness.h"
#include "specgrad/kernels.h"

namespace {

specgrad::harness::CliOverrides make_overrides(const std::optional<std::uint64_t>& seed,
                                               const std::string& output_dir,
                                               const std::string& check_mode) {
  specgrad::harness::CliOverrides ov;
  ov.seed = seed;
  if (!output_dir.empty()) ov.output_dir = output_dir;
  if (check_mode == "off")
    ov.check_mode = specgrad::CheckMode::Off;
  else if (check_mode == "warn")
    ov.check_mode = specgrad::CheckMode::Warn;
  else if (check_mode == "strict")
    ov.check_mode = specgrad::CheckMode::Strict;
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral preconditioning for gradient methods"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "specgrad 1.0.0");

  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string check_mode;
  auto add_common = [&](CLI::App* cmd, bool with_check) {
    cmd->add_option("--seed", seed, "override the experiment seed");
    cmd->add_option("--output-dir", output_dir, "override the output directory");
    if (with_check)
      cmd->add_option("--check-mode", check_mode, "per-step inequality checks")
          ->check(CLI::IsMember({"off", "warn", "strict"}));
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the solver sweep from a config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  add_common(run, true);

  std::string spectrum_config, spectrum_prefix = "spectrum";
  std::size_t spectrum_samples = 10;
  double spectrum_radius = 0.0;
  auto* spectrum = app.add_subcommand("spectrum", "sample Hessian spectra around x0");
  spectrum->add_option("config", spectrum_config, "problem config (JSON)")->required();
  spectrum->add_option("--samples", spectrum_samples, "number of sample points");
  spectrum->add_option("--radius", spectrum_radius, "ball radius (<= 0: 2||x0|| + 1)");
  spectrum->add_option("--output-prefix", spectrum_prefix,
                       "prefix for the .json/.csv outputs");
  add_common(spectrum, false);

  std::vector<std::string> trace_files;
  std::optional<std::size_t> dim_hint;
  auto* compare = app.add_subcommand("compare", "summarize two or more trace CSVs");
  compare->add_option("traces", trace_files, "trace CSV files");
  compare->add_option("--dim", dim_hint,
                      "problem dimension for modeled flops (else read from manifest)");

  std::string grade_config;
  std::size_t grade_samples = 20;
  std::optional<std::size_t> expect_grade;
  auto* grade = app.add_subcommand("grade-check", "certify the empirical grade");
  grade->add_option("config", grade_config, "problem config (JSON)")->required();
  grade->add_option("--samples", grade_samples, "number of sample points");
  grade->add_option("--expect", expect_grade, "fail (exit 1) when grade is below this");
  add_common(grade, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto ov = make_overrides(seed, output_dir, check_mode);
  std::fprintf(stderr, "specgrad: kernels backend %s\n",
               specgrad::kernels::backend_name(specgrad::kernels::active_backend()));

  if (run->parsed()) return specgrad::harness::run_experiment(config_path, ov);
  if (spectrum->parsed())
    return specgrad::harness::spectrum_command(spectrum_config, spectrum_samples,
                                               spectrum_radius, spectrum_prefix, ov);
  if (compare->parsed()) return specgrad::harness::compare_command(trace_files, dim_hint);
  if (grade->parsed())
    return specgrad::harness::grade_check_command(grade_config, grade_samples, expect_grade,
                                                  ov);
  return 2;
}
