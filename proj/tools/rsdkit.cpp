#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rsd/io.hpp"

namespace {

void add_criticals_options(CLI::App* cmd, rsd::RunSpec& spec) {
  cmd->add_option("--criticals", spec.criticals,
                  "inline critical values, increasing (e.g. 1.645,1.96)")
      ->delimiter(',');
  cmd->add_option("--criticals-file", spec.criticals_file, "file of critical values");
  cmd->add_option("--generate", spec.criticals_source,
                  "generate constants: bh (step-up scale) or bg (step-down scale)")
      ->check(CLI::IsMember({"bh", "bg"}));
  cmd->add_option("--alpha", spec.alpha, "level for generated constants")->capture_default_str();
}

void add_problem_options(CLI::App* cmd, rsd::RunSpec& spec) {
  cmd->add_option("--model", spec.model, "multinomial | normal | rank")
      ->check(CLI::IsMember({"multinomial", "normal", "rank"}))
      ->capture_default_str();
  cmd->add_option("--family", spec.family, "all-pairwise | change-point | tvc")
      ->check(CLI::IsMember({"all-pairwise", "change-point", "tvc", "treatments-vs-control"}))
      ->capture_default_str();
  cmd->add_option("--sided", spec.sided, "one | two (default: one for change-point, else two)")
      ->check(CLI::IsMember({"one", "two"}));
  cmd->add_option("--control", spec.control, "1-based control population (default: last row)");
  cmd->add_option("--input,-i", spec.input_path, "data file (csv or json)");
  cmd->add_option("--format", spec.format, "csv | json (default: by extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--pooling", spec.pooling, "multinomial row pooling: average | sum")
      ->check(CLI::IsMember({"average", "sum"}))
      ->capture_default_str();
  cmd->add_option("--rank-n", spec.rank_n, "per-population sample size for the rank model");
  cmd->add_option("--rank-w", spec.rank_w, "override the joint-rank variance scale w");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stepwise multiple testing of pairwise differences with the interval property"};
  app.require_subcommand(1);

  rsd::RunSpec spec;
  if (const char* env_seed = std::getenv("RSDKIT_SEED")) spec.seed = std::strtoull(env_seed, nullptr, 10);

  auto* analyze = app.add_subcommand("analyze", "run a procedure on a data table");
  add_problem_options(analyze, spec);
  add_criticals_options(analyze, spec);
  analyze->add_option("--procedure", spec.procedure, "rsd | step-down | step-up")
      ->check(CLI::IsMember({"rsd", "step-down", "step-up"}))
      ->capture_default_str();
  analyze->add_option("--output,-o", spec.output_path, "JSON report path");
  analyze->add_option("--seed", spec.seed, "recorded in the report");
  analyze->callback([&] { spec.subcommand = "analyze"; });

  auto* audit = app.add_subcommand("audit", "ray-scan a procedure for interval-property violations");
  add_problem_options(audit, spec);
  add_criticals_options(audit, spec);
  audit->add_option("--procedure", spec.procedure, "rsd | step-down | step-up")
      ->check(CLI::IsMember({"rsd", "step-down", "step-up"}))
      ->capture_default_str();
  audit->add_option("--builtin", spec.builtin, "audit a built-in instance: figure1 | figure2")
      ->check(CLI::IsMember({"figure1", "figure2"}));
  audit->add_option("--pair", spec.pair, "hypothesis to scan, 1-based i,j");
  audit->add_option("--grid", spec.grid, "ray offsets starting at 0, increasing")->delimiter(',');
  audit->add_flag("--survey", spec.survey, "clip the grid at the data boundary instead of failing");
  audit->add_option("--random", spec.random_instances,
                    "certify this many random instances of the rsd procedure");
  audit->add_option("--seed", spec.seed, "master seed for --random");
  audit->add_option("--output,-o", spec.output_path, "JSON violation report path");
  audit->callback([&] { spec.subcommand = "audit"; });

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of rsd and step-up");
  simulate->add_option("--config", spec.config_path, "JSON config file");
  simulate->add_option("--k", spec.sim_k, "population count (treatments + control)")
      ->capture_default_str();
  simulate->add_option("--blocks", spec.blocks, "treatment means, e.g. 1-5:2.0,6-10:-2.0");
  simulate->add_option("--iterations", spec.iterations, "Monte Carlo iterations")
      ->capture_default_str();
  simulate->add_option("--rsd-alpha", spec.rsd_alpha, "level for the rsd constants")
      ->capture_default_str();
  simulate->add_option("--su-alpha", spec.su_alpha, "level for the step-up constants")
      ->capture_default_str();
  simulate->add_option("--seed", spec.seed, "RNG seed");
  simulate->add_flag("--serial", spec.serial, "use the serial reference path");
  simulate->add_option("--output,-o", spec.output_path, "CSV output path");
  simulate->callback([&] { spec.subcommand = "simulate"; });

  auto* reproduce = app.add_subcommand("reproduce", "rerun the published study tables");
  reproduce->add_option("--table", spec.table, "study table: 5 or 6")
      ->check(CLI::IsMember({5, 6}))
      ->capture_default_str();
  reproduce->add_option("--rows", spec.rows, "row numbers 1..17 (default: all)")->delimiter(',');
  reproduce->add_option("--iterations", spec.iterations, "Monte Carlo iterations")
      ->capture_default_str();
  reproduce->add_option("--seed", spec.seed, "RNG seed");
  reproduce->add_flag("--serial", spec.serial, "use the serial reference path");
  reproduce->add_option("--output,-o", spec.output_path, "CSV output path");
  reproduce->callback([&] { spec.subcommand = "reproduce"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  return rsd::run(spec, std::cout, std::cerr);
}
