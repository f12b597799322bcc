#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using sbridge::cli::RunConfig;
  CLI::App app{"Schroedinger bridges on directed graphs with incomplete marginals"};
  app.require_subcommand(1);

  RunConfig config;
  auto add_common = [&](CLI::App* sub, bool needs_prior) {
    sub->add_option("--graph", config.graph_path, "graph JSON")->required()->check(CLI::ExistingFile);
    auto* prior = sub->add_option("--prior", config.prior_path, "prior JSON")->check(CLI::ExistingFile);
    if (needs_prior) prior->required();
  };
  auto add_problem = [&](CLI::App* sub) {
    add_common(sub, true);
    auto* m = sub->add_option("--marginals", config.marginals_path, "partial marginal JSON")
                  ->check(CLI::ExistingFile);
    auto* mo = sub->add_option("--moments", config.moments_path, "moment spec JSON")
                   ->check(CLI::ExistingFile);
    m->excludes(mo);
    sub->add_option("--tol", config.tol, "stopping tolerance");
    sub->add_option("--max-iter", config.max_iter, "iteration cap");
  };

  auto* solve = app.add_subcommand("solve", "solve and write marginals.csv, solution.json, flows_t*.dot");
  add_problem(solve);
  solve->add_option("--out", config.output_dir, "output directory");
  solve->add_option("--format", config.formats, "csv, json, dot (repeatable)")->delimiter(',');

  auto* verify = app.add_subcommand("verify", "compare the solver against the brute-force oracle");
  add_problem(verify);

  auto* info = app.add_subcommand("prior-info", "print lambda_A, H_G and prior marginals");
  add_common(info, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sbridge::cli::kIoFailure;
  }

  if (*solve) return sbridge::cli::cmd_solve(config, std::cout, std::cerr);
  if (*verify) return sbridge::cli::cmd_verify(config, std::cout, std::cerr);
  return sbridge::cli::cmd_prior_info(config, std::cout, std::cerr);
}
