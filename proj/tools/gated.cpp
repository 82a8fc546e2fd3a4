#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gated/cli.hpp"

namespace {

void common(CLI::App* app, gated::cli::RunConfig& c) {
  app->add_option("--order", c.order, "truncation order N (>= 4)");
  app->add_option("--tol", c.tol, "Cauchy tolerance of the truncation ladder");
  app->add_flag("--fixed-order", c.fixed_order, "solve at exactly N instead of the ladder");
  app->add_option("--json", c.json_path, "write the JSON block here instead of stdout");
}

void mg_params(CLI::App* app, gated::cli::RunConfig& c) {
  app->add_option("--lambda", c.lambda, "arrival rate");
  app->add_option("--mu", c.mu, "exponential service rate");
  app->add_option("--service", c.service_path, "service law as JSON");
}

void gi_params(CLI::App* app, gated::cli::RunConfig& c) {
  app->add_option("--arrivals", c.arrivals_path, "interarrival law as JSON");
}

}  // namespace

int main(int argc, char** argv) {
  gated::cli::RunConfig cfg;
  std::string config_path;
  double rho = 0.0;
  double gi_mu = 1.0;

  CLI::App app{"Light-traffic analysis and simulation of gated infinite-server queues"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_path, "JSON file whose keys override the flags");

  auto* amg = app.add_subcommand("analyze-mg", "stage-length moments and density, M/G/inf");
  mg_params(amg, cfg);
  common(amg, cfg);
  amg->add_option("--csv", cfg.csv_path,
                  "write (y, f_series, f_fixedpoint); '-' puts it on stdout in place of the JSON");
  amg->add_option("--points", cfg.points, "CSV grid points");
  amg->add_option("--y-max", cfg.y_max, "CSV grid upper end (default: service 1-1e-6 quantile)");

  auto* agi = app.add_subcommand("analyze-gi", "factorial moments and pmf, GI/M/inf");
  agi->add_option("--rho", rho, "traffic intensity with Poisson arrivals");
  agi->add_option("--mu", gi_mu, "service rate");
  agi->add_option("--lambda", cfg.lambda, "Poisson arrival rate (when --rho is absent)");
  gi_params(agi, cfg);
  common(agi, cfg);
  agi->add_option("--csv", cfg.csv_path, "write (i, pi_i) here instead of stdout");
  agi->add_option("--i-max", cfg.i_max, "largest state in the pmf");

  auto* simc = app.add_subcommand("simulate", "simulate stages and summarize them");
  simc->add_option("--model", cfg.model, "mg or gi")->check(CLI::IsMember({"mg", "gi"}));
  mg_params(simc, cfg);
  gi_params(simc, cfg);
  simc->add_option("--rho", rho, "traffic intensity (overrides --lambda)");
  simc->add_option("--stages", cfg.stages, "stages after burn-in");
  simc->add_option("--seed", cfg.seed, "random seed");
  simc->add_option("--burn-in", cfg.burn_in, "initial stages excluded from statistics");
  simc->add_option("--bins", cfg.bins, "histogram bins");
  simc->add_option("--y-max", cfg.y_max, "histogram range (default: largest active phase)");
  simc->add_option("--trace", cfg.trace_path, "write the trace CSV (n, Y, K, waiting_phase, M); '-' for stdout");
  simc->add_option("--json", cfg.json_path, "write the JSON stats here instead of stdout");

  auto* dom = app.add_subcommand("dominance", "diagonal-dominance report of a moment system");
  dom->add_option("--model", cfg.model, "mg or gi")->check(CLI::IsMember({"mg", "gi"}));
  dom->add_option("--rho", rho, "traffic intensity");
  mg_params(dom, cfg);
  gi_params(dom, cfg);
  dom->add_option("--order", cfg.order, "probed order N");
  dom->add_option("--cutoff", cfg.tail_cutoff, "column cutoff (default 4N)");
  dom->add_option("--json", cfg.json_path, "write the report here instead of stdout");

  auto* cmp = app.add_subcommand("compare", "analytic against simulated series as CSV");
  cmp->add_option("--what", cfg.what, "density | mean-stage | pmf")
      ->check(CLI::IsMember({"density", "mean-stage", "pmf"}));
  cmp->add_option("--rho", rho, "traffic intensity (pmf: Poisson GI/M)");
  cmp->add_option("--rho-grid", cfg.rho_grid, "mean-stage traffic grid");
  mg_params(cmp, cfg);
  gi_params(cmp, cfg);
  common(cmp, cfg);
  cmp->add_option("--stages", cfg.stages, "simulated stages after burn-in");
  cmp->add_option("--seed", cfg.seed, "random seed");
  cmp->add_option("--burn-in", cfg.burn_in, "initial stages excluded from statistics");
  cmp->add_option("--bins", cfg.bins, "histogram bins");
  cmp->add_option("--y-max", cfg.y_max, "histogram range");
  cmp->add_option("--i-max", cfg.i_max, "largest state compared");
  cmp->add_option("--csv", cfg.csv_path, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    gated::cli::detail::error_json(std::cerr, "invalid_config", e.what());
    return gated::cli::invalid_config;
  }

  for (auto* sub : app.get_subcommands()) {
    cfg.command = sub->get_name();
    const auto* opt = sub->get_option_no_throw("--rho");
    if (opt && opt->count() > 0) cfg.rho = rho;
  }
  if (cfg.command == "analyze-gi") cfg.mu = gi_mu;
  if (!config_path.empty()) {
    try {
      gated::cli::apply_config(cfg, gated::io::read_json_file(config_path));
    } catch (const gated::error& e) {
      gated::cli::detail::error_json(std::cerr, "invalid_config", e.what());
      return gated::cli::invalid_config;
    }
  }
  return gated::cli::run(cfg, std::cout, std::cerr);
}
