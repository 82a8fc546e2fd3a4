#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gated/errors.hpp"
#include "gated/giqueue.hpp"
#include "gated/io.hpp"
#include "gated/mgqueue.hpp"
#include "gated/quadrature.hpp"
#include "gated/simulator.hpp"

namespace gated::cli {

enum exit_code : int { ok = 0, invalid_config = 1, out_of_regime = 2, unconverged = 3 };

inline constexpr const char* output_dir_env = "GATED_OUTPUT_DIR";

struct RunConfig {
  /// analyze-mg | analyze-gi | simulate | dominance | compare
  std::string command;
  /// mg | gi, for simulate / dominance / compare
  std::string model = "mg";
  double lambda = 1.0;
  double mu = 2.5;
  std::optional<double> rho;
  /// JSON file with a service or arrival law
  std::string service_path;
  std::string arrivals_path;
  int order = 10;
  double tol = 1e-10;
  bool fixed_order = false;
  std::uint64_t seed = 1;
  std::int64_t stages = 100000;
  int burn_in = sim::default_burn_in;
  int bins = 64;
  double y_max = 0.0;
  int points = 2048;
  int i_max = 60;
  int tail_cutoff = 0;
  /// compare: density | mean-stage | pmf
  std::string what = "density";
  std::vector<double> rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::string json_path;
  std::string csv_path;
  std::string trace_path;
};

/// Applies a JSON object over `cfg`; keys mirror the long flag names with '-' as '_'.
inline void apply_config(RunConfig& cfg, const io::json& j) {
  if (!j.is_object()) throw invalid_config_error("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") cfg.command = v.get<std::string>();
      else if (key == "model") cfg.model = v.get<std::string>();
      else if (key == "lambda") cfg.lambda = v.get<double>();
      else if (key == "mu") cfg.mu = v.get<double>();
      else if (key == "rho") cfg.rho = v.get<double>();
      else if (key == "service") cfg.service_path = v.get<std::string>();
      else if (key == "arrivals") cfg.arrivals_path = v.get<std::string>();
      else if (key == "order") cfg.order = v.get<int>();
      else if (key == "tol") cfg.tol = v.get<double>();
      else if (key == "fixed_order") cfg.fixed_order = v.get<bool>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "stages") cfg.stages = v.get<std::int64_t>();
      else if (key == "burn_in") cfg.burn_in = v.get<int>();
      else if (key == "bins") cfg.bins = v.get<int>();
      else if (key == "y_max") cfg.y_max = v.get<double>();
      else if (key == "points") cfg.points = v.get<int>();
      else if (key == "i_max") cfg.i_max = v.get<int>();
      else if (key == "cutoff") cfg.tail_cutoff = v.get<int>();
      else if (key == "what") cfg.what = v.get<std::string>();
      else if (key == "rho_grid") cfg.rho_grid = v.get<std::vector<double>>();
      else if (key == "json") cfg.json_path = v.get<std::string>();
      else if (key == "csv") cfg.csv_path = v.get<std::string>();
      else if (key == "trace") cfg.trace_path = v.get<std::string>();
      else throw invalid_config_error("unknown config key '" + key + "'");
    }
  } catch (const io::json::type_error& e) {
    throw invalid_config_error(std::string("config value has the wrong type: ") + e.what());
  }
}

inline void validate(const RunConfig& c) {
  static const std::vector<std::string> commands = {"analyze-mg", "analyze-gi", "simulate",
                                                    "dominance", "compare"};
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end()) {
    throw invalid_config_error("unknown subcommand '" + c.command + "'");
  }
  if (c.model != "mg" && c.model != "gi") throw invalid_config_error("model must be mg or gi");
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw invalid_config_error(std::string(what) + " must be positive");
    }
  };
  positive(c.lambda, "lambda");
  positive(c.mu, "mu");
  if (c.rho) positive(*c.rho, "rho");
  if (c.order < 4) throw invalid_config_error("order must be >= 4");
  if (!(c.tol > 0.0 && c.tol < 1.0)) throw invalid_config_error("tol must lie in (0, 1)");
  if (c.stages < 1) throw invalid_config_error("stages must be >= 1");
  if (c.burn_in < 0) throw invalid_config_error("burn-in must be >= 0");
  if (c.bins < 1) throw invalid_config_error("bins must be >= 1");
  if (c.points < 2) throw invalid_config_error("points must be >= 2");
  if (c.i_max < 1) throw invalid_config_error("i-max must be >= 1");
  if (c.y_max < 0.0) throw invalid_config_error("y-max must be >= 0");
  if (c.tail_cutoff != 0 && c.tail_cutoff < c.order) {
    throw invalid_config_error("cutoff must be >= order");
  }
  if (c.what != "density" && c.what != "mean-stage" && c.what != "pmf") {
    throw invalid_config_error("compare --what must be density, mean-stage or pmf");
  }
  for (double r : c.rho_grid) positive(r, "rho grid entries");
}

/// Relative output paths resolve against $GATED_OUTPUT_DIR when it is set.
inline std::string resolve_output(const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  const char* dir = std::getenv(output_dir_env);
  if (p.is_absolute() || !dir || !*dir) return path;
  return (std::filesystem::path(dir) / p).string();
}

namespace detail {

/// stdout carries one artifact: the JSON block, unless the CSV already went there.
inline void emit_json(const RunConfig& c, const io::json& j, std::ostream& out,
                      bool csv_on_stdout = false) {
  if (!c.json_path.empty()) {
    io::write_json_file(resolve_output(c.json_path), j);
  } else if (!csv_on_stdout) {
    out << io::dump(j);
  }
}

inline void emit_csv(const std::string& path, const io::CsvTable& t, std::ostream& out) {
  if (path == "-") {
    io::write_csv(out, t);
  } else if (!path.empty()) {
    io::write_csv_file(resolve_output(path), t);
  }
}

inline ServiceDistribution service_of(const RunConfig& c) {
  if (!c.service_path.empty()) return io::service_from_json(io::read_json_file(c.service_path));
  return ServiceDistribution::exponential(c.mu);
}

inline gi::GiModel gi_model_of(const RunConfig& c) {
  if (!c.arrivals_path.empty()) {
    return gi::GiModel(io::arrivals_from_json(io::read_json_file(c.arrivals_path)), c.mu);
  }
  if (c.rho) return gi::GiModel::poisson(*c.rho, c.mu);
  return gi::GiModel(ArrivalDistribution::poisson(c.lambda), c.mu);
}

inline mg::MgModel mg_model_of(const RunConfig& c) {
  auto service = service_of(c);
  if (c.rho) {
    if (!service.is_exponential()) throw invalid_config_error("--rho needs exponential service");
    return mg::MgModel(*c.rho * service.rate(), service);
  }
  return mg::MgModel(c.lambda, service);
}

inline double plot_range(const RunConfig& c, const ServiceDistribution& s) {
  return c.y_max > 0.0 ? c.y_max : s.quantile(1.0 - 1e-6);
}

/// Mean series density over [a, b].
inline double bin_average(const mg::MgMomentSolution& sol, const mg::MgModel& m, double a,
                          double b) {
  return quad::integrate([&](double y) { return mg::stationary_density(sol, m, y); }, a, b) /
         (b - a);
}

inline int analyze_mg(const RunConfig& c, std::ostream& out) {
  const auto model = mg_model_of(c);
  const auto sol = mg::solve_stage_moments(model, c.order, c.tol, {0, c.fixed_order});
  auto j = io::to_json(sol, c.order);
  if (!sol.converged) {
    emit_json(c, j, out);
    return unconverged;
  }
  j["EK"] = mg::mean_customers_per_stage(sol);
  if (!c.csv_path.empty()) {
    const auto fp = mg::fixed_point_density(model, {}, 1e-12, 1000);
    j["diagnostics"]["fixed_point"] = {{"iterations", fp.iterations},
                                       {"converged", fp.converged},
                                       {"last_change", fp.last_change},
                                       {"max_mass_defect", fp.max_mass_defect}};
    io::CsvTable t;
    t.header = {"y", "f_series", "f_fixedpoint"};
    const double y_max = plot_range(c, model.service());
    for (int p = 0; p < c.points; ++p) {
      const double y = y_max * p / (c.points - 1);
      t.add_row(io::number_row({y, mg::stationary_density(sol, model, y), fp(y)}));
    }
    emit_csv(c.csv_path, t, out);
  }
  emit_json(c, j, out, c.csv_path == "-");
  return ok;
}

inline int analyze_gi(const RunConfig& c, std::ostream& out) {
  const auto model = gi_model_of(c);
  const auto sol = gi::solve_factorial_moments(model, c.order, c.tol, {0, c.fixed_order, false});
  if (!sol.converged) {
    emit_json(c, io::to_json(sol), out);
    return unconverged;
  }
  const auto pmf = gi::stationary_pmf_table(sol, model, c.i_max);
  // the pmf table is the primary artifact: stdout unless a path is given
  const std::string csv = c.csv_path.empty() ? "-" : c.csv_path;
  io::CsvTable t;
  t.header = {"i", "pi_i"};
  for (int i = 1; i <= c.i_max; ++i) {
    t.add_row({std::to_string(i), io::format_number(pmf.values[static_cast<std::size_t>(i - 1)])});
  }
  emit_csv(csv, t, out);
  emit_json(c, io::to_json(sol, &pmf), out, csv == "-");
  return ok;
}

inline sim::StageTrace simulate_model(const RunConfig& c) {
  if (c.model == "mg") {
    const auto m = mg_model_of(c);
    return sim::simulate_mg(m.lambda(), m.service(), c.stages, c.seed, c.burn_in);
  }
  const auto g = gi_model_of(c);
  return sim::simulate_gi(g.arrivals(), g.mu(), c.stages, c.seed, c.burn_in);
}

inline int simulate(const RunConfig& c, std::ostream& out) {
  const auto trace = simulate_model(c);
  double y_max = c.y_max;
  if (y_max <= 0.0) {
    for (const auto& r : trace.stationary()) y_max = std::max(y_max, r.M);
  }
  const auto stats = sim::empirical_stats(trace, c.bins, y_max);
  io::json j = {{"model", trace.model},
                {"descriptor", trace.descriptor},
                {"seed", trace.seed},
                {"burn_in", trace.burn_in},
                {"stages", c.stages},
                {"stats", io::to_json(stats)}};
  if (c.model == "gi") {
    try {
      j["drift"] = io::to_json(sim::drift_check(trace, gi_model_of(c)));
    } catch (const insufficient_data_error&) {
      j["drift"] = nullptr;
    }
  }
  emit_csv(c.trace_path, io::trace_table(trace), out);
  emit_json(c, j, out, c.trace_path == "-");
  return ok;
}

inline int dominance(const RunConfig& c, std::ostream& out) {
  linsys::CoefficientOracle oracle;
  int n = c.order;
  if (c.model == "mg") {
    const auto m = mg_model_of(c);
    oracle = mg::moment_oracle(m);
    if (m.exponential_service()) n = c.order + 1;
  } else {
    oracle = gi::factorial_oracle(gi_model_of(c));
  }
  const int cutoff = c.tail_cutoff > 0 ? std::max(c.tail_cutoff, n) : 4 * n;
  auto j = io::to_json(linsys::dominance_report(oracle, n, cutoff));
  j["system"] = oracle.name;
  emit_json(c, j, out);
  return ok;
}

inline int compare(const RunConfig& c, std::ostream& out) {
  io::CsvTable t;
  t.header = {"x", "analytic", "simulated", "se"};
  io::json j = {{"what", c.what}, {"seed", c.seed}, {"stages", c.stages}};
  int status = ok;
  if (c.what == "density") {
    const auto model = mg_model_of(c);
    const auto sol = mg::solve_stage_moments(model, c.order, c.tol, {0, c.fixed_order});
    if (!sol.converged) return unconverged;
    const auto trace = sim::simulate_mg(model.lambda(), model.service(), c.stages, c.seed, c.burn_in);
    const double y_max = plot_range(c, model.service());
    const auto stats = sim::empirical_stats(trace, c.bins, y_max);
    double sup = 0.0;
    for (int b = 0; b < c.bins; ++b) {
      const double lo = b * stats.bin_width;
      const double hi = lo + stats.bin_width;
      const double f = bin_average(sol, model, lo, hi);
      const auto k = static_cast<std::size_t>(b);
      sup = std::max(sup, std::abs(f - stats.density[k]));
      t.add_row(io::number_row({0.5 * (lo + hi), f, stats.density[k], stats.density_se[k]}));
    }
    j["sup_distance"] = sup;
    j["overflow_mass"] = stats.overflow_mass;
  } else if (c.what == "mean-stage") {
    for (double r : c.rho_grid) {
      const auto model = mg::MgModel::exponential(r * c.mu, c.mu);
      double analytic = std::nan("");
      try {
        const auto sol = mg::solve_stage_moments(model, c.order, c.tol, {0, c.fixed_order});
        analytic = sol.beta1;
        if (!sol.converged) status = unconverged;
      } catch (const out_of_regime_error&) {
        status = out_of_regime;
      }
      const auto trace = sim::simulate_mg(model.lambda(), model.service(), c.stages, c.seed, c.burn_in);
      const auto stats = sim::empirical_stats(trace, c.bins, 1.0);
      t.add_row(io::number_row({r, analytic, stats.mean_length.value, stats.mean_length.se}));
    }
  } else {
    const auto model = gi_model_of(c);
    const auto sol = gi::solve_factorial_moments(model, c.order, c.tol, {0, c.fixed_order, false});
    if (!sol.converged) return unconverged;
    const auto pmf = gi::stationary_pmf_table(sol, model, c.i_max);
    const auto trace = sim::simulate_gi(model.arrivals(), model.mu(), c.stages, c.seed, c.burn_in);
    const auto stats = sim::empirical_stats(trace, c.bins, 1.0);
    double tv = 0.0;
    for (int i = 1; i <= c.i_max; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double p = k < stats.pmf.size() ? stats.pmf[k] : 0.0;
      const double se = k < stats.pmf_se.size() ? stats.pmf_se[k] : 0.0;
      tv += std::abs(pmf.values[k - 1] - p);
      t.add_row({std::to_string(i), io::format_number(pmf.values[k - 1]), io::format_number(p),
                 io::format_number(se)});
    }
    j["total_variation"] = 0.5 * tv;
  }
  emit_csv(c.csv_path.empty() ? "-" : c.csv_path, t, out);
  if (!c.json_path.empty()) emit_json(c, j, out);
  return status;
}

inline void error_json(std::ostream& err, const char* kind, const std::string& message) {
  err << io::json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace detail

/// Runs one subcommand; diagnostics JSON goes to `out` unless a path is configured.
inline int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    validate(c);
    if (c.command == "analyze-mg") return detail::analyze_mg(c, out);
    if (c.command == "analyze-gi") return detail::analyze_gi(c, out);
    if (c.command == "simulate") return detail::simulate(c, out);
    if (c.command == "dominance") return detail::dominance(c, out);
    return detail::compare(c, out);
  } catch (const invalid_config_error& e) {
    detail::error_json(err, "invalid_config", e.what());
    return invalid_config;
  } catch (const out_of_regime_error& e) {
    detail::error_json(err, "out_of_regime", e.what());
    return out_of_regime;
  } catch (const unconverged_error& e) {
    detail::error_json(err, "unconverged", e.what());
    return unconverged;
  } catch (const domain_error& e) {
    detail::error_json(err, "invalid_config", e.what());
    return invalid_config;
  }
}

}  // namespace gated::cli
