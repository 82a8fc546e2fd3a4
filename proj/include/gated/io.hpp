#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gated/distributions.hpp"
#include "gated/errors.hpp"
#include "gated/giqueue.hpp"
#include "gated/linsys.hpp"
#include "gated/mgqueue.hpp"
#include "gated/simulator.hpp"

namespace gated::io {

using json = nlohmann::ordered_json;

/// Shortest decimal string that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw invalid_config_error("not a number: '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }
};

/// Row of numeric cells in shortest round-trip form.
inline std::vector<std::string> number_row(std::initializer_list<double> values) {
  std::vector<std::string> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(format_number(v));
  return out;
}

namespace detail {

inline void write_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const CsvTable& t) {
  detail::write_line(os, t.header);
  for (const auto& r : t.rows) detail::write_line(os, r);
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw invalid_config_error("empty CSV");
  t.header = detail::split_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_line(line);
    if (cells.size() != t.header.size()) {
      throw invalid_config_error("CSV row has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void write_csv_file(const std::string& path, const CsvTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw invalid_config_error("cannot open '" + path + "' for writing");
  write_csv(os, t);
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_config_error("cannot open '" + path + "'");
  return read_csv(is);
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw invalid_config_error("cannot open '" + path + "' for writing");
  os << dump(j);
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_config_error("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw invalid_config_error("malformed JSON in '" + path + "': " + e.what());
  }
}

// ---- distributions --------------------------------------------------------------------

namespace detail {

inline double positive_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw invalid_config_error(std::string("distribution needs numeric field '") + key + "'");
  }
  const double v = j[key].get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw invalid_config_error(std::string("field '") + key + "' must be positive");
  }
  return v;
}

inline std::string kind_of(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw invalid_config_error("distribution needs a string field 'kind'");
  }
  return j["kind"].get<std::string>();
}

}  // namespace detail

inline ServiceDistribution service_from_json(const json& j) {
  const auto kind = detail::kind_of(j);
  if (kind == "exponential") return ServiceDistribution::exponential(detail::positive_field(j, "mu"));
  throw invalid_config_error("unsupported service kind '" + kind + "'");
}

inline ArrivalDistribution arrivals_from_json(const json& j) {
  const auto kind = detail::kind_of(j);
  if (kind == "poisson") return ArrivalDistribution::poisson(detail::positive_field(j, "lambda"));
  if (kind == "deterministic") {
    return ArrivalDistribution::deterministic(detail::positive_field(j, "c"));
  }
  throw invalid_config_error("unsupported arrival kind '" + kind + "'");
}

inline json to_json(const ArrivalDistribution& a) {
  switch (a.kind()) {
    case ArrivalDistribution::Kind::poisson:
      return {{"kind", "poisson"}, {"lambda", a.rate()}};
    case ArrivalDistribution::Kind::deterministic:
      return {{"kind", "deterministic"}, {"c", a.period()}};
    case ArrivalDistribution::Kind::custom:
      break;
  }
  return {{"kind", a.name()}, {"mean", a.mean()}, {"second_moment", a.second_moment()}};
}

inline json to_json(const DistributionReport& r) {
  return {{"ok", r.ok},
          {"normalization_defect", r.normalization_defect},
          {"monotonicity_violations", r.monotonicity_violations},
          {"moments_finite", r.moments_finite},
          {"issues", r.issues}};
}

// ---- linsys ---------------------------------------------------------------------------

inline json to_json(const linsys::DominanceReport& r) {
  json j = {{"order", r.order},
            {"tail_cutoff", r.tail_cutoff},
            {"satisfied", r.satisfied},
            {"strictly_dominant", r.strictly_dominant},
            {"worst_row", r.worst_row},
            {"worst_sigma", r.worst_sigma},
            {"analytic_tail", r.analytic_tail},
            {"conditions",
             {{"inverse_diagonal_sum", r.condition_inverse_diagonal},
              {"inverse_diagonal_ratio", r.inverse_diagonal_ratio},
              {"bounded_row_sums", r.condition_row_bound},
              {"max_row_sum", r.max_row_sum},
              {"column_sums", r.condition_column_sums},
              {"rhs_bounded", r.rhs_bounded}}}};
  j["certified"] = r.certified ? json(*r.certified) : json(nullptr);
  j["certificate"] = r.certificate;
  j["sigma"] = r.sigma;
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const linsys::ConvergedSolution& c) {
  json ladder = json::array();
  for (const auto& s : c.ladder) {
    ladder.push_back({{"order", s.order},
                      {"max_gap", std::isfinite(s.max_gap) ? json(s.max_gap) : json(nullptr)},
                      {"residual", s.residual}});
  }
  return {{"converged", c.converged},
          {"n_used", c.n_used},
          {"tolerance", c.tolerance},
          {"max_gap", c.max_gap()},
          {"residual", c.residual},
          {"relative_residual", c.relative_residual},
          {"ladder", ladder}};
}

// ---- analytic solutions ---------------------------------------------------------------

inline json to_json(const mg::MgMomentSolution& s, int beta_count = 0) {
  const int count = beta_count > 0 ? std::min(beta_count, static_cast<int>(s.beta.size()))
                                   : static_cast<int>(s.beta.size());
  json beta = json::object();
  json y = json::object();
  for (int k = 2; k < 2 + count; ++k) {
    beta[std::to_string(k)] = s.beta_k(k);
    y[std::to_string(k)] = s.y(k);
  }
  return {{"lambda", s.lambda},
          {"rho", s.rho},
          {"order", s.order},
          {"beta1", s.beta1},
          {"beta", beta},
          {"y", y},
          {"s", s.s},
          {"EK", 1.0 + s.s},
          {"diagnostics",
           {{"converged", s.converged},
            {"heuristic", s.heuristic},
            {"assembly", s.exponential_path ? "transformed" : "general"},
            {"alternating_sum_defect", s.alternating_sum_defect},
            {"convergence", to_json(s.convergence)},
            {"dominance", to_json(s.dominance)}}}};
}

inline json to_json(const gi::GiMomentSolution& s, const gi::PmfTable* pmf = nullptr) {
  json j = {{"rho", s.rho}, {"order", s.order}, {"x", s.x}, {"EK", s.x.empty() ? 0.0 : s.mean()}};
  if (pmf) j["pmf"] = pmf->values;
  j["diagnostics"] = {{"converged", s.converged},
                      {"heuristic", s.heuristic},
                      {"normalization_defect", s.normalization_defect},
                      {"nonpositive_moments", s.nonpositive},
                      {"pmf_clamped", pmf ? pmf->clamped : 0},
                      {"pmf_mass", pmf ? pmf->mass : 0.0},
                      {"convergence", to_json(s.convergence)},
                      {"dominance", to_json(s.dominance)}};
  return j;
}

// ---- simulation -----------------------------------------------------------------------

inline json to_json(const sim::StageStats& s) {
  return {{"n", s.n},
          {"quantity", s.quantity == sim::Quantity::active ? "active" : "stage"},
          {"mean_length", s.mean_length.value},
          {"mean_length_se", s.mean_length.se},
          {"mean_customers", s.mean_customers.value},
          {"mean_customers_se", s.mean_customers.se},
          {"y_max", s.y_max},
          {"bin_width", s.bin_width},
          {"overflow_mass", s.overflow_mass},
          {"density", s.density},
          {"density_se", s.density_se},
          {"pmf", s.pmf},
          {"pmf_se", s.pmf_se}};
}

inline json to_json(const sim::DriftReport& r) {
  json states = json::array();
  for (const auto& st : r.states) {
    json e = {{"state", st.state},
              {"visits", st.visits},
              {"mean_next", st.next_mean.value},
              {"se", st.next_mean.se},
              {"bound", st.bound}};
    e["exact"] = st.exact ? json(*st.exact) : json(nullptr);
    states.push_back(e);
  }
  return {{"rho", r.rho},
          {"b0", r.b0},
          {"min_visits", r.min_visits},
          {"states", states},
          {"violations", r.violations},
          {"exact_deviations", r.exact_deviations}};
}

/// Trace CSV: n, Y, K, waiting_phase, M (burn-in records included).
inline CsvTable trace_table(const sim::StageTrace& t) {
  CsvTable out;
  out.header = {"n", "Y", "K", "waiting_phase", "M"};
  out.rows.reserve(t.records.size());
  for (const auto& r : t.records) {
    out.rows.push_back({std::to_string(r.index), format_number(r.Y), std::to_string(r.K),
                        r.waiting_phase ? "1" : "0", format_number(r.M)});
  }
  return out;
}

}  // namespace gated::io
