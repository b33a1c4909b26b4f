/*
   Copyright 2026 The bifurk Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Lineage CSV files, parameter and plan JSON, and JSON/CSV reports.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bifurk/bar.hpp"
#include "bifurk/empirics.hpp"
#include "bifurk/error.hpp"
#include "bifurk/experiments.hpp"
#include "bifurk/hypotest.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/kernel.hpp"

namespace bifurk {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Line accounting of one ingested file; every line lands in exactly one bucket.
struct IngestStats {
  std::size_t lines = 0;
  std::size_t header_lines = 0;
  std::size_t data_rows = 0;
  std::size_t comment_lines = 0;
  std::size_t blank_lines = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

/// For a decimal that from_chars reported out of range: true when its
/// magnitude is huge, false when it is tiny.
inline bool decimal_overflows(std::string_view t) {
  if (!t.empty() && (t.front() == '-' || t.front() == '+')) t.remove_prefix(1);
  const auto e = t.find_first_of("eE");
  long long exponent = 0;
  if (e != std::string_view::npos) {
    std::string_view x = t.substr(e + 1);
    if (!x.empty() && x.front() == '+') x.remove_prefix(1);
    std::from_chars(x.data(), x.data() + x.size(), exponent);
    t = t.substr(0, e);
  }
  const auto dot = t.find('.');
  const std::string_view whole = t.substr(0, dot);
  const auto lead = whole.find_first_not_of('0');
  long long magnitude = 0;
  if (lead != std::string_view::npos) {
    magnitude = static_cast<long long>(whole.size() - lead) - 1;
  } else if (dot != std::string_view::npos) {
    const auto first = t.substr(dot + 1).find_first_not_of('0');
    magnitude = first == std::string_view::npos ? -1 : -static_cast<long long>(first) - 1;
  }
  return magnitude + exponent > 0;
}

}  // namespace detail

/// Parses `cell_id,value` CSV. Lines starting with '#' and blank lines are
/// skipped but counted.
inline Lineage parse_lineage(std::istream& in, IngestStats* stats = nullptr) {
  IngestStats st;
  Lineage out;
  std::set<std::uint64_t> seen;
  bool header = false;
  std::string raw;
  while (std::getline(in, raw)) {
    ++st.lines;
    const std::size_t ln = st.lines;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) {
      ++st.blank_lines;
      continue;
    }
    if (line.front() == '#') {
      ++st.comment_lines;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw Error(Errc::parse_error, detail::at_line(ln) + "expected two comma-separated fields");
    }
    const std::string_view id_text = detail::trim(line.substr(0, comma));
    const std::string_view value_text = detail::trim(line.substr(comma + 1));
    if (!header) {
      if (id_text != "cell_id" || value_text != "value") {
        throw Error(Errc::parse_error, detail::at_line(ln) + "header must be cell_id,value");
      }
      header = true;
      ++st.header_lines;
      continue;
    }
    std::int64_t signed_id = 0;
    auto [pi, ei] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), signed_id);
    if (ei == std::errc() && pi == id_text.data() + id_text.size()) {
      if (signed_id <= 0) {
        throw Error(Errc::non_positive_id,
                    detail::at_line(ln) + "cell_id " + std::to_string(signed_id));
      }
    } else {
      throw Error(Errc::parse_error,
                  detail::at_line(ln) + "cell_id '" + std::string(id_text) + "' is not an integer");
    }
    const auto id = static_cast<std::uint64_t>(signed_id);
    double value = 0.0;
    auto [pv, ev] = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (pv != value_text.data() + value_text.size() ||
        (ev != std::errc() && ev != std::errc::result_out_of_range)) {
      throw Error(Errc::parse_error,
                  detail::at_line(ln) + "value '" + std::string(value_text) + "' is not a number");
    }
    if (ev == std::errc::result_out_of_range) {
      // Underflow rounds to zero; overflow is not representable.
      if (detail::decimal_overflows(value_text)) {
        throw Error(Errc::non_finite_value, detail::at_line(ln) + "value overflows");
      }
      value = 0.0;
    }
    if (!std::isfinite(value)) {
      throw Error(Errc::non_finite_value, detail::at_line(ln) + "value is not finite");
    }
    if (!seen.insert(id).second) {
      throw Error(Errc::duplicate_id, detail::at_line(ln) + "duplicate cell_id " + std::to_string(id));
    }
    out.set(TreeIndex{id}, value);
    ++st.data_rows;
  }
  if (!header) throw Error(Errc::parse_error, "missing header cell_id,value");
  if (stats) *stats = st;
  return out;
}

inline Lineage read_lineage(const std::filesystem::path& path, IngestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return parse_lineage(in, stats);
}

/// Writes every observed node, ascending, values to 17 significant digits.
inline void write_lineage(const Lineage& lineage, std::ostream& out) {
  out << "cell_id,value\n";
  char buf[64];
  lineage.for_each([&](std::uint64_t n, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << n << ',' << buf << '\n';
  });
}

inline void write_lineage(const Lineage& lineage, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_lineage(lineage, out);
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

// ---- JSON input ----

namespace detail {

template <class T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::parse_error, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::parse_error, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T get_field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get_field<T>(j, key) : fallback;
}

inline json parse_json(std::istream& in, const std::string& what) {
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse_error, what + ": " + e.what());
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return parse_json(in, path.string());
}

inline Eigen::VectorXd vector_field(const json& j, const char* key) {
  const auto v = get_field<std::vector<double>>(j, key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline RootDistribution root_from_json(const json& j) {
  const auto kind = detail::get_field<std::string>(j, "kind");
  if (kind == "stationary") return StationaryRoot{};
  if (kind == "dirac") return DiracRoot{detail::get_field<double>(j, "x")};
  if (kind == "gaussian") {
    GaussianRoot g{detail::get_field<double>(j, "mean"), detail::get_field<double>(j, "variance")};
    if (!(g.variance >= 0.0) || !std::isfinite(g.variance) || !std::isfinite(g.mean)) {
      throw Error(Errc::invalid_parameter, "gaussian root needs finite mean and variance >= 0");
    }
    return g;
  }
  throw Error(Errc::parse_error, "root kind must be stationary, dirac or gaussian");
}

inline json root_to_json(const RootDistribution& root) {
  return std::visit(
      [](const auto& r) -> json {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, StationaryRoot>) {
          return {{"kind", "stationary"}};
        } else if constexpr (std::is_same_v<R, DiracRoot>) {
          return {{"kind", "dirac"}, {"x", r.x}};
        } else {
          return {{"kind", "gaussian"}, {"mean", r.mean}, {"variance", r.variance}};
        }
      },
      root);
}

/// BAR parameters plus root law; BarParams checks its invariants on load.
inline BarModel bar_model_from_json(const json& j) {
  const Theta t{detail::get_field<double>(j, "alpha0"), detail::get_field<double>(j, "beta0"),
                detail::get_field<double>(j, "alpha1"), detail::get_field<double>(j, "beta1")};
  BarModel m{BarParams(t, detail::get_field<double>(j, "sigma2"),
                       detail::get_field<double>(j, "rho"))};
  if (j.contains("root")) m.root = root_from_json(j.at("root"));
  return m;
}

inline json bar_model_to_json(const BarModel& m) {
  const BarParams& p = m.params;
  return {{"alpha0", p.alpha0()}, {"beta0", p.beta0()}, {"alpha1", p.alpha1()},
          {"beta1", p.beta1()},   {"sigma2", p.sigma2()}, {"rho", p.rho()},
          {"root", root_to_json(m.root)}};
}

inline BarModel read_params(const std::filesystem::path& path) {
  return bar_model_from_json(detail::read_json(path));
}

/// Finite model: {"type": "finite", "states": s, "table": [s^3 entries], "nu": [...], "f": [...]}.
/// Table entry (x, y, z) sits at x*s*s + y*s + z.
inline FiniteModel finite_model_from_json(const json& j) {
  const auto states = detail::get_field<std::size_t>(j, "states");
  return FiniteModel{FiniteKernel(states, detail::get_field<std::vector<double>>(j, "table")),
                     detail::vector_field(j, "nu"), detail::vector_field(j, "f")};
}

inline Tolerances tolerances_from_json(const json& j) {
  Tolerances t;
  t.se_multiple = detail::get_field_or(j, "se_multiple", t.se_multiple);
  t.l2_ratio = detail::get_field_or(j, "l2_ratio", t.l2_ratio);
  t.exact_se_multiple = detail::get_field_or(j, "exact_se_multiple", t.exact_se_multiple);
  t.clt_frobenius = detail::get_field_or(j, "clt_frobenius", t.clt_frobenius);
  t.clt_cross_block = detail::get_field_or(j, "clt_cross_block", t.clt_cross_block);
  t.sister_variance = detail::get_field_or(j, "sister_variance", t.sister_variance);
  t.ks_level = detail::get_field_or(j, "ks_level", t.ks_level);
  t.size_low = detail::get_field_or(j, "size_low", t.size_low);
  t.size_high = detail::get_field_or(j, "size_high", t.size_high);
  t.power_min = detail::get_field_or(j, "power_min", t.power_min);
  t.level = detail::get_field_or(j, "level", t.level);
  return t;
}

inline json tolerances_to_json(const Tolerances& t) {
  return {{"se_multiple", t.se_multiple},
          {"l2_ratio", t.l2_ratio},
          {"exact_se_multiple", t.exact_se_multiple},
          {"clt_frobenius", t.clt_frobenius},
          {"clt_cross_block", t.clt_cross_block},
          {"sister_variance", t.sister_variance},
          {"ks_level", t.ks_level},
          {"size_low", t.size_low},
          {"size_high", t.size_high},
          {"power_min", t.power_min},
          {"level", t.level}};
}

inline ExperimentPlan plan_from_json(const json& j) {
  if (!j.contains("model") || !j.at("model").is_object()) {
    throw Error(Errc::parse_error, "plan needs a model object");
  }
  const json& mj = j.at("model");
  const auto type = detail::get_field_or<std::string>(mj, "type", "bar");
  Model model = [&]() -> Model {
    if (type == "bar") return bar_model_from_json(mj);
    if (type == "finite") return finite_model_from_json(mj);
    throw Error(Errc::parse_error, "model type must be bar or finite");
  }();
  ExperimentPlan plan{.model = std::move(model)};
  const auto kind = parse_experiment_kind(detail::get_field<std::string>(j, "kind"));
  if (!kind) throw Error(Errc::parse_error, "kind must be lln, clt or calibration");
  plan.kind = *kind;
  plan.depths = detail::get_field<std::vector<unsigned>>(j, "depths");
  plan.replications = detail::get_field<std::uint64_t>(j, "replications");
  plan.seed = detail::get_field_or<std::uint64_t>(j, "seed", 0);
  plan.replication_offset = detail::get_field_or<std::uint64_t>(j, "replication_offset", 0);
  if (j.contains("functional")) {
    const auto f = parse_functional(detail::get_field<std::string>(j, "functional"));
    if (!f) throw Error(Errc::parse_error, "functional must be 1, x, x^2 or y-z");
    plan.functional = *f;
  }
  if (j.contains("test")) {
    const auto t = parse_test_name(detail::get_field<std::string>(j, "test"));
    if (!t) throw Error(Errc::parse_error, "unknown test name");
    plan.test = *t;
  }
  plan.null_holds = detail::get_field_or(j, "null_holds", plan.null_holds);
  plan.levels = detail::get_field_or(j, "levels", plan.levels);
  if (j.contains("tolerances")) plan.tol = tolerances_from_json(j.at("tolerances"));
  plan.threads = detail::get_field_or<unsigned>(j, "threads", 0);
  return plan;
}

inline ExperimentPlan read_plan(const std::filesystem::path& path) {
  return plan_from_json(detail::read_json(path));
}

// ---- JSON reports ----

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json header(std::string_view kind) {
  return {{"bifurk_schema", kSchemaVersion}, {"kind", kind}};
}

}  // namespace detail

inline json to_json(const FitResult& f) {
  json j = detail::header("fit");
  const Theta& t = f.theta_hat;
  j["theta_hat"] = {t.alpha0, t.beta0, t.alpha1, t.beta1};
  j["sigma2_hat"] = f.sigma2_hat;
  j["rho_hat"] = f.rho_hat ? json(*f.rho_hat) : json(nullptr);
  j["gamma_hat"] = {f.gamma_hat[0], f.gamma_hat[1]};
  j["gamma_gap"] = f.gamma_gap();
  j["sigma_prime_hat"] = detail::matrix_to_json(f.sigma_prime_hat);
  j["counts"] = {{"pairs0", f.counts.pairs0},
                 {"pairs1", f.counts.pairs1},
                 {"triangles", f.counts.triangles}};
  j["mu_hat"] = {{"mu1", f.mu_hat.mu1}, {"mu2", f.mu_hat.mu2}};
  const auto se = f.standard_errors();
  j["standard_errors"] = {se[0], se[1], se[2], se[3]};
  j["alpha_constrained"] = f.alpha_constrained;
  return j;
}

inline json to_json(const TestReport& r) {
  json j = detail::header("test");
  j["name"] = to_string(r.name);
  j["statistic"] = r.statistic;
  j["dof"] = r.dof ? json(*r.dof) : json("normal");
  j["p_value"] = r.p_value;
  j["n_effective"] = r.n_effective;
  j["null_hypothesis"] = r.null_hypothesis;
  j["alternative"] = r.alternative;
  if (r.p_value_upper) j["p_value_upper"] = *r.p_value_upper;
  if (r.p_value_lower) j["p_value_lower"] = *r.p_value_lower;
  return j;
}

inline json to_json(const ExperimentReport& r) {
  json j = detail::header("experiment");
  j["experiment"] = to_string(r.kind);
  j["model"] = r.model;
  j["functional"] = r.functional;
  j["test"] = r.test ? json(to_string(*r.test)) : json(nullptr);
  j["seed"] = r.seed;
  j["null_holds"] = r.null_holds;
  j["limit_detected"] = r.limit_detected;
  j["limit"] = r.limit ? json(*r.limit) : json(nullptr);
  j["passed"] = r.passed();
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"rule", v.rule}, {"passed", v.passed}, {"detail", v.detail}});
  }
  j["verdicts"] = std::move(verdicts);
  json depths = json::array();
  for (const auto& d : r.depths) {
    json dj = {{"depth", d.depth}, {"replications", d.replications}, {"failures", d.failures}};
    json stats = json::object();
    for (const auto& [k, v] : d.stats) stats[k] = v;
    dj["stats"] = std::move(stats);
    if (d.covariance) dj["covariance"] = detail::matrix_to_json(*d.covariance);
    if (d.reference_covariance) {
      dj["reference_covariance"] = detail::matrix_to_json(*d.reference_covariance);
    }
    depths.push_back(std::move(dj));
  }
  j["depths"] = std::move(depths);
  return j;
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

template <class Report>
  requires requires(const Report& r) { to_json(r); }
void write_report(const Report& report, const std::filesystem::path& path) {
  write_json(to_json(report), path);
}

/// Flat per-replication table: depth, index, seed, ok, then the value columns.
inline void write_records_csv(const ExperimentReport& r, std::ostream& out) {
  std::set<std::string> keys;
  for (const auto& rec : r.records) {
    for (const auto& [k, v] : rec.values) keys.insert(k);
  }
  out << "depth,index,seed,ok";
  for (const auto& k : keys) out << ',' << k;
  out << ",error\n";
  char buf[64];
  for (const auto& rec : r.records) {
    out << rec.depth << ',' << rec.index << ',' << rec.seed << ',' << (rec.ok ? 1 : 0);
    for (const auto& k : keys) {
      out << ',';
      if (const auto it = rec.values.find(k); it != rec.values.end()) {
        std::snprintf(buf, sizeof buf, "%.17g", it->second);
        out << buf;
      }
    }
    std::string error = rec.error;
    for (auto& c : error) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << ',' << error << '\n';
  }
}

inline void write_records_csv(const ExperimentReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_records_csv(r, out);
}

}  // namespace bifurk
