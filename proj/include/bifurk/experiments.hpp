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

// Monte Carlo harness for the limit theorems: LLN curves, CLT checks and
// test calibration. Replication k at depth r draws its tree from
// derive_seed(seed, k, r), so runs are reproducible and can be split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bifurk/bar.hpp"
#include "bifurk/empirics.hpp"
#include "bifurk/error.hpp"
#include "bifurk/hypotest.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/kernel.hpp"
#include "bifurk/random.hpp"
#include "bifurk/stats.hpp"

namespace bifurk {

enum class ExperimentKind { lln, clt, calibration };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::lln: return "lln";
    case ExperimentKind::clt: return "clt";
    case ExperimentKind::calibration: return "calibration";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  if (s == "lln") return ExperimentKind::lln;
  if (s == "clt") return ExperimentKind::clt;
  if (s == "calibration") return ExperimentKind::calibration;
  return std::nullopt;
}

/// Named functionals of a node (one, x, x^2) or of a triangle (y - z).
enum class Functional { one, x, x2, sister_diff };

inline std::string_view to_string(Functional f) {
  switch (f) {
    case Functional::one: return "1";
    case Functional::x: return "x";
    case Functional::x2: return "x^2";
    case Functional::sister_diff: return "y-z";
  }
  return "unknown";
}

inline std::optional<Functional> parse_functional(std::string_view s) {
  if (s == "1" || s == "one") return Functional::one;
  if (s == "x") return Functional::x;
  if (s == "x^2" || s == "x2") return Functional::x2;
  if (s == "y-z" || s == "y_minus_z" || s == "sister_diff") return Functional::sister_diff;
  return std::nullopt;
}

struct Tolerances {
  double se_multiple = 3.0;        // LLN bias, in Monte Carlo standard errors
  double l2_ratio = 0.5;           // L2 error at the last depth over the first
  double exact_se_multiple = 4.0;  // simulated vs exact second moment
  double clt_frobenius = 0.15;
  double clt_cross_block = 0.1;
  double sister_variance = 0.10;
  double ks_level = 0.01;
  double size_low = 0.035;
  double size_high = 0.065;
  double power_min = 0.99;
  double level = 0.05;
};

struct BarModel {
  BarParams params;
  RootDistribution root = StationaryRoot{};
};

/// Finite-state model: kernel, root law nu and the function f on states.
struct FiniteModel {
  FiniteKernel kernel;
  Eigen::VectorXd nu;
  Eigen::VectorXd f;
};

using Model = std::variant<BarModel, FiniteModel>;

struct ExperimentPlan {
  Model model;
  ExperimentKind kind = ExperimentKind::lln;
  std::vector<unsigned> depths{};
  std::uint64_t replications = 1;
  std::uint64_t seed = 0;
  std::uint64_t replication_offset = 0;
  Functional functional = Functional::x;
  std::optional<TestName> test{};  // calibration only
  bool null_holds = true;
  std::vector<double> levels{0.01, 0.05, 0.10};
  Tolerances tol{};
  unsigned threads = 0;  // 0: hardware concurrency, capped by BIFURK_THREADS
};

struct Verdict {
  std::string rule;
  bool passed = false;
  std::string detail;
};

struct ReplicationRecord {
  unsigned depth = 0;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::map<std::string, double> values;
};

struct DepthSummary {
  unsigned depth = 0;
  std::uint64_t replications = 0;
  std::uint64_t failures = 0;
  std::map<std::string, double> stats;
  std::optional<Eigen::Matrix4d> covariance;
  std::optional<Eigen::Matrix4d> reference_covariance;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::lln;
  std::string model;
  std::string functional;
  std::optional<TestName> test;
  std::uint64_t seed = 0;
  bool null_holds = true;
  bool limit_detected = true;
  std::optional<double> limit;
  std::vector<DepthSummary> depths;
  std::vector<Verdict> verdicts;
  std::vector<ReplicationRecord> records;

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const Verdict& v) { return v.passed; });
  }
  const DepthSummary& at_depth(unsigned r) const {
    for (const auto& d : depths) {
      if (d.depth == r) return d;
    }
    throw Error(Errc::invalid_parameter, "no summary at depth " + std::to_string(r));
  }
};

/// Worker count: the request (or hardware concurrency when 0), capped by
/// the BIFURK_THREADS environment variable.
inline unsigned resolve_threads(unsigned requested) {
  unsigned n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BIFURK_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned long>(n, cap);
  }
  return std::max(1u, n);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write into per-index slots.
template <class Fn>
void parallel_for(std::uint64_t count, unsigned threads, Fn&& fn) {
  const auto workers = static_cast<unsigned>(
      std::min<std::uint64_t>(std::max(1u, threads), std::max<std::uint64_t>(count, 1)));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::uint64_t i = w; i < count; i += workers) fn(i);
        } catch (...) {
          std::lock_guard lock(guard);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline std::string level_key(double level) { return "rate@" + fmt(level); }

inline const char* const kThetaNames[4] = {"alpha0", "beta0", "alpha1", "beta1"};

inline void validate_plan(const ExperimentPlan& plan) {
  if (plan.replications < 1) throw Error(Errc::invalid_parameter, "replications must be >= 1");
  if (plan.depths.empty()) throw Error(Errc::invalid_parameter, "depths must be non-empty");
  for (std::size_t i = 1; i < plan.depths.size(); ++i) {
    if (plan.depths[i] <= plan.depths[i - 1]) {
      throw Error(Errc::invalid_parameter, "depths must be strictly increasing");
    }
  }
  // Simulated trees are stored densely; CLT and calibration use one extra level.
  const unsigned extra = plan.kind == ExperimentKind::lln ? 0 : 1;
  if (plan.depths.back() + extra > 26) {
    throw Error(Errc::invalid_parameter, "simulated depth must be <= 26");
  }
  for (const double l : plan.levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw Error(Errc::invalid_parameter, "levels must lie in [0, 1]");
  }
  const bool bar = std::holds_alternative<BarModel>(plan.model);
  if (plan.kind != ExperimentKind::lln && !bar) {
    throw Error(Errc::invalid_parameter, std::string(to_string(plan.kind)) + " needs a BAR model");
  }
  if (plan.kind == ExperimentKind::lln && bar && plan.functional == Functional::sister_diff &&
      plan.depths.front() == 0) {
    throw Error(Errc::invalid_parameter, "y-z needs depth >= 1");
  }
  if (plan.kind == ExperimentKind::clt && plan.functional != Functional::x &&
      plan.functional != Functional::sister_diff) {
    throw Error(Errc::invalid_parameter, "clt supports functional x (theta) or y-z");
  }
  if (plan.kind == ExperimentKind::calibration && !plan.test) {
    throw Error(Errc::invalid_parameter, "calibration needs a test name");
  }
  if (const auto* fm = std::get_if<FiniteModel>(&plan.model)) {
    validate_distribution(fm->nu, fm->kernel.states());
    if (static_cast<std::size_t>(fm->f.size()) != fm->kernel.states()) {
      throw Error(Errc::invalid_parameter, "f must have one entry per state");
    }
  }
}

inline double node_value(Functional f, double x) {
  switch (f) {
    case Functional::one: return 1.0;
    case Functional::x: return x;
    case Functional::x2: return x * x;
    case Functional::sister_diff: break;
  }
  throw Error(Errc::invalid_parameter, "not a node functional");
}

inline double bar_limit(const BarParams& p, Functional f) {
  const StationaryMoments m = stationary_moments(p);
  switch (f) {
    case Functional::one: return 1.0;
    case Functional::x: return m.mu1;
    case Functional::x2: return m.mu2;
    case Functional::sister_diff:
      return (p.alpha0() - p.alpha1()) * m.mu1 + p.beta0() - p.beta1();
  }
  return 0.0;
}

/// Mean, Monte Carlo standard error, L2 error against `limit`.
inline void add_location_stats(std::map<std::string, double>& s, const std::vector<double>& v,
                               double limit) {
  const SampleMoments m = sample_moments(v);
  double sq = 0.0;
  for (const double x : v) sq += (x - limit) * (x - limit);
  s["mean"] = m.mean;
  s["mc_se"] = m.standard_error();
  s["bias"] = m.mean - limit;
  s["l2_error"] = std::sqrt(sq / static_cast<double>(v.size()));
}

inline std::vector<double> column(const std::vector<const ReplicationRecord*>& rs,
                                  const std::string& key) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto* r : rs) out.push_back(r->values.at(key));
  return out;
}

/// Runs one replication at depth r. Library errors mark the record failed.
inline ReplicationRecord replicate(const ExperimentPlan& plan, unsigned r, std::uint64_t k) {
  ReplicationRecord rec;
  rec.depth = r;
  rec.index = k;
  rec.seed = derive_seed(plan.seed, k, r);
  try {
    if (const auto* fm = std::get_if<FiniteModel>(&plan.model)) {
      const auto s = simulate_tmc<std::size_t>(
          fm->kernel, [&](Stream& rng) { return sample_state(fm->nu, rng); }, r, rec.seed);
      double total = 0.0;
      double gen = 0.0;
      for (std::uint64_t n = 1; n <= s.size(); ++n) {
        const double v = fm->f(static_cast<Eigen::Index>(s.values[n]));
        total += v;
        if (n >= generation_first(r)) gen += v;
      }
      gen /= static_cast<double>(generation_size(r));
      rec.values["mean"] = total / static_cast<double>(s.size());
      rec.values["gen_sq"] = gen * gen;
      return rec;
    }
    const BarModel& bm = std::get<BarModel>(plan.model);
    const BarParams& p = bm.params;
    if (plan.kind == ExperimentKind::lln) {
      const Lineage l(simulate_bar(p, bm.root, r, rec.seed));
      if (plan.functional == Functional::sister_diff) {
        rec.values["mean"] =
            triangle_average(l, [](double, double y, double z) { return y - z; },
                             mode::Subtree{r})
                .value;
      } else {
        const Functional f = plan.functional;
        rec.values["mean"] =
            node_average(l, [f](double x) { return node_value(f, x); }, mode::Subtree{r}).value;
      }
      return rec;
    }
    // Triangles i in T_r need the daughters of generation r.
    const Lineage l(simulate_bar(p, bm.root, r + 1, rec.seed));
    if (plan.kind == ExperimentKind::clt) {
      if (plan.functional == Functional::sister_diff) {
        const Theta& t = p.theta();
        double sum = 0.0;
        std::uint64_t n = 0;
        for (std::uint64_t i = 1; i <= subtree_size(r); ++i, ++n) {
          const double x = l.raw(i);
          sum += l.raw(2 * i) - l.raw(2 * i + 1) -
                 ((t.alpha0 - t.alpha1) * x + t.beta0 - t.beta1);
        }
        rec.values["s"] = sum / std::sqrt(static_cast<double>(n));
      } else {
        const FitResult f = fit(l);
        const double root_n = std::sqrt(static_cast<double>(f.counts.triangles));
        const Theta& t = p.theta();
        const double hat[4] = {f.theta_hat.alpha0, f.theta_hat.beta0, f.theta_hat.alpha1,
                               f.theta_hat.beta1};
        const double truth[4] = {t.alpha0, t.beta0, t.alpha1, t.beta1};
        for (int j = 0; j < 4; ++j) {
          rec.values[std::string("z_") + kThetaNames[j]] = root_n * (hat[j] - truth[j]);
        }
      }
      return rec;
    }
    const TestReport tr = run_test(l, *plan.test);
    rec.values["statistic"] = tr.statistic;
    rec.values["p_value"] = tr.p_value;
    rec.values["n_effective"] = static_cast<double>(tr.n_effective);
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.values.clear();
  }
  return rec;
}

inline void summarize_lln(const ExperimentPlan& plan, ExperimentReport& rep,
                          const std::vector<std::vector<const ReplicationRecord*>>& by_depth) {
  std::optional<double> limit;
  if (const auto* bm = std::get_if<BarModel>(&plan.model)) {
    limit = bar_limit(bm->params, plan.functional);
  } else {
    const auto& fm = std::get<FiniteModel>(plan.model);
    if (const auto mu = induced_stationary(fm.kernel)) limit = mu->dot(fm.f);
  }
  rep.limit = limit;
  rep.limit_detected = limit.has_value();

  for (std::size_t d = 0; d < by_depth.size(); ++d) {
    DepthSummary& s = rep.depths[d];
    const auto& rs = by_depth[d];
    if (rs.empty()) continue;
    const std::vector<double> means = column(rs, "mean");
    if (limit) {
      add_location_stats(s.stats, means, *limit);
    } else {
      const SampleMoments m = sample_moments(means);
      s.stats["mean"] = m.mean;
      s.stats["mc_se"] = m.standard_error();
    }
    if (const auto* fm = std::get_if<FiniteModel>(&plan.model)) {
      const SampleMoments sq = sample_moments(column(rs, "gen_sq"));
      const double exact = exact_gen_second_moment(fm->kernel, fm->nu, fm->f, s.depth);
      s.stats["gen_second_moment"] = sq.mean;
      s.stats["gen_second_moment_se"] = sq.standard_error();
      s.stats["exact_gen_second_moment"] = exact;
      const double gap = std::abs(sq.mean - exact);
      rep.verdicts.push_back(
          {"exact.second_moment",
           gap <= plan.tol.exact_se_multiple * sq.standard_error() + 1e-12 * (1.0 + std::abs(exact)),
           "r=" + std::to_string(s.depth) + " simulated " + fmt(sq.mean) + " exact " +
               fmt(exact) + " se " + fmt(sq.standard_error())});
    }
  }
  if (!limit) return;  // no limit, no LLN verdict

  const DepthSummary& first = rep.depths.front();
  const DepthSummary& last = rep.depths.back();
  if (last.replications == 0) return;
  const double bias = std::abs(last.stats.at("bias"));
  const double se = last.stats.at("mc_se");
  rep.verdicts.push_back({"lln.bias", bias <= plan.tol.se_multiple * se || bias <= 1e-12,
                          "r=" + std::to_string(last.depth) + " |bias| " + fmt(bias) + " vs " +
                              fmt(plan.tol.se_multiple) + " se " + fmt(se)});
  if (rep.depths.size() >= 2 && first.replications > 0) {
    const double e0 = first.stats.at("l2_error");
    const double e1 = last.stats.at("l2_error");
    rep.verdicts.push_back({"lln.l2_ratio", e1 == 0.0 || e1 < plan.tol.l2_ratio * e0,
                            "L2 r=" + std::to_string(last.depth) + " " + fmt(e1) + " / r=" +
                                std::to_string(first.depth) + " " + fmt(e0)});
  }
}

inline void summarize_clt(const ExperimentPlan& plan, ExperimentReport& rep,
                          const std::vector<std::vector<const ReplicationRecord*>>& by_depth) {
  const BarParams& p = std::get<BarModel>(plan.model).params;
  for (std::size_t d = 0; d < by_depth.size(); ++d) {
    DepthSummary& s = rep.depths[d];
    const auto& rs = by_depth[d];
    const std::string at = "r=" + std::to_string(s.depth);
    if (rs.size() < 2) continue;
    const auto m = static_cast<double>(rs.size());
    if (plan.functional == Functional::sister_diff) {
      const std::vector<double> v = column(rs, "s");
      const SampleMoments sm = sample_moments(v);
      const double target = 2.0 * p.sigma2() * (1.0 - p.rho());
      const double rel = std::abs(sm.variance / target - 1.0);
      const double sd = std::sqrt(target);
      const KsResult ks = ks_test(v, [sd](double x) { return normal_cdf(x / sd); });
      s.stats["variance"] = sm.variance;
      s.stats["target_variance"] = target;
      s.stats["relative_error"] = rel;
      s.stats["ks_d"] = ks.statistic;
      s.stats["ks_p"] = ks.p_value;
      rep.verdicts.push_back({"clt.sister_variance", rel <= plan.tol.sister_variance,
                              at + " variance " + fmt(sm.variance) + " target " + fmt(target)});
      rep.verdicts.push_back({"clt.sister_ks", ks.p_value > plan.tol.ks_level,
                              at + " KS p " + fmt(ks.p_value)});
      continue;
    }
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rs.size()), 4);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (int j = 0; j < 4; ++j) {
        z(static_cast<Eigen::Index>(i), j) =
            rs[i]->values.at(std::string("z_") + kThetaNames[j]);
      }
    }
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Eigen::MatrixXd centered = z.rowwise() - mean;
    const Eigen::Matrix4d cov = (centered.transpose() * centered) / (m - 1.0);
    const Eigen::Matrix4d ref = asymptotic_covariance(p);
    s.covariance = cov;
    s.reference_covariance = ref;
    const double frob = (cov - ref).norm() / ref.norm();
    s.stats["frobenius_rel_error"] = frob;
    // Cross-branch block, also in correlation units of the limit law.
    double cross = 0.0;
    double cross_corr = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 2; j < 4; ++j) {
        cross = std::max(cross, std::abs(cov(i, j)));
        cross_corr = std::max(cross_corr, std::abs(cov(i, j)) / std::sqrt(ref(i, i) * ref(j, j)));
      }
    }
    s.stats["max_cross_block"] = cross;
    s.stats["max_cross_block_corr"] = cross_corr;
    rep.verdicts.push_back({"clt.covariance", frob <= plan.tol.clt_frobenius,
                            at + " Frobenius relative error " + fmt(frob)});
    for (int j = 0; j < 4; ++j) {
      const std::vector<double> col(z.col(j).data(), z.col(j).data() + z.rows());
      const double sd = std::sqrt(ref(j, j));
      const KsResult ks = ks_test(col, [sd](double x) { return normal_cdf(x / sd); });
      s.stats[std::string("mean_z_") + kThetaNames[j]] = mean(j);
      s.stats[std::string("ks_d_") + kThetaNames[j]] = ks.statistic;
      s.stats[std::string("ks_p_") + kThetaNames[j]] = ks.p_value;
      rep.verdicts.push_back({std::string("clt.ks.") + kThetaNames[j],
                              ks.p_value > plan.tol.ks_level, at + " KS p " + fmt(ks.p_value)});
    }
    if (p.rho() == 0.0) {
      rep.verdicts.push_back({"clt.cross_block", cross_corr <= plan.tol.clt_cross_block,
                              at + " max |cross block| " + fmt(cross) + ", correlation scale " +
                                  fmt(cross_corr)});
    }
  }
}

inline void summarize_calibration(
    const ExperimentPlan& plan, ExperimentReport& rep,
    const std::vector<std::vector<const ReplicationRecord*>>& by_depth) {
  std::vector<double> medians;
  for (std::size_t d = 0; d < by_depth.size(); ++d) {
    DepthSummary& s = rep.depths[d];
    const auto& rs = by_depth[d];
    const std::string at = "r=" + std::to_string(s.depth);
    if (rs.empty()) {
      medians.push_back(0.0);
      continue;
    }
    const std::vector<double> pv = column(rs, "p_value");
    std::vector<double> stat = column(rs, "statistic");
    const auto m = static_cast<double>(pv.size());
    for (const double level : plan.levels) {
      double rejected = 0.0;
      for (const double x : pv) rejected += x < level ? 1.0 : 0.0;
      s.stats[level_key(level)] = rejected / m;
    }
    double at_level = 0.0;
    for (const double x : pv) at_level += x < plan.tol.level ? 1.0 : 0.0;
    at_level /= m;
    s.stats["rejection_rate"] = at_level;
    if (*plan.test == TestName::sister_difference) {
      for (auto& x : stat) x = std::abs(x);
    }
    medians.push_back(median(stat));
    s.stats["median_statistic"] = medians.back();
    const KsResult ks = ks_test(pv, [](double x) { return std::clamp(x, 0.0, 1.0); });
    s.stats["ks_p_uniform"] = ks.p_value;
    if (plan.null_holds) {
      rep.verdicts.push_back(
          {"calibration.size", at_level >= plan.tol.size_low && at_level <= plan.tol.size_high,
           at + " rate " + fmt(at_level) + " at level " + fmt(plan.tol.level)});
      rep.verdicts.push_back({"calibration.uniformity", ks.p_value > plan.tol.ks_level,
                              at + " p-value KS p " + fmt(ks.p_value)});
    } else {
      rep.verdicts.push_back({"calibration.power", at_level >= plan.tol.power_min,
                              at + " power " + fmt(at_level) + " at level " +
                                  fmt(plan.tol.level)});
    }
  }
  if (!plan.null_holds && medians.size() >= 2) {
    rep.verdicts.push_back({"calibration.divergence", medians.back() > medians.front(),
                            "median statistic " + fmt(medians.front()) + " -> " +
                                fmt(medians.back())});
  }
}

}  // namespace detail

/// Builds the report from replication records; records are ordered by
/// (depth, index) first, so the reduction order is fixed.
inline ExperimentReport summarize(const ExperimentPlan& plan,
                                  std::vector<ReplicationRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });
  ExperimentReport rep;
  rep.kind = plan.kind;
  rep.model = std::holds_alternative<BarModel>(plan.model) ? "bar" : "finite";
  rep.functional = std::holds_alternative<BarModel>(plan.model)
                       ? std::string(to_string(plan.functional))
                       : std::string("f");
  rep.test = plan.test;
  rep.seed = plan.seed;
  rep.null_holds = plan.null_holds;
  std::vector<std::vector<const ReplicationRecord*>> by_depth(plan.depths.size());
  rep.depths.resize(plan.depths.size());
  for (std::size_t d = 0; d < plan.depths.size(); ++d) rep.depths[d].depth = plan.depths[d];
  for (const auto& r : records) {
    const auto it = std::find(plan.depths.begin(), plan.depths.end(), r.depth);
    if (it == plan.depths.end()) continue;
    const auto d = static_cast<std::size_t>(it - plan.depths.begin());
    if (r.ok) {
      by_depth[d].push_back(&r);
      ++rep.depths[d].replications;
    } else {
      ++rep.depths[d].failures;
    }
  }
  switch (plan.kind) {
    case ExperimentKind::lln: detail::summarize_lln(plan, rep, by_depth); break;
    case ExperimentKind::clt: detail::summarize_clt(plan, rep, by_depth); break;
    case ExperimentKind::calibration: detail::summarize_calibration(plan, rep, by_depth); break;
  }
  for (auto& d : rep.depths) d.stats["failures"] = static_cast<double>(d.failures);
  rep.records = std::move(records);
  return rep;
}

/// Pools two runs of the same plan made with disjoint replication indices.
inline ExperimentReport pool(const ExperimentPlan& plan, const ExperimentReport& a,
                             const ExperimentReport& b) {
  std::vector<ReplicationRecord> records = a.records;
  records.insert(records.end(), b.records.begin(), b.records.end());
  return summarize(plan, std::move(records));
}

inline ExperimentReport run_experiment(const ExperimentPlan& plan) {
  detail::validate_plan(plan);
  const std::uint64_t reps = plan.replications;
  std::vector<ReplicationRecord> records(plan.depths.size() * reps);
  const unsigned threads = resolve_threads(plan.threads);
  parallel_for(records.size(), threads, [&](std::uint64_t slot) {
    const unsigned r = plan.depths[slot / reps];
    records[slot] = detail::replicate(plan, r, plan.replication_offset + slot % reps);
  });
  return summarize(plan, std::move(records));
}

inline ExperimentReport run_lln(ExperimentPlan plan) {
  plan.kind = ExperimentKind::lln;
  return run_experiment(plan);
}

inline ExperimentReport run_clt(ExperimentPlan plan) {
  plan.kind = ExperimentKind::clt;
  return run_experiment(plan);
}

inline ExperimentReport run_calibration(ExperimentPlan plan) {
  plan.kind = ExperimentKind::calibration;
  return run_experiment(plan);
}

}  // namespace bifurk
