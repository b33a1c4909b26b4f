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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "bifurk/io.hpp"

namespace bifurk {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "bifurk_io";
  fs::create_directories(dir);
  return dir / name;
}

Lineage parse(const std::string& text, IngestStats* st = nullptr) {
  std::istringstream in(text);
  return parse_lineage(in, st);
}

Errc code_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return Errc::io_error;
}

TEST(ReadLineage, ThreeNodes) {
  const Lineage l = parse("cell_id,value\n1,0.037\n2,0.036\n3,0.035");
  EXPECT_EQ(l.size(), 3u);
  EXPECT_EQ(l.at(1), 0.037);
  EXPECT_EQ(l.at(3), 0.035);
}

TEST(ReadLineage, CommentsBlanksAndCounts) {
  IngestStats st;
  const std::string text =
      "# film 12\n"
      "cell_id,value\r\n"
      "\n"
      "1, 0.5\n"
      "# partially observed\n"
      "  3 ,-1e-3\n"
      "\n"
      "12,4\n";
  const Lineage l = parse(text, &st);
  EXPECT_EQ(l.size(), 3u);
  EXPECT_FALSE(l.has(2));
  EXPECT_EQ(l.at(3), -1e-3);
  EXPECT_EQ(st.lines, 8u);
  EXPECT_EQ(st.data_rows, l.size());
  EXPECT_EQ(st.comment_lines, 2u);
  EXPECT_EQ(st.blank_lines, 2u);
  EXPECT_EQ(st.lines, st.header_lines + l.size() + st.comment_lines + st.blank_lines);
}

TEST(ReadLineage, Errors) {
  EXPECT_EQ(code_of("cell_id,value\n1,0.1\n2,0.2\n2,0.3\n"), Errc::duplicate_id);
  EXPECT_EQ(code_of("cell_id,value\n0,0.1\n"), Errc::non_positive_id);
  EXPECT_EQ(code_of("cell_id,value\n-4,0.1\n"), Errc::non_positive_id);
  EXPECT_EQ(code_of("cell_id,value\n1,nan\n"), Errc::non_finite_value);
  EXPECT_EQ(code_of("cell_id,value\n1,inf\n"), Errc::non_finite_value);
  EXPECT_EQ(code_of("cell_id,value\n1,1e999\n"), Errc::non_finite_value);
  EXPECT_EQ(code_of("cell_id,value\n1,abc\n"), Errc::parse_error);
  EXPECT_EQ(code_of("cell_id,value\n1,0,5\n"), Errc::parse_error);
  EXPECT_EQ(code_of("cell_id,value\nx,1\n"), Errc::parse_error);
  EXPECT_EQ(code_of("id,val\n1,1\n"), Errc::parse_error);
  EXPECT_EQ(code_of(""), Errc::parse_error);
  // Decimal comma is not accepted: it splits into three fields.
  EXPECT_EQ(code_of("cell_id,value\n1,0,037\n"), Errc::parse_error);
  try {
    parse("cell_id,value\n1,1\n\n1,2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(ReadLineage, UnderflowIsZero) {
  EXPECT_EQ(parse("cell_id,value\n1,1e-400\n").at(1), 0.0);
  EXPECT_EQ(parse("cell_id,value\n1,-0.0001e-320\n").at(1), 0.0);
  EXPECT_EQ(code_of("cell_id,value\n1,-12.5e308\n"), Errc::non_finite_value);
  EXPECT_EQ(code_of("cell_id,value\n1,0.0001e313\n"), Errc::non_finite_value);
}

TEST(WriteLineage, RoundTripIsExact) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  Lineage l;
  for (std::uint64_t n = 1; n < 300; n += 1 + gen() % 3) l.set(TreeIndex{n}, u(gen) / 3.0);
  l.set(TreeIndex{400}, 5e-324);
  l.set(TreeIndex{401}, -1.7976931348623157e308);
  std::stringstream buf;
  write_lineage(l, buf);
  const Lineage back = parse_lineage(buf);
  EXPECT_TRUE(back == l);
  back.for_each([&](std::uint64_t n, double v) { EXPECT_EQ(v, l.at(n)); });

  const fs::path p = scratch("round.csv");
  write_lineage(l, p);
  EXPECT_TRUE(read_lineage(p) == l);
}

TEST(ReadLineage, MissingFile) {
  try {
    read_lineage(scratch("does_not_exist.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io_error);
  }
}

TEST(Params, ParseAndValidate) {
  const auto m = bar_model_from_json(json::parse(R"({"alpha0":0.5,"beta0":1,"alpha1":0.7,
      "beta1":0.3,"sigma2":1,"rho":0.4,"root":{"kind":"dirac","x":2.5}})"));
  EXPECT_EQ(m.params.theta(), (Theta{0.5, 1.0, 0.7, 0.3}));
  ASSERT_TRUE(std::holds_alternative<DiracRoot>(m.root));
  EXPECT_EQ(std::get<DiracRoot>(m.root).x, 2.5);
  const auto s = bar_model_from_json(json::parse(
      R"({"alpha0":0,"beta0":1,"alpha1":0,"beta1":1,"sigma2":1,"rho":0})"));
  EXPECT_TRUE(std::holds_alternative<StationaryRoot>(s.root));
  const auto g = bar_model_from_json(json::parse(R"({"alpha0":0,"beta0":1,"alpha1":0,"beta1":1,
      "sigma2":1,"rho":0,"root":{"kind":"gaussian","mean":1,"variance":2}})"));
  EXPECT_EQ(std::get<GaussianRoot>(g.root).variance, 2.0);
  const auto round = bar_model_from_json(bar_model_to_json(g));
  EXPECT_EQ(round.params.theta(), g.params.theta());

  EXPECT_THROW(bar_model_from_json(json::parse(
                   R"({"alpha0":1.5,"beta0":1,"alpha1":0,"beta1":1,"sigma2":1,"rho":0})")),
               Error);
  EXPECT_THROW(bar_model_from_json(json::parse(
                   R"({"alpha0":0.5,"beta0":1,"alpha1":0,"beta1":1,"sigma2":1,"rho":0.999999,
                       "root":{"kind":"weird"}})")),
               Error);
  EXPECT_THROW(bar_model_from_json(json::parse(R"({"alpha0":0.5})")), Error);
  EXPECT_THROW(bar_model_from_json(json::parse(
                   R"({"alpha0":"x","beta0":1,"alpha1":0,"beta1":1,"sigma2":1,"rho":0})")),
               Error);
}

TEST(Plan, ParseBarAndFinite) {
  const auto p = plan_from_json(json::parse(R"({
    "kind": "calibration", "test": "equal-fixed-point", "null_holds": false,
    "model": {"type": "bar", "alpha0": 0.3, "beta0": 0.7, "alpha1": 0.6, "beta1": 0.4,
              "sigma2": 1, "rho": 0.2},
    "depths": [8, 10], "replications": 50, "seed": 9, "levels": [0.05],
    "tolerances": {"power_min": 0.95}})"));
  EXPECT_EQ(p.kind, ExperimentKind::calibration);
  EXPECT_EQ(p.test, TestName::equal_fixed_point);
  EXPECT_FALSE(p.null_holds);
  EXPECT_EQ(p.depths, (std::vector<unsigned>{8, 10}));
  EXPECT_EQ(p.replications, 50u);
  EXPECT_EQ(p.tol.power_min, 0.95);
  EXPECT_EQ(p.tol.size_low, 0.035);
  EXPECT_EQ(p.levels, (std::vector<double>{0.05}));

  const auto f = plan_from_json(json::parse(R"({
    "kind": "lln", "depths": [1, 2], "replications": 1,
    "model": {"type": "finite", "states": 2, "table": [0,0,0,1, 1,0,0,0],
              "nu": [1, 0], "f": [0, 1]}})"));
  ASSERT_TRUE(std::holds_alternative<FiniteModel>(f.model));
  EXPECT_EQ(std::get<FiniteModel>(f.model).kernel.prob(0, 1, 1), 1.0);

  EXPECT_THROW(plan_from_json(json::parse(R"({"kind":"lln"})")), Error);
  EXPECT_THROW(plan_from_json(json::parse(R"({"kind":"other","depths":[1],"replications":1,
      "model":{"alpha0":0,"beta0":0,"alpha1":0,"beta1":0,"sigma2":1,"rho":0}})")),
               Error);
}

TEST(Reports, FitJsonRoundTrip) {
  const BarParams p(Theta{0.5, 1.0, 0.7, 0.3}, 1.0, 0.4);
  const FitResult f = fit(Lineage(simulate_bar(p, StationaryRoot{}, 8, 3)));
  const fs::path path = scratch("fit.json");
  write_report(f, path);
  std::ifstream in(path);
  const json j = json::parse(in);
  EXPECT_EQ(j.at("bifurk_schema"), 1);
  EXPECT_EQ(j.at("theta_hat")[0].get<double>(), f.theta_hat.alpha0);
  EXPECT_EQ(j.at("theta_hat")[3].get<double>(), f.theta_hat.beta1);
  EXPECT_EQ(j.at("sigma2_hat").get<double>(), f.sigma2_hat);
  EXPECT_EQ(j.at("rho_hat").get<double>(), *f.rho_hat);
  EXPECT_EQ(j.at("gamma_hat")[1].get<double>(), f.gamma_hat[1]);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(j.at("sigma_prime_hat")[r][c].get<double>(), f.sigma_prime_hat(r, c));
    }
  }
  EXPECT_EQ(j.at("counts").at("triangles").get<std::uint64_t>(), f.counts.triangles);
}

TEST(Reports, TestJson) {
  TestReport r;
  r.name = TestName::equal_alpha;
  r.statistic = 3.841459;
  r.dof = 1;
  r.p_value = 0.05;
  const std::string text = to_json(r).dump();
  EXPECT_NE(text.find("\"p_value\":0.05"), std::string::npos);
  EXPECT_NE(text.find("\"bifurk_schema\":1"), std::string::npos);
  EXPECT_NE(text.find("\"name\":\"equal_alpha\""), std::string::npos);
  r.dof.reset();
  EXPECT_EQ(to_json(r).at("dof"), "normal");
  // Field order is fixed.
  EXPECT_EQ(to_json(r).dump(), to_json(r).dump());
}

TEST(Reports, ExperimentJsonAndCsv) {
  ExperimentPlan plan{.model = BarModel{BarParams(Theta{0.5, 1, 0.5, 1}, 1.0, 0.2)},
                      .kind = ExperimentKind::calibration,
                      .depths = {5},
                      .replications = 20,
                      .seed = 4,
                      .test = TestName::equal_beta};
  const auto rep = run_experiment(plan);
  const json j = to_json(rep);
  EXPECT_EQ(j.at("bifurk_schema"), 1);
  EXPECT_EQ(j.at("experiment"), "calibration");
  EXPECT_EQ(j.at("depths")[0].at("replications"), 20);
  EXPECT_TRUE(j.at("verdicts").is_array());
  std::stringstream csv;
  write_records_csv(rep, csv);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "depth,index,seed,ok,n_effective,p_value,statistic,error");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 20);
  EXPECT_EQ(to_json(run_experiment(plan)).dump(), j.dump());
}

}  // namespace
}  // namespace bifurk
