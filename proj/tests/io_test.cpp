#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include <sosred/io.hpp>

#include "test_support.hpp"

namespace sosred {
namespace {

Polynomial X(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial C(std::size_t n, double c) { return Polynomial::constant(n, c); }

std::string data(const std::string& name) { return std::string(SOSRED_DATA_DIR) + "/" + name; }

std::string error_of(const std::string& content) {
  try {
    parse_problem_string(content);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

GTEST_TEST(ParseProblemTest, Minimal) {
  const ProblemFile p = parse_problem_string(
      R"({"variables": ["z"], "inequalities": [{"label": "g", "poly": {"terms": [{"coeff": 1, "exps": [0]},
          {"coeff": -1, "exps": [1]}]}}]})");
  EXPECT_EQ(p.nvars(), 1u);
  ASSERT_EQ(p.inequalities.size(), 1u);
  EXPECT_EQ(p.inequalities.label(0), "g");
  EXPECT_TRUE(p.inequalities[0] == C(1, 1) - X(1, 0));
  EXPECT_FALSE(p.candidate);
  EXPECT_FALSE(p.box);
}

GTEST_TEST(ParseProblemTest, Errors) {
  EXPECT_NE(error_of(R"({"variables": ["x", "x"], "inequalities": []})").find("duplicate variable name \"x\""),
            std::string::npos);
  EXPECT_NE(error_of(R"({"variables": ["x", "x"], "inequalities": []})").find("/variables/1"), std::string::npos);
  const std::string arity = error_of(
      R"({"variables": ["x", "y"], "inequalities": [{"poly": {"terms": [{"coeff": 1, "exps": [0, 0]},
          {"coeff": 2, "exps": [1]}]}}]})");
  EXPECT_NE(arity.find("/inequalities/0/poly/terms/1"), std::string::npos) << arity;
  EXPECT_NE(arity.find("exponent arity 1 does not match 2 variables"), std::string::npos) << arity;
  const std::string syntax = error_of("{\n  \"variables\": [\"x\",\n}");
  EXPECT_NE(syntax.find("<input>:3:"), std::string::npos) << syntax;
  EXPECT_NE(error_of(R"({"inequalities": []})").find("variables"), std::string::npos);
  EXPECT_NE(error_of(R"({"variables": ["x"], "inequalities": [], "box": {"lower": [1], "upper": [0]}})"), "");
  EXPECT_NE(error_of(R"({"variables": ["x"], "inequalities": [{"poly": {"terms": [{"coeff": "a", "exps": [0]}]}}]})"),
            "");
  EXPECT_THROW(parse_problem(data("does_not_exist.json")), FormatError);
}

GTEST_TEST(ParseProblemTest, DataFiles) {
  for (const char* name : {"toy_redundant.json", "toy_nonredundant.json", "duplicates.json", "disk.json",
                           "mass_spring_constraints.json"}) {
    EXPECT_NO_THROW(parse_problem(data(name))) << name;
  }
  const ProblemFile toy = parse_problem(data("toy_redundant.json"));
  ASSERT_TRUE(toy.candidate);
  EXPECT_TRUE(*toy.candidate == C(1, 2) - X(1, 0));
  EXPECT_EQ(toy.box->upper(0), 2.0);
}

GTEST_TEST(RoundTripTest, Problem) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ProblemFile p;
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
    for (std::size_t k = 0; k < n; ++k) p.variables.push_back("v" + std::to_string(k));
    p.inequalities = SemialgebraicSet(n);
    for (int i = 0; i < 3; ++i) p.inequalities.add(test::random_polynomial(rng, n, 3, 5), "g" + std::to_string(i));
    if (trial % 2) p.candidate = test::random_polynomial(rng, n, 2, 3);
    if (trial % 3) p.box = Box::symmetric(static_cast<Eigen::Index>(n), 1.25 + trial);
    const json j = problem_to_json(p);
    const ProblemFile q = parse_problem_string(j.dump());
    EXPECT_TRUE(q == p);
    EXPECT_EQ(problem_to_json(q).dump(), j.dump());
  }
}

GTEST_TEST(RoundTripTest, SystemAndMpcSpec) {
  const MpcSpec spec = mpc_spec_from_json(read_json_file(data("double_integrator_mpc.json")));
  const json j = mpc_spec_to_json(spec);
  const MpcSpec back = mpc_spec_from_json(j);
  EXPECT_EQ(mpc_spec_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.control_horizon, 3);
  EXPECT_EQ(back.prediction_horizon, 7);
  EXPECT_EQ(back.terminal->level, 10.0);

  SystemFile s;
  s.system = spec.system;
  s.Ts = 0.5;
  const SystemFile t = system_from_json(system_to_json(s));
  EXPECT_EQ(t.system.A, s.system.A);
  EXPECT_EQ(t.system.B, s.system.B);
  EXPECT_EQ(*t.Ts, 0.5);
}

GTEST_TEST(RoundTripTest, CertificateVerifiesFromJsonAlone) {
  const ProblemFile p = parse_problem(data("disk.json"));
  CertOptions opt;
  opt.box = p.box;
  const Verdict v = check_redundant(*p.candidate, p.inequalities, opt);
  ASSERT_TRUE(v.redundant());
  const json j = certificate_to_json(*v.certificate);
  const RedundancyCertificate back = certificate_from_json(parse_json_text(j.dump()));
  EXPECT_EQ(certificate_to_json(back).dump(), j.dump());
  EXPECT_TRUE(back.target == *p.candidate);
  EXPECT_TRUE(verify_certificate(back, *p.candidate, p.inequalities, opt));
  EXPECT_EQ(back.rho, v.certificate->rho);

  json tampered = j;
  tampered["rho"] = v.certificate->rho + 1.0;
  EXPECT_FALSE(verify_certificate(certificate_from_json(tampered), *p.candidate, p.inequalities, opt));
  json broken = j;
  broken.erase("sigma0");
  EXPECT_THROW(certificate_from_json(broken), FormatError);
}

GTEST_TEST(ReportTest, HeaderAndVerdict) {
  const json h = report_header("certify");
  EXPECT_EQ(h["tool"], "sosred");
  EXPECT_EQ(h["version"], version());
  Verdict v;
  v.kind = VerdictKind::Unknown;
  v.reason = UnknownReason::DegreeCap;
  const json j = verdict_to_json(v);
  EXPECT_EQ(j["verdict"], "Unknown");
  EXPECT_TRUE(j["rho"].is_null());
}

GTEST_TEST(ReportTest, PointCloud) {
  const ProblemFile p = parse_problem(data("disk.json"));
  std::ostringstream os;
  const std::size_t inside = write_point_cloud(os, p.inequalities, *p.box, p.variables, 2000, 1);
  EXPECT_GT(inside, 0u);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "x,y");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, inside);
}

GTEST_TEST(FileTest, WriteAndRead) {
  const auto path = std::filesystem::temp_directory_path() / "sosred_io_test.json";
  write_json_file(path.string(), json{{"a", 1}});
  EXPECT_EQ(read_json_file(path.string())["a"], 1);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace sosred
