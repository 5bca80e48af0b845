#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "seqrl/codec.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/harness.hpp"

using namespace seqrl;

TEST(RandomEnv, DeterministicPerSeed) {
  EXPECT_EQ(dump_environment(random_env(3, {3, 3, 4}, 1, 0.3)), dump_environment(random_env(3, {3, 3, 4}, 1, 0.3)));
  EXPECT_NE(dump_environment(random_env(3, {3, 3, 4}, 1, 0.3)), dump_environment(random_env(4, {3, 3, 4}, 1, 0.3)));
  EXPECT_EQ(env_fingerprint(random_env(3, {2, 2, 2}, 0, 0.0)), env_fingerprint(random_env(3, {2, 2, 2}, 0, 0.0)));
  EXPECT_EQ(env_fingerprint(random_env(3, {2, 2, 2}, 0, 0.0)).size(), 8u);
}

TEST(RandomEnv, ShapeAndValidity) {
  const auto spec = random_env(5, {2, 3, 5}, 2, 1.0);
  ValidatedEnvironment env(spec);
  EXPECT_EQ(env.reward(0), Rational(0));
  EXPECT_EQ(env.reward(2), Rational(1));
  for (const auto& [key, row] : spec.table) {
    int support = 0;
    for (const auto& p : row) support += p > 0;
    EXPECT_EQ(support, 1) << key;
  }
  ValidatedEnvironment padded(pad_environment(spec, 2));
  EXPECT_EQ(padded.action_count(), 8);
  EXPECT_THROW(random_env(1, {5, 2, 2}, 0, 0.0), InvalidSizes);
  EXPECT_THROW(random_env(1, {2, 2, 17}, 0, 0.0), InvalidSizes);
  EXPECT_THROW(random_env(1, {2, 2, 2}, 3, 0.0), InvalidSizes);
  EXPECT_THROW(random_env(1, {2, 2, 2}, 0, 1.5), InvalidSizes);
}

TEST(ScalingEnv, ActionsFollowParity) {
  ValidatedEnvironment env(scaling_env(11, 8, 1));
  ASSERT_EQ(env.action_count(), 8);
  for (const auto& ctx : env.reachable_contexts())
    for (int a = 2; a < 8; ++a) EXPECT_EQ(env.row(ctx, a), env.row(ctx.mapped(std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1}), a % 2));
}

TEST(Suites, BoundsArithmeticPasses) {
  SuiteConfig config;
  config.suite = "bounds-arith";
  const auto report = run_suite(config);
  EXPECT_TRUE(report.ok());
  EXPECT_GT(report.passed(), 0u);
}

TEST(Suites, MarkovSkipsNonMarkovEnvironment) {
  SuiteConfig config;
  config.suite = "thm-markov";
  config.env_count = 3;
  config.m = 2;
  const auto report = run_suite(config);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.skipped(), 3u);
  EXPECT_EQ(report.passed(), 0u);
}

TEST(Suites, UnknownSuite) {
  SuiteConfig config;
  config.suite = "nope";
  EXPECT_THROW(run_suite(config), InvalidParam);
  EXPECT_EQ(suite_ids().size(), 10u);
}

TEST(Suites, SmallValueSuitesPass) {
  for (const std::string suite : {"prop-qmax", "lemma-qstar", "thm-markov"}) {
    SuiteConfig config;
    config.suite = suite;
    config.env_count = 3;
    const auto report = run_suite(config);
    EXPECT_TRUE(report.ok()) << suite;
    EXPECT_GT(report.passed(), 0u) << suite;
  }
}

TEST(Reports, EmptyCsvIsHeaderOnly) {
  EXPECT_EQ(emit_report(VerificationReport{}, ReportFormat::Csv), "suite,env_id,check_id,lhs,rhs,abs_diff,tol,pass\n");
}

TEST(Reports, FormatsAgreeAndRerunsAreIdentical) {
  SuiteConfig config;
  config.suite = "prop-qmax";
  config.env_count = 4;
  const auto a = run_suite(config);
  const auto b = run_suite(config);
  EXPECT_EQ(emit_report(a, ReportFormat::Json), emit_report(b, ReportFormat::Json));
  EXPECT_EQ(emit_report(a, ReportFormat::Csv), emit_report(b, ReportFormat::Csv));

  const auto doc = nlohmann::json::parse(emit_report(a, ReportFormat::Json));
  std::istringstream csv(emit_report(a, ReportFormat::Csv));
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  const auto& records = doc.is_array() ? doc : doc.at("records");
  EXPECT_EQ(records.size(), rows);
  EXPECT_EQ(rows, a.records.size());
  EXPECT_NE(emit_report(a, ReportFormat::Markdown).find("prop-qmax"), std::string::npos);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
  EXPECT_THROW(parse_report_format("xml"), InvalidParam);
}

TEST(Reports, WriteFailureIsIoError) {
  EXPECT_THROW(write_report(VerificationReport{}, ReportFormat::Csv, "/nonexistent-dir/x.csv"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "seqrl_report_test.csv";
  write_report(VerificationReport{}, ReportFormat::Csv, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "suite,env_id,check_id,lhs,rhs,abs_diff,tol,pass");
  std::filesystem::remove(path);
}

TEST(PolicyFiles, RoundTrip) {
  PolicySpec p;
  p.mode = HistoryMode::Sequentialized;
  p.context_length = 1;
  p.rows["0,1/"] = {0.25, 0.75};
  p.rows["0,1/1"] = {1.0, 0.0};
  const auto back = parse_policy(dump_policy(p));
  EXPECT_EQ(back.mode, p.mode);
  EXPECT_EQ(back.context_length, 1);
  EXPECT_EQ(back.rows, p.rows);
  EXPECT_THROW(parse_policy("{"), ParseError);
}
