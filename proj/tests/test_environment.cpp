#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "seqrl/environment.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/harness.hpp"

using namespace seqrl;

namespace {
const char* kCoin = R"({
  "obs_count": 2,
  "rewards": [0, 1],
  "actions": ["stay", "flip"],
  "context_length": 0,
  "initial": [0.5, 0, 0.5, 0],
  "table": {
    "0|stay": [0.9, 0, 0, 0.1],
    "0|flip": [0, 0, 0, 1],
    "1|0": ["1/4", "1/4", "1/4", "1/4"],
    "1|1": [1, 0, 0, 0]
  }
})";
}  // namespace

TEST(Environment, ParsesDecimalNumbersExactly) {
  const auto spec = parse_environment(kCoin);
  EXPECT_EQ(spec.table.at("0|stay")[0], Rational(9, 10));
  EXPECT_EQ(spec.table.at("0|stay")[3], Rational(1, 10));
  ValidatedEnvironment env(spec);
  EXPECT_EQ(env.row(Context::initial({0, 0}, 0), 0)[0], Rational(9, 10));
  const Row uniform(4, Rational(1, 4));
  EXPECT_EQ(env.row(Context::initial({1, 0}, 0), 0), uniform);
  EXPECT_TRUE(env.is_mdp());
}

TEST(Environment, RoundTripsThroughJson) {
  const auto spec = parse_environment(kCoin);
  const auto again = parse_environment(dump_environment(spec));
  EXPECT_EQ(dump_environment(again), dump_environment(spec));
}

TEST(Environment, RejectsBadRowSum) {
  auto spec = parse_environment(kCoin);
  spec.table["0|stay"] = {Rational(9, 10), 0, 0, 0};
  EXPECT_THROW(ValidatedEnvironment{spec}, RowSumError);
  spec = parse_environment(kCoin);
  spec.initial = {Rational(1, 2), 0, Rational(2, 5), 0};
  EXPECT_THROW(ValidatedEnvironment{spec}, RowSumError);
}

TEST(Environment, RejectsMissingReachableRow) {
  auto spec = parse_environment(kCoin);
  spec.table.erase("1|1");
  EXPECT_THROW(ValidatedEnvironment{spec}, MissingRow);
}

TEST(Environment, RejectsAliasMismatch) {
  auto spec = fixtures::two_action();
  spec.actions.push_back({"a2_1", 1});
  spec.table["0|2"] = fixtures::point(2, 1);
  EXPECT_THROW(ValidatedEnvironment{spec}, AliasMismatch);
  spec.table["0|2"] = fixtures::point(2, 0);
  ValidatedEnvironment env(spec);
  EXPECT_EQ(env.canonical_action(2), 1);
  spec.table.erase("0|2");
  ValidatedEnvironment env2(spec);
  EXPECT_EQ(env2.row(Context::initial({0, 0}, 0), 2), fixtures::point(2, 0));
}

TEST(Environment, ExtendsRewardSetWithZero) {
  auto spec = fixtures::mdp(1, {"1", "2"}, {"a"}, [](int, int) { return fixtures::point(2, 1); });
  ValidatedEnvironment env(spec);
  ASSERT_EQ(env.reward_count(), 3);
  EXPECT_EQ(env.reward(env.zero_reward()), Rational(0));
  EXPECT_EQ(env.row(Context::initial({0, 0}, 0), 0), (Row{0, 1, 0}));
  EXPECT_DOUBLE_EQ(env.reward_range(), 2.0);
}

TEST(Environment, MdpRowsDependOnlyOnObservation) {
  ValidatedEnvironment env(parse_environment(kCoin));
  History a({0, 0});
  History b({1, 1});
  b.append(1, {0, 0});
  EXPECT_EQ(env.transition(a, 1), env.transition(b, 1));
}

TEST(Environment, EnumeratesHistories) {
  ValidatedEnvironment env(parse_environment(kCoin));
  const auto zero = enumerate_histories(env, 0);
  ASSERT_EQ(zero.size(), 2u);
  EXPECT_EQ(zero[0].key(), "0,0");
  EXPECT_EQ(zero[1].key(), "1,0");

  const auto one = enumerate_histories(env, 1);
  // From obs 0: stay -> (0,0),(1,1); flip -> (1,1). From obs 1: 4 + 1.
  std::vector<std::string> keys;
  for (const auto& h : one) keys.push_back(h.key());
  const std::vector<std::string> expected{"0,0,0;0,0", "0,0,0;1,1", "0,0,1;1,1", "1,0,0;0,0", "1,0,0;0,1",
                                          "1,0,0;1,0", "1,0,0;1,1", "1,0,1;0,0"};
  EXPECT_EQ(keys, expected);
  EXPECT_THROW(enumerate_histories(env, 1, 2), BudgetExceeded);
}

TEST(Environment, HistoryMassSumsToOnePerActionSequence) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ValidatedEnvironment env(random_env(seed, {2, 2, 3}, 1, 0.3));
    std::map<std::vector<int>, Rational> mass;
    for (const auto& h : enumerate_histories(env, 3)) {
      std::vector<int> acts(h.actions().begin(), h.actions().end());
      mass[acts] += env.history_probability(h);
    }
    EXPECT_EQ(mass.size(), 27u);
    for (const auto& [acts, m] : mass) EXPECT_EQ(m, Rational(1)) << "seed " << seed;
  }
}

TEST(Policy, RowLookupAndValidation) {
  PolicySpec p;
  p.rows["0"] = {0.25, 0.75};
  EXPECT_EQ(p.row("0")[1], 0.75);
  EXPECT_THROW(p.row("1"), MissingPolicyRow);
  EXPECT_NO_THROW(validate_policy(p, 2));
  EXPECT_THROW(validate_policy(p, 3), RowSumError);
  p.rows["1"] = {0.5, 0.6};
  EXPECT_THROW(validate_policy(p, 2), RowSumError);
  p.rows["1"] = {1.5, -0.5};
  EXPECT_THROW(validate_policy(p, 2), RowSumError);
}
