#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/esa.hpp"
#include "seqrl/harness.hpp"

using namespace seqrl;

namespace {

void expect_stochastic(const SurrogateMDP& mdp) {
  for (int s = 0; s < mdp.state_count; ++s)
    for (int u = 0; u < mdp.width; ++u) {
      const auto& row = mdp.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)];
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
}

}  // namespace

TEST(Abstraction, SingleContextIsOneCell) {
  ValidatedEnvironment env(fixtures::two_action());
  auto process = EsaProcess::plain(env, 0.5, 30);
  const auto map = build_abstraction(process, 0.01, 3);
  EXPECT_EQ(map.occupied_cells(), 1);
  EXPECT_EQ(map.members.size(), 1u);
  EXPECT_DOUBLE_EQ(map.complete_histories, 1 + 2 + 4 + 8);
}

TEST(Abstraction, CoarseGridIsOneCell) {
  ValidatedEnvironment env(random_env(4, {3, 3, 3}, 1, 0.3));
  auto process = EsaProcess::plain(env, 0.5, 20);
  EXPECT_EQ(build_abstraction(process, 2.0, 3).occupied_cells(), 1);
}

TEST(Abstraction, SeparatedValuesSplit) {
  ValidatedEnvironment env(fixtures::two_obs_four_action());
  auto process = EsaProcess::plain(env, 0.5, 30);
  const auto map = build_abstraction(process, 1.0 / 3.0, 2);
  EXPECT_GE(map.occupied_cells(), 2);
}

TEST(Abstraction, CellSpreadWithinDelta) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    fixtures::Rig s(random_env(seed, {2, 3, 4}, 1, 0.3));
    for (double delta : {0.05, 0.2}) {
      auto plain = EsaProcess::plain(s.env, 0.5, 20);
      EXPECT_LE(build_abstraction(plain, delta, 3).max_cell_spread(), delta);
      auto bin = EsaProcess::binarized(s.seq, 0.5, 20);
      EXPECT_LE(build_abstraction(bin, delta, 3).max_cell_spread(), delta);
    }
  }
}

TEST(Abstraction, CensusMatchesEnumeration) {
  for (std::uint64_t seed : {5u, 6u}) {
    fixtures::Rig s(random_env(seed, {2, 2, 4}, 1, 0.3));
    const double gamma = 0.5;
    const int horizon = 20;
    const double delta = 0.1;
    const int depth = 2;

    Planner planner(s.env, gamma, horizon);
    std::set<Cell> plain_cells;
    double plain_count = 0;
    for (int k = 0; k <= depth; ++k)
      for (const auto& h : enumerate_histories(s.env, k)) {
        plain_cells.insert(cell_of(planner.q_row(h), delta));
        ++plain_count;
      }
    auto plain = EsaProcess::plain(s.env, gamma, horizon);
    const auto pmap = build_abstraction(plain, delta, depth);
    EXPECT_EQ(pmap.occupied_cells(), static_cast<int>(plain_cells.size()));
    EXPECT_DOUBLE_EQ(pmap.complete_histories, plain_count);

    SeqPlanner sp(s.seq, gamma, horizon);
    std::set<Cell> bin_cells;
    double complete = 0;
    double partial = 0;
    for (int k = 0; k <= depth * s.codec.depth(); ++k)
      for (const auto& tau : enumerate_seq_histories(s.seq, k)) {
        bin_cells.insert(cell_of({sp.q_star(tau, 0), sp.q_star(tau, 1)}, delta));
        (tau.complete() ? complete : partial) += 1;
      }
    auto bin = EsaProcess::binarized(s.seq, gamma, horizon);
    const auto bmap = build_abstraction(bin, delta, depth);
    EXPECT_EQ(bmap.occupied_cells(), static_cast<int>(bin_cells.size()));
    EXPECT_DOUBLE_EQ(bmap.complete_histories, complete);
    EXPECT_DOUBLE_EQ(bmap.partial_histories, partial);
  }
}

TEST(Abstraction, BudgetCap) {
  ValidatedEnvironment env(random_env(4, {3, 3, 3}, 1, 0.0));
  auto process = EsaProcess::plain(env, 0.5, 10);
  EXPECT_THROW(build_abstraction(process, 0.1, 4, 100), BudgetExceeded);
}

TEST(Surrogate, MdpWithFineGridReproducesMdp) {
  ValidatedEnvironment env(fixtures::two_obs_four_action());
  auto process = EsaProcess::plain(env, 0.5, 40);
  const auto map = build_abstraction(process, 1e-3, 2);
  ASSERT_EQ(map.occupied_cells(), 2);
  const auto mdp = build_surrogate(process, map);
  expect_stochastic(mdp);
  for (const auto& m : map.members) {
    const int o = process.context(m.state).last().obs;
    for (int a = 0; a < 4; ++a) {
      const int next_obs = a % 2;
      const int next_cell = map.lookup(process, process.add(Context::initial({next_obs, 0}, 0)));
      EXPECT_DOUBLE_EQ(mdp.transition[static_cast<std::size_t>(m.cell)][static_cast<std::size_t>(a)][static_cast<std::size_t>(next_cell)], 1.0);
      EXPECT_DOUBLE_EQ(mdp.reward[static_cast<std::size_t>(m.cell)][static_cast<std::size_t>(a)], (o == 0 && next_obs == 1) ? 1.0 : 0.0);
    }
  }
  EXPECT_EQ(mdp.reward[static_cast<std::size_t>(mdp.sink)], std::vector<double>(4, 0.0));

  const auto sol = solve_surrogate(mdp, 0.5, 1e-12);
  const auto policy = compose_policy(process, map, sol);
  const auto loss = policy_loss(env, policy, 0.5, 40, 3);
  EXPECT_LE(loss.loss, loss.slack + 1e-12);
}

TEST(Surrogate, SingleCellRewardIsWeightedMean) {
  ValidatedEnvironment env(random_env(9, {3, 3, 2}, 0, 0.3));
  auto process = EsaProcess::plain(env, 0.5, 20);
  const auto map = build_abstraction(process, 10.0, 3);
  ASSERT_EQ(map.occupied_cells(), 1);
  for (Weighting w : {Weighting::Uniform, Weighting::Visit}) {
    const auto mdp = build_surrogate(process, map, w);
    expect_stochastic(mdp);
    for (int a = 0; a < 2; ++a) {
      double num = 0.0;
      double den = 0.0;
      for (const auto& m : map.members) {
        const double weight = w == Weighting::Uniform ? m.histories : m.visit;
        const Row& row = env.row(process.context(m.state), a);
        double r = 0.0;
        for (int i = 0; i < env.outcome_count(); ++i) r += row[static_cast<std::size_t>(i)].get_d() * env.reward_value(env.outcome(i).reward);
        num += weight * r;
        den += weight;
      }
      EXPECT_NEAR(mdp.reward[0][static_cast<std::size_t>(a)], num / den, 1e-12);
      EXPECT_NEAR(mdp.transition[0][static_cast<std::size_t>(a)][0], 1.0, 1e-12);
    }
  }
}

TEST(Surrogate, WeightingIrrelevantForSingletonCells) {
  fixtures::Rig s(fixtures::four_action());
  auto bin = EsaProcess::binarized(s.seq, 0.5, 40);
  const auto map = build_abstraction(bin, 1e-4, 2);
  std::vector<int> per_cell(static_cast<std::size_t>(map.occupied_cells()), 0);
  for (const auto& m : map.members) ++per_cell[static_cast<std::size_t>(m.cell)];
  ASSERT_EQ(*std::max_element(per_cell.begin(), per_cell.end()), 1);
  const auto u = build_surrogate(bin, map, Weighting::Uniform);
  const auto v = build_surrogate(bin, map, Weighting::Visit);
  EXPECT_EQ(u.transition, v.transition);
  EXPECT_EQ(u.reward, v.reward);
  expect_stochastic(u);
}

TEST(Surrogate, EmptyCellRejected) {
  ValidatedEnvironment env(fixtures::two_action());
  auto process = EsaProcess::plain(env, 0.5, 10);
  auto map = build_abstraction(process, 0.1, 1);
  map.cells.push_back({99, 99});
  map.cell_index[{99, 99}] = 1;
  EXPECT_THROW(build_surrogate(process, map), EmptyCell);
}

TEST(SolveSurrogate, HandSolvedMdps) {
  SurrogateMDP one;
  one.state_count = 1;
  one.width = 2;
  one.transition = {{{1.0}, {1.0}}};
  one.reward = {{0.25, 0.5}};
  const auto s1 = solve_surrogate(one, 0.5, 1e-12);
  EXPECT_NEAR(s1.values[0], 1.0, 1e-12);
  EXPECT_EQ(s1.policy[0], 1);

  SurrogateMDP two;
  two.state_count = 2;
  two.width = 2;
  two.transition = {{{0.0, 1.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, 1.0}}};
  two.reward = {{1.0, 0.0}, {0.0, 0.0}};
  const auto s2 = solve_surrogate(two, 0.5, 1e-12);
  EXPECT_NEAR(s2.values[0], 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(s2.values[1], 2.0 / 3.0, 1e-12);
  EXPECT_EQ(s2.policy, (std::vector<int>{0, 0}));

  for (double tol : {1e-2, 1e-4, 1e-6}) {
    const auto a = solve_surrogate(two, 0.9, tol);
    const auto b = solve_surrogate(two, 0.9, tol / 2);
    EXPECT_NEAR(a.values[0], b.values[0], tol);
    EXPECT_NEAR(a.values[0], 1.0 / (1.0 - 0.81), tol);
    EXPECT_LE(a.iterations, b.iterations);
  }
  EXPECT_THROW(solve_surrogate(two, 1.0, 1e-6), InvalidParam);
}

TEST(PolicyLoss, OptimalAndUniform) {
  ValidatedEnvironment env(fixtures::two_action());
  const int horizon = horizon_for(0.5, 1.0, 1e-12);
  PolicySpec best;
  best.rows["0"] = {1.0, 0.0};
  EXPECT_NEAR(policy_loss(env, best, 0.5, horizon, 3).loss, 0.0, 1e-10);
  PolicySpec uniform;
  uniform.rows["0"] = {0.5, 0.5};
  const auto loss = policy_loss(env, uniform, 0.5, horizon, 3);
  EXPECT_NEAR(loss.loss, 1.0, 1e-10);
  EXPECT_LE(loss.slack, 1e-11);
}

TEST(Bounds, ExactValues) {
  EXPECT_EQ(bound_plain(Rational(1, 10), Rational(1, 2), 4), Rational(655360000));
  EXPECT_EQ(bound_plain(Rational(1), Rational(0), 2), Rational(4));
  EXPECT_EQ(bound_plain(Rational(1), Rational(0), 2, Rational(2)), Rational(16));

  const auto b = bound_binary(Rational(1, 10), Rational(1, 2), 4);
  EXPECT_EQ(b.d, 2);
  EXPECT_EQ(b.padded_actions, 4);
  EXPECT_EQ(b.binary_bound, Rational(74649600));
  EXPECT_LE(b.binary_direct_bound, to_double(b.binary_proof_bound) * (1 + 1e-12));
  EXPECT_LE(b.binary_proof_bound, b.binary_bound);
  EXPECT_NEAR(b.lambda, std::sqrt(0.5), 1e-15);
  EXPECT_GE(b.one_minus_lambda, to_double(b.lambda_certificate));
  EXPECT_EQ(b.lambda_certificate, Rational(1, 5));
  EXPECT_EQ(b.eps_prime_gamma, Rational(1, 20));
  EXPECT_NEAR(b.eps_prime_lambda, 0.1 * std::sqrt(0.5), 1e-15);

  const auto five = bound_binary(Rational(1, 10), Rational(1, 2), 5);
  EXPECT_EQ(five.padded_actions, 8);
  EXPECT_EQ(five.d, 3);
  EXPECT_THROW(bound_binary(Rational(1, 10), Rational(0), 4), InvalidParam);
}
