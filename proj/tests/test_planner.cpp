#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/harness.hpp"
#include "seqrl/planner.hpp"

using namespace seqrl;

namespace {

// Plain recursion over full histories, no memo, no contexts.
double brute_v(const ValidatedEnvironment& env, const History& h, double gamma, int steps);

double brute_q(const ValidatedEnvironment& env, const History& h, int a, double gamma, int steps) {
  if (steps == 0) return 0.0;
  const Row& row = env.transition(h, a);
  double total = 0.0;
  for (int i = 0; i < env.outcome_count(); ++i) {
    const double p = row[static_cast<std::size_t>(i)].get_d();
    if (p == 0.0) continue;
    const Percept next = env.outcome(i);
    total += p * (env.reward(next.reward).get_d() + gamma * brute_v(env, h.extended(a, next), gamma, steps - 1));
  }
  return total;
}

double brute_v(const ValidatedEnvironment& env, const History& h, double gamma, int steps) {
  if (steps == 0) return 0.0;
  double best = -1e300;
  for (int a = 0; a < env.action_count(); ++a) best = std::max(best, brute_q(env, h, a, gamma, steps));
  return best;
}

// Sequentialized optimal values straight from the definition: symbols before
// the last one of a code word earn nothing and leave h unchanged.
double seq_v(const fixtures::Rig& s, const History& h, const Codeword& pending, double lambda, int steps);

double seq_q(const fixtures::Rig& s, const History& h, const Codeword& pending, int x, double lambda, int steps) {
  if (steps == 0) return 0.0;
  Codeword word = pending;
  word.push_back(x);
  if (static_cast<int>(word.size()) < s.codec.depth()) return lambda * seq_v(s, h, word, lambda, steps - 1);
  const int a = s.codec.decode(word);
  const Row& row = s.env.transition(h, a);
  double total = 0.0;
  for (int i = 0; i < s.env.outcome_count(); ++i) {
    const double p = row[static_cast<std::size_t>(i)].get_d();
    if (p == 0.0) continue;
    const Percept next = s.env.outcome(i);
    total += p * (s.env.reward(next.reward).get_d() + lambda * seq_v(s, h.extended(a, next), {}, lambda, steps - 1));
  }
  return total;
}

double seq_v(const fixtures::Rig& s, const History& h, const Codeword& pending, double lambda, int steps) {
  if (steps == 0) return 0.0;
  double best = -1e300;
  for (int x = 0; x < s.codec.base(); ++x) best = std::max(best, seq_q(s, h, pending, x, lambda, steps));
  return best;
}

SequentializedHistory with_pending(const fixtures::Rig& s, const History& h, const Codeword& pending) {
  auto tau = s.seq.sequentialize(h);
  for (int x : pending) tau = tau.extended(x, {h.last().obs, s.env.zero_reward()});
  return tau;
}

}  // namespace

TEST(Planner, MatchesBruteForceTreeWalk) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    ValidatedEnvironment env(random_env(seed, {2, 2, 3}, static_cast<int>(seed % 3), 0.3));
    const double gamma = 0.7;
    const int horizon = 4;
    Planner planner(env, gamma, horizon);
    for (const auto& h : enumerate_histories(env, 2))
      for (int a = 0; a < env.action_count(); ++a)
        EXPECT_NEAR(planner.q_star(h, a), brute_q(env, h, a, gamma, horizon), 1e-12) << "seed " << seed;
  }
}

TEST(SeqPlanner, MatchesDefinitionOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    fixtures::Rig s(random_env(seed, {2, 2, seed % 2 ? 4 : 3}, static_cast<int>(seed % 2), 0.3));
    const double gamma = 0.6;
    const int horizon = 2;
    SeqPlanner sp(s.seq, gamma, horizon);
    const int d = s.codec.depth();
    for (const auto& h : enumerate_histories(s.env, 1)) {
      for (const Codeword& pending : {Codeword{}, Codeword{1}}) {
        const auto tau = with_pending(s, h, pending);
        const int steps = horizon * d - static_cast<int>(pending.size());
        for (int x = 0; x < 2; ++x)
          EXPECT_NEAR(sp.q_star(tau, x), seq_q(s, h, pending, x, sp.lambda(), steps), 1e-12) << "seed " << seed;
      }
    }
  }
}

TEST(Planner, TwoActionValues) {
  ValidatedEnvironment env(fixtures::two_action());
  const int horizon = horizon_for(0.5, 1.0, 1e-10);
  Planner planner(env, 0.5, horizon);
  const History h({0, 0});
  EXPECT_NEAR(planner.q_star(h, 0), 2.0, 1e-9);
  EXPECT_NEAR(planner.q_star(h, 1), 1.0, 1e-9);
  EXPECT_NEAR(planner.v_star(h), 2.0, 1e-9);

  PolicySpec uniform;
  uniform.rows["0"] = {0.5, 0.5};
  PolicyEvaluator ev(env, uniform, 0.5, horizon);
  EXPECT_NEAR(ev.v_pi(h), 1.0, 1e-9);
  EXPECT_NEAR(ev.q_pi(h, 0), 1.5, 1e-9);
  EXPECT_NEAR(ev.q_pi(h, 1), 0.5, 1e-9);
}

TEST(Planner, FourActionValuesAndRestrictedArgmax) {
  fixtures::Rig s(fixtures::four_action());
  const int horizon = horizon_for(0.25, 1.0, 1e-12);
  Planner planner(s.env, 0.25, horizon);
  const History h({0, 0});
  EXPECT_NEAR(planner.v_star(h), 4.0 / 3.0, 1e-10);
  const std::vector<double> expected{1.0 / 3.0, 2.0 / 3.0, 1.0, 4.0 / 3.0};
  const auto q = planner.q_row(h);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(q[static_cast<std::size_t>(a)], expected[static_cast<std::size_t>(a)], 1e-10);
  EXPECT_EQ(restricted_argmax(planner, s.codec, h, Codeword{}), 3);
  EXPECT_EQ(restricted_argmax(planner, s.codec, h, Codeword{0}), 1);
  EXPECT_EQ(restricted_argmax(planner, s.codec, h, Codeword{1, 0}), 2);
}

TEST(Planner, ArgmaxTiesGoToSmallestCode) {
  auto spec = fixtures::mdp(1, {"0", "1"}, {"a00", "a01", "a10", "a11"}, [](int, int a) { return fixtures::point(2, a >= 2 ? 1 : 0); });
  fixtures::Rig s(spec);
  Planner planner(s.env, 0.5, 20);
  const History h({0, 0});
  EXPECT_EQ(restricted_argmax(planner, s.codec, h, Codeword{}), 2);
  EXPECT_EQ(restricted_argmax(planner, s.codec, h, Codeword{0}), 0);
}

TEST(SeqPlanner, FourActionValues) {
  fixtures::Rig s(fixtures::four_action());
  const int horizon = horizon_for(0.25, 1.0, 1e-12);
  SeqPlanner sp(s.seq, 0.25, horizon);
  EXPECT_DOUBLE_EQ(sp.lambda(), 0.5);
  const History h({0, 0});
  const auto tau = s.seq.sequentialize(h);
  EXPECT_NEAR(sp.v_star(tau), 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(sp.q_star(tau, 1), 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(sp.q_star(tau, 0), 1.0 / 3.0, 1e-10);
  const auto mid = with_pending(s, h, Codeword{1});
  EXPECT_NEAR(sp.q_star(mid, 0), 1.0, 1e-10);
  EXPECT_NEAR(sp.q_star(mid, 1), 4.0 / 3.0, 1e-10);
}

TEST(Planner, MyopicAtGammaZero) {
  ValidatedEnvironment env(random_env(8, {3, 3, 3}, 1, 0.2));
  Planner planner(env, 0.0, 5);
  for (const auto& h : enumerate_histories(env, 1)) {
    for (int a = 0; a < env.action_count(); ++a) {
      double r = 0.0;
      const Row& row = env.transition(h, a);
      for (int i = 0; i < env.outcome_count(); ++i) r += row[static_cast<std::size_t>(i)].get_d() * env.reward_value(env.outcome(i).reward);
      EXPECT_NEAR(planner.q_star(h, a), r, 1e-15);
    }
  }
  EXPECT_EQ(lambda_of(0.0, 3), 0.0);
}

TEST(PolicyEvaluator, MissingRowForReachableHistory) {
  ValidatedEnvironment env(fixtures::two_action());
  PolicySpec p;
  p.context_length = -1;
  p.rows["0,0"] = {0.5, 0.5};
  p.rows["0,0,0;0,1"] = {1.0, 0.0};
  p.rows["0,0,1;0,0"] = {1.0, 0.0};
  PolicyEvaluator ev(env, p, 0.5, 3);
  EXPECT_THROW(ev.v_pi(History({0, 0})), MissingPolicyRow);
  PolicyEvaluator shallow(env, p, 0.5, 2);
  EXPECT_NEAR(shallow.v_pi(History({0, 0})), 0.5 * (1 + 0.5) + 0.5 * (0 + 0.5), 1e-15);
}

TEST(Planner, OptimalityEquationHoldsWithinTail) {
  ValidatedEnvironment env(random_env(21, {2, 3, 3}, 1, 0.3));
  const double gamma = 0.8;
  const int horizon = horizon_for(gamma, env.reward_range(), 1e-6);
  Planner planner(env, gamma, horizon);
  for (const auto& h : enumerate_histories(env, 2)) {
    double best = -1e300;
    for (int a = 0; a < env.action_count(); ++a) {
      const Row& row = env.transition(h, a);
      double q = 0.0;
      for (int i = 0; i < env.outcome_count(); ++i) {
        const double p = row[static_cast<std::size_t>(i)].get_d();
        if (p > 0.0) q += p * (env.reward_value(env.outcome(i).reward) + gamma * planner.v_star(h.extended(a, env.outcome(i))));
      }
      best = std::max(best, q);
    }
    EXPECT_NEAR(planner.v_star(h), best, 2.0 * planner.tail());
  }
}

TEST(Planner, ArgmaxInvariantUnderRewardScaling) {
  auto spec = random_env(13, {2, 3, 4}, 1, 0.3);
  auto scaled = spec;
  for (auto& r : scaled.rewards) r *= 3;
  ValidatedEnvironment a(spec);
  ValidatedEnvironment b(scaled);
  Planner pa(a, 0.6, 12);
  Planner pb(b, 0.6, 12);
  for (const auto& h : enumerate_histories(a, 2)) {
    const auto qa = pa.q_row(h);
    const auto qb = pb.q_row(h);
    for (std::size_t i = 0; i < qa.size(); ++i) EXPECT_NEAR(3.0 * qa[i], qb[i], 1e-12);
    EXPECT_EQ(std::max_element(qa.begin(), qa.end()) - qa.begin(), std::max_element(qb.begin(), qb.end()) - qb.begin());
  }
}

TEST(SeqPlanner, DepthOneMatchesPlanner) {
  fixtures::Rig s(random_env(17, {3, 2, 2}, 1, 0.2));
  ASSERT_EQ(s.codec.depth(), 1);
  Planner planner(s.env, 0.7, 6);
  SeqPlanner sp(s.seq, 0.7, 6);
  EXPECT_DOUBLE_EQ(sp.lambda(), 0.7);
  for (const auto& h : enumerate_histories(s.env, 2))
    for (int a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(sp.q_star(s.seq.sequentialize(h), a), planner.q_star(h, a));
}

TEST(Discount, LambdaAndHorizon) {
  for (double gamma : {0.1, 0.5, 0.9, 0.99})
    for (int d = 1; d <= 8; ++d) {
      const double lambda = lambda_of(gamma, d);
      EXPECT_NEAR(std::pow(lambda, d), gamma, 1e-14);
      EXPECT_GE(1.0 - lambda, (1.0 - gamma) / (d + 1.0 - gamma) - 1e-15);
    }
  EXPECT_EQ(lambda_of(0.5, 1), 0.5);
  EXPECT_THROW(lambda_of(1.0, 2), InvalidParam);
  EXPECT_THROW(lambda_of(0.5, 0), InvalidParam);

  EXPECT_EQ(horizon_for(0.5, 1.0, 0.02), 7);
  EXPECT_EQ(horizon_for(0.0, 1.0, 1e-9), 1);
  EXPECT_EQ(horizon_for(0.5, 0.0, 1e-9), 1);
  for (double tol : {1e-3, 1e-6, 1e-9}) {
    const int h = horizon_for(0.9, 2.0, tol);
    EXPECT_LE(tail_bound(0.9, 2.0, h), tol);
    EXPECT_GT(tail_bound(0.9, 2.0, h - 1), tol);
  }
  EXPECT_DOUBLE_EQ(tail_bound(0.5, 1.0, 0), 2.0);
}

TEST(Planner, InfiniteHorizonSolveAgrees) {
  ValidatedEnvironment env(random_env(31, {2, 3, 3}, 1, 0.3));
  const double gamma = 0.75;
  const auto sol = solve_contexts(env, gamma, 1e-10);
  const int horizon = horizon_for(gamma, env.reward_range(), 1e-9);
  Planner planner(env, gamma, horizon);
  for (const auto& ctx : env.reachable_contexts()) {
    const auto q = planner.q_row(ctx, horizon);
    const auto& vq = sol.q.at(ctx.key());
    for (std::size_t a = 0; a < q.size(); ++a) EXPECT_NEAR(q[a], vq[a], 1e-8);
  }
}

TEST(Planner, NodeBudget) {
  ValidatedEnvironment env(random_env(3, {3, 3, 3}, 1, 0.0));
  Planner planner(env, 0.9, 30, 1);
  EXPECT_THROW(planner.v_star(enumerate_histories(env, 0).front()), HorizonTooLarge);
}
