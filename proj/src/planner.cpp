#include "seqrl/planner.hpp"

#include <algorithm>
#include <cmath>

#include "seqrl/errors.hpp"

namespace seqrl {

namespace {

std::string memo_key(const std::string& state, int steps) { return state + "#" + std::to_string(steps); }

void check_budget(std::size_t size, std::size_t budget) {
  if (size > budget) throw HorizonTooLarge("memo passed the node budget of " + std::to_string(budget));
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidParam("discount must lie in [0, 1)");
}

bool improves(double candidate, double best) { return candidate > best + kTieTolerance * (1.0 + std::abs(best)); }

}  // namespace

double lambda_of(double gamma, int d) {
  check_gamma(gamma);
  if (d < 1) throw InvalidParam("code length must be positive");
  if (gamma == 0.0) return 0.0;
  return static_cast<double>(std::pow(static_cast<long double>(gamma), 1.0L / static_cast<long double>(d)));
}

int horizon_for(double disc, double reward_range, double tol) {
  check_gamma(disc);
  if (!(tol > 0.0)) throw InvalidParam("tolerance must be positive");
  int h = 1;
  while (tail_bound(disc, reward_range, h) > tol) {
    if (++h > 100'000) throw HorizonTooLarge("no horizon below 100000 reaches the tolerance");
  }
  return h;
}

double tail_bound(double disc, double reward_range, int steps) {
  if (steps <= 0) return reward_range / (1.0 - disc);
  if (disc == 0.0) return 0.0;
  return reward_range * std::pow(disc, steps) / (1.0 - disc);
}

DiscountPair DiscountPair::make(double gamma, int d) { return {gamma, d, lambda_of(gamma, d)}; }

Planner::Planner(const ValidatedEnvironment& env, double gamma, int horizon, std::size_t node_budget)
    : env_(env), gamma_(gamma), horizon_(horizon), budget_(node_budget) {
  check_gamma(gamma);
  if (horizon < 1) throw InvalidParam("horizon must be at least 1");
}

double Planner::q_star(const Context& ctx, int action, int steps) {
  if (steps <= 0) return 0.0;
  const RowD& row = env_.row_d(ctx, action);
  double total = 0.0;
  for (int i = 0; i < env_.outcome_count(); ++i) {
    const double p = row[static_cast<std::size_t>(i)];
    if (p <= 0.0) continue;
    const Percept next = env_.outcome(i);
    double value = env_.reward_value(next.reward);
    if (gamma_ > 0.0 && steps > 1) value += gamma_ * v_star(ctx.advanced(action, next), steps - 1);
    total += p * value;
  }
  return total;
}

double Planner::v_star(const Context& ctx, int steps) {
  if (steps <= 0) return 0.0;
  const std::string key = memo_key(ctx.key(), steps);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  double best = -INFINITY;
  for (int a = 0; a < env_.action_count(); ++a) best = std::max(best, q_star(ctx, a, steps));
  memo_.emplace(key, best);
  check_budget(memo_.size(), budget_);
  return best;
}

std::vector<double> Planner::q_row(const Context& ctx, int steps) {
  std::vector<double> out(static_cast<std::size_t>(env_.action_count()));
  for (int a = 0; a < env_.action_count(); ++a) out[static_cast<std::size_t>(a)] = q_star(ctx, a, steps);
  return out;
}

PolicyEvaluator::PolicyEvaluator(const ValidatedEnvironment& env, const PolicySpec& policy, double gamma, int horizon,
                                 std::size_t node_budget)
    : env_(env), policy_(policy), gamma_(gamma), horizon_(horizon), budget_(node_budget) {
  check_gamma(gamma);
  if (horizon < 1) throw InvalidParam("horizon must be at least 1");
  if (policy.mode != HistoryMode::Original) throw InvalidParam("PolicyEvaluator needs an original-mode policy");
}

double PolicyEvaluator::q_pi(const History& h, int action) {
  return q_pi(env_.context_of(h), Context::of(h, policy_.context_length), action, horizon_);
}

double PolicyEvaluator::v_pi(const History& h) {
  return v_pi(env_.context_of(h), Context::of(h, policy_.context_length), horizon_);
}

double PolicyEvaluator::q_pi(const Context& env_ctx, const Context& policy_ctx, int action, int steps) {
  if (steps <= 0) return 0.0;
  const RowD& row = env_.row_d(env_ctx, action);
  double total = 0.0;
  for (int i = 0; i < env_.outcome_count(); ++i) {
    const double p = row[static_cast<std::size_t>(i)];
    if (p <= 0.0) continue;
    const Percept next = env_.outcome(i);
    double value = env_.reward_value(next.reward);
    if (gamma_ > 0.0 && steps > 1)
      value += gamma_ * v_pi(env_ctx.advanced(action, next), policy_ctx.advanced(action, next), steps - 1);
    total += p * value;
  }
  return total;
}

double PolicyEvaluator::v_pi(const Context& env_ctx, const Context& policy_ctx, int steps) {
  if (steps <= 0) return 0.0;
  const std::string policy_key = policy_ctx.key();
  const std::string key = memo_key(env_ctx.key() + "|" + policy_key, steps);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto& probs = policy_.row(policy_key);
  if (static_cast<int>(probs.size()) != env_.action_count())
    throw InvalidParam("policy row '" + policy_key + "' does not cover the action set");
  double total = 0.0;
  for (int a = 0; a < env_.action_count(); ++a) {
    const double w = probs[static_cast<std::size_t>(a)];
    if (w > 0.0) total += w * q_pi(env_ctx, policy_ctx, a, steps);
  }
  memo_.emplace(key, total);
  check_budget(memo_.size(), budget_);
  return total;
}

SeqPlanner::SeqPlanner(const SequentializedEnvironment& seq, double gamma, int horizon, std::size_t node_budget)
    : seq_(seq), lambda_(lambda_of(gamma, seq.depth())), horizon_(horizon), budget_(node_budget) {
  if (horizon < 1) throw InvalidParam("horizon must be at least 1");
}

double SeqPlanner::q_star(const SequentializedHistory& tau, int x) {
  return q_star(seq_.cursor(tau), x, steps_for_phase(tau.phase()));
}

double SeqPlanner::v_star(const SequentializedHistory& tau) { return v_star(seq_.cursor(tau), steps_for_phase(tau.phase())); }

double SeqPlanner::q_star(const SeqCursor& c, int x, int steps) {
  if (steps <= 0) return 0.0;
  double total = 0.0;
  for (const auto& [p, mass] : seq_.step_outcomes(c, x)) {
    double value = seq_.env().reward_value(p.reward);
    if (lambda_ > 0.0 && steps > 1) value += lambda_ * v_star(seq_.advance(c, x, p), steps - 1);
    total += mass * value;
  }
  return total;
}

double SeqPlanner::v_star(const SeqCursor& c, int steps) {
  if (steps <= 0) return 0.0;
  const std::string key = memo_key(c.state_key(), steps);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  double best = -INFINITY;
  for (int x = 0; x < seq_.base(); ++x) best = std::max(best, q_star(c, x, steps));
  memo_.emplace(key, best);
  check_budget(memo_.size(), budget_);
  return best;
}

SeqPolicyEvaluator::SeqPolicyEvaluator(const SequentializedEnvironment& seq, const PolicySpec& policy, double gamma, int horizon,
                                       std::size_t node_budget)
    : seq_(seq), policy_(policy), lambda_(lambda_of(gamma, seq.depth())), horizon_(horizon), budget_(node_budget) {
  if (horizon < 1) throw InvalidParam("horizon must be at least 1");
  if (policy.mode != HistoryMode::Sequentialized) throw InvalidParam("SeqPolicyEvaluator needs a sequentialized policy");
}

double SeqPolicyEvaluator::q_pi(const SequentializedHistory& tau, int x) {
  return q_pi(seq_.cursor(tau, policy_.context_length), x, steps_for_phase(tau.phase()));
}

double SeqPolicyEvaluator::v_pi(const SequentializedHistory& tau) {
  return v_pi(seq_.cursor(tau, policy_.context_length), steps_for_phase(tau.phase()));
}

double SeqPolicyEvaluator::q_pi(const SeqCursor& c, int x, int steps) {
  if (steps <= 0) return 0.0;
  double total = 0.0;
  for (const auto& [p, mass] : seq_.step_outcomes(c, x)) {
    double value = seq_.env().reward_value(p.reward);
    if (lambda_ > 0.0 && steps > 1) value += lambda_ * v_pi(seq_.advance(c, x, p), steps - 1);
    total += mass * value;
  }
  return total;
}

double SeqPolicyEvaluator::v_pi(const SeqCursor& c, int steps) {
  if (steps <= 0) return 0.0;
  const std::string policy_key = c.policy_key();
  const std::string key = memo_key(c.state_key() + "|" + policy_key, steps);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto& probs = policy_.row(policy_key);
  if (static_cast<int>(probs.size()) != seq_.base())
    throw InvalidParam("policy row '" + policy_key + "' does not cover the decision alphabet");
  double total = 0.0;
  for (int x = 0; x < seq_.base(); ++x) {
    const double w = probs[static_cast<std::size_t>(x)];
    if (w > 0.0) total += w * q_pi(c, x, steps);
  }
  memo_.emplace(key, total);
  check_budget(memo_.size(), budget_);
  return total;
}

int restricted_argmax(Planner& planner, const ActionCodec& codec, const History& h, std::span<const int> prefix) {
  int best_action = -1;
  double best = -INFINITY;
  for (int a : codec.restricted_actions(prefix)) {
    const double q = planner.q_star(h, a);
    if (best_action < 0 || improves(q, best)) {
      best_action = a;
      best = q;
    }
  }
  return best_action;
}

ContextSolution solve_contexts(const ValidatedEnvironment& env, double gamma, double tol) {
  check_gamma(gamma);
  if (!(tol > 0.0)) throw InvalidParam("tolerance must be positive");
  const auto contexts = env.reachable_contexts();
  std::map<Context, std::size_t> index;
  for (std::size_t i = 0; i < contexts.size(); ++i) index.emplace(contexts[i], i);

  const auto n_actions = static_cast<std::size_t>(env.action_count());
  // successors[c][a] = list of (probability, reward, next context index)
  struct Edge {
    double p;
    double r;
    std::size_t next;
  };
  std::vector<std::vector<std::vector<Edge>>> edges(contexts.size(), std::vector<std::vector<Edge>>(n_actions));
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const RowD& row = env.row_d(contexts[c], static_cast<int>(a));
      for (int i = 0; i < env.outcome_count(); ++i) {
        if (row[static_cast<std::size_t>(i)] <= 0.0) continue;
        const Percept next = env.outcome(i);
        edges[c][a].push_back({row[static_cast<std::size_t>(i)], env.reward_value(next.reward),
                               index.at(contexts[c].advanced(static_cast<int>(a), next))});
      }
    }
  }

  std::vector<std::vector<double>> q(contexts.size(), std::vector<double>(n_actions, 0.0));
  std::vector<double> v(contexts.size(), 0.0);
  ContextSolution out;
  while (true) {
    ++out.iterations;
    double residual = 0.0;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        double total = 0.0;
        for (const auto& e : edges[c][a]) total += e.p * (e.r + gamma * v[e.next]);
        residual = std::max(residual, std::abs(total - q[c][a]));
        q[c][a] = total;
      }
    }
    for (std::size_t c = 0; c < contexts.size(); ++c) v[c] = *std::max_element(q[c].begin(), q[c].end());
    if (residual <= tol * (1.0 - gamma) || out.iterations > 1'000'000) break;
  }
  for (std::size_t c = 0; c < contexts.size(); ++c) out.q.emplace(contexts[c].key(), q[c]);
  return out;
}

}  // namespace seqrl
