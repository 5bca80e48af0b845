#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrl/environment.hpp"
#include "seqrl/seqenv.hpp"

namespace seqrl {

/// gamma^{1/d}: the per-symbol discount under which d symbol steps discount
/// like one original step.
double lambda_of(double gamma, int d);

/// Smallest H >= 1 with reward_range * disc^H / (1 - disc) <= tol.
int horizon_for(double disc, double reward_range, double tol);

/// reward_range * disc^steps / (1 - disc): bound on the value dropped by
/// truncating after `steps` steps.
double tail_bound(double disc, double reward_range, int steps);

struct DiscountPair {
  double gamma = 0.0;
  int d = 1;
  double lambda = 0.0;

  static DiscountPair make(double gamma, int d);
};

inline constexpr std::size_t kDefaultNodeBudget = 20'000'000;

/// Values within this relative margin count as tied in every argmax.
inline constexpr double kTieTolerance = 1e-9;

/// Optimal values of the original process by depth-limited expectimax.
/// Subproblems are memoized on (environment context, steps to go), which is
/// exact for finite-context environments. Not thread-safe: use one per worker.
class Planner {
 public:
  Planner(const ValidatedEnvironment& env, double gamma, int horizon, std::size_t node_budget = kDefaultNodeBudget);

  const ValidatedEnvironment& env() const { return env_; }
  double gamma() const { return gamma_; }
  int horizon() const { return horizon_; }
  /// Truncation error bound of every value returned at the full horizon.
  double tail() const { return tail_bound(gamma_, env_.reward_range(), horizon_); }

  double q_star(const History& h, int action) { return q_star(env_.context_of(h), action, horizon_); }
  double v_star(const History& h) { return v_star(env_.context_of(h), horizon_); }
  std::vector<double> q_row(const History& h) { return q_row(env_.context_of(h), horizon_); }

  double q_star(const Context& ctx, int action, int steps);
  double v_star(const Context& ctx, int steps);
  std::vector<double> q_row(const Context& ctx, int steps);

  std::size_t nodes() const { return memo_.size(); }

 private:
  const ValidatedEnvironment& env_;
  double gamma_;
  int horizon_;
  std::size_t budget_;
  std::unordered_map<std::string, double> memo_;
};

/// Q^Pi and V^Pi of a fixed original-mode policy, depth-limited like Planner.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const ValidatedEnvironment& env, const PolicySpec& policy, double gamma, int horizon,
                  std::size_t node_budget = kDefaultNodeBudget);

  double tail() const { return tail_bound(gamma_, env_.reward_range(), horizon_); }

  /// Throws MissingPolicyRow when a reachable history has no row.
  double q_pi(const History& h, int action);
  double v_pi(const History& h);

  double q_pi(const Context& env_ctx, const Context& policy_ctx, int action, int steps);
  double v_pi(const Context& env_ctx, const Context& policy_ctx, int steps);

 private:
  const ValidatedEnvironment& env_;
  const PolicySpec& policy_;
  double gamma_;
  int horizon_;
  std::size_t budget_;
  std::unordered_map<std::string, double> memo_;
};

/// Optimal values of the sequentialized process, computed directly on its
/// symbol-level dynamics with discount lambda = gamma^{1/d}. The horizon is
/// given in original steps; a history with phase p has horizon*d - p symbol
/// steps to go, so every query truncates at the same original step boundary.
class SeqPlanner {
 public:
  SeqPlanner(const SequentializedEnvironment& seq, double gamma, int horizon, std::size_t node_budget = kDefaultNodeBudget);

  const SequentializedEnvironment& seq() const { return seq_; }
  double lambda() const { return lambda_; }
  int horizon() const { return horizon_; }
  int steps_for_phase(int phase) const { return horizon_ * seq_.depth() - phase; }
  /// Truncation error bound at a history of the given phase.
  double tail(int phase) const { return tail_bound(lambda_, seq_.env().reward_range(), steps_for_phase(phase)); }

  double q_star(const SequentializedHistory& tau, int x);
  double v_star(const SequentializedHistory& tau);

  double q_star(const SeqCursor& c, int x, int steps);
  double v_star(const SeqCursor& c, int steps);

 private:
  const SequentializedEnvironment& seq_;
  double lambda_;
  int horizon_;
  std::size_t budget_;
  std::unordered_map<std::string, double> memo_;
};

/// Q and V of a fixed sequentialized policy on the sequentialized process.
class SeqPolicyEvaluator {
 public:
  SeqPolicyEvaluator(const SequentializedEnvironment& seq, const PolicySpec& policy, double gamma, int horizon,
                     std::size_t node_budget = kDefaultNodeBudget);

  double lambda() const { return lambda_; }
  int steps_for_phase(int phase) const { return horizon_ * seq_.depth() - phase; }
  double tail(int phase) const { return tail_bound(lambda_, seq_.env().reward_range(), steps_for_phase(phase)); }

  double q_pi(const SequentializedHistory& tau, int x);
  double v_pi(const SequentializedHistory& tau);

  double q_pi(const SeqCursor& c, int x, int steps);
  double v_pi(const SeqCursor& c, int steps);

 private:
  const SequentializedEnvironment& seq_;
  const PolicySpec& policy_;
  double lambda_;
  int horizon_;
  std::size_t budget_;
  std::unordered_map<std::string, double> memo_;
};

/// An action in the restricted set of `prefix` maximizing Q*; ties go to the
/// smallest code word.
int restricted_argmax(Planner& planner, const ActionCodec& codec, const History& h, std::span<const int> prefix);

/// Infinite-horizon Q* over the reachable context space by value iteration,
/// stopped once the sup-norm residual is at most tol * (1 - gamma).
struct ContextSolution {
  std::map<std::string, std::vector<double>> q;  // context key -> Q*(ctx, .)
  int iterations = 0;
};
ContextSolution solve_contexts(const ValidatedEnvironment& env, double gamma, double tol);

}  // namespace seqrl
