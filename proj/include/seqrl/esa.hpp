#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrl/environment.hpp"
#include "seqrl/planner.hpp"
#include "seqrl/seqenv.hpp"

namespace seqrl {

/// Plain aggregates original histories by their Q* vector over actions;
/// Binarized aggregates sequentialized histories (partial and complete) by
/// their Q* vector over decision symbols.
enum class AbstractionMode { Plain, Binarized };
enum class Weighting { Uniform, Visit };

std::string to_string(AbstractionMode mode);
std::string to_string(Weighting weighting);

/// The process an abstraction is built over, seen through its finite state:
/// the environment context (plain) or the sequentialized cursor (binarized).
/// Histories sharing a state share their Q* vector and their dynamics.
class EsaProcess {
 public:
  static EsaProcess plain(const ValidatedEnvironment& env, double gamma, int horizon);
  static EsaProcess binarized(const SequentializedEnvironment& seq, double gamma, int horizon);

  struct Edge {
    double p = 0.0;
    double r = 0.0;
    std::string next;
  };

  AbstractionMode mode() const { return mode_; }
  /// |A| or the decision alphabet size.
  int width() const { return width_; }
  /// gamma in plain mode, lambda in binarized mode.
  double discount() const { return discount_; }
  const ValidatedEnvironment& env() const { return env_; }
  /// Code length (1 in plain mode).
  int depth() const { return depth_; }
  /// Truncation bound on every Q* coordinate this process reports.
  double tail() const;

  /// Initial state distribution as (state key, probability).
  std::vector<std::pair<std::string, double>> initial();
  std::vector<Edge> edges(const std::string& state, int u);
  std::vector<double> q(const std::string& state);
  /// Whether the state sits at a complete step (always true in plain mode).
  bool complete(const std::string& state) const;

  /// Registers a context (plain) or cursor (binarized) and returns its key.
  std::string add(const Context& ctx);
  std::string add(const SeqCursor& cursor);
  const SeqCursor& cursor(const std::string& state) const;
  const Context& context(const std::string& state) const;

 private:
  EsaProcess(const ValidatedEnvironment& env, AbstractionMode mode);

  const ValidatedEnvironment& env_;
  const SequentializedEnvironment* seq_ = nullptr;
  AbstractionMode mode_;
  int width_ = 0;
  int depth_ = 1;
  int horizon_ = 1;
  double discount_ = 0.0;
  std::unique_ptr<Planner> planner_;
  std::unique_ptr<SeqPlanner> seq_planner_;
  std::unordered_map<std::string, Context> contexts_;
  std::unordered_map<std::string, SeqCursor> cursors_;
  std::unordered_map<std::string, std::vector<double>> q_cache_;
};

using Cell = std::vector<long long>;

/// Cell of a Q* vector on the grid anchored at 0: floor(q / delta) per coordinate.
Cell cell_of(const std::vector<double>& q, double delta);

struct AbstractionMap {
  struct Member {
    std::string state;
    std::vector<double> q;
    int cell = 0;
    double histories = 0.0;   // enumerated histories in this state, all depths
    double visit = 0.0;       // their total probability under the uniform random policy
    bool complete = true;
  };

  AbstractionMode mode = AbstractionMode::Plain;
  double delta = 0.0;
  int depth = 0;  // original steps enumerated
  std::vector<Cell> cells;
  std::map<Cell, int> cell_index;
  std::vector<Member> members;  // one per distinct state, in discovery order
  std::unordered_map<std::string, int> member_index;
  double complete_histories = 0.0;
  double partial_histories = 0.0;
  /// Cells holding at least one complete / partial history.
  int complete_cells = 0;
  int partial_cells = 0;

  int occupied_cells() const { return static_cast<int>(cells.size()); }
  /// Cell of a state, or -1 when the state's cell is unoccupied.
  int lookup(EsaProcess& process, const std::string& state) const;
  /// Largest coordinate gap between two members of one cell.
  double max_cell_spread() const;
};

/// Enumerates every history with 0..depth original steps (0..depth*d symbols
/// in binarized mode) and assigns each to the cell of its Q* vector.
/// Throws BudgetExceeded when the history count passes `cap`.
AbstractionMap build_abstraction(EsaProcess& process, double delta, int depth, double cap = 1e12);

struct SurrogateMDP {
  int state_count = 0;  // occupied cells, then the sink
  int width = 0;
  int sink = 0;
  std::vector<std::vector<std::vector<double>>> transition;  // [s][u][s']
  std::vector<std::vector<double>> reward;                   // [s][u]
};

/// Throws EmptyCell if a cell carries no weight.
SurrogateMDP build_surrogate(EsaProcess& process, const AbstractionMap& map, Weighting weighting = Weighting::Visit);

struct SurrogateSolution {
  std::vector<int> policy;
  std::vector<double> values;
  std::vector<std::vector<double>> q;
  int iterations = 0;
};

/// Value iteration to a sup-norm residual of at most tol * (1 - disc); the
/// greedy policy prefers the smallest index among near-ties.
SurrogateSolution solve_surrogate(const SurrogateMDP& mdp, double disc, double tol);

/// The abstract policy composed with the abstraction, as a deterministic
/// policy over every reachable context (plain) or context and code prefix
/// (binarized). States whose cell is unoccupied get action/symbol 0.
PolicySpec compose_policy(EsaProcess& process, const AbstractionMap& map, const SurrogateSolution& solution);

struct LossReport {
  double loss = 0.0;       // max over enumerated histories of V* - V^Pi
  double slack = 0.0;      // both evaluators' truncation tails
  std::size_t histories = 0;
};

/// Max of V*(h) - V^Pi(h) over histories with 0..depth steps. The policy
/// must be an original-mode policy with the environment's context length.
LossReport policy_loss(const ValidatedEnvironment& env, const PolicySpec& policy, double gamma, int horizon, int depth);

struct BoundReport {
  Rational epsilon;
  Rational gamma;
  Rational reward_range;
  int action_count = 0;
  int padded_actions = 0;
  int d = 0;
  double lambda = 0.0;
  Rational plain_bound;
  Rational binary_bound;             // statement form, padded lb|A|
  Rational binary_asymptotic_bound;  // gamma -> 1 form
  Rational binary_proof_bound;       // (1 - gamma + d)^6 form from the proof
  double binary_direct_bound = 0.0;  // 4R^2 / (eps'^2 (1 - lambda)^6) with eps' = lambda^{d-1} eps
  double one_minus_lambda = 0.0;
  Rational lambda_certificate;       // (1 - gamma) / (d + 1 - gamma)
  double eps_prime_lambda = 0.0;     // lambda^{d-1} eps
  Rational eps_prime_gamma;          // gamma eps
};

/// (2R / (eps (1 - gamma)^3))^|A|.
Rational bound_plain(const Rational& epsilon, const Rational& gamma, int action_count, const Rational& range = 1);
/// Throws InvalidParam when gamma is 0.
BoundReport bound_binary(const Rational& epsilon, const Rational& gamma, int action_count, const Rational& range = 1);

}  // namespace seqrl
