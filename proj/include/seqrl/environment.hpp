#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqrl/history.hpp"
#include "seqrl/numeric.hpp"

namespace seqrl {

struct ActionLabel {
  std::string name;
  /// Set on padding duplicates: the action whose dynamics this one copies.
  std::optional<int> alias_of;

  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
};

/// Finite-context environment table, as read from a spec file.
///
/// `table` maps "context|action" to a probability row over observation x
/// reward (index obs * |R| + reward). Context keys follow Context::key() for
/// the spec's context_length; the action part is an index or an action name.
/// Rows for alias actions may be omitted: lookups fall back to the alias root.
struct EnvironmentSpec {
  int obs_count = 1;
  std::vector<Rational> rewards;
  std::vector<ActionLabel> actions;
  int context_length = 0;
  Row initial;
  std::map<std::string, Row> table;
};

std::string table_key(const Context& ctx, int action);

/// JSON (de)serialization. Numbers may be JSON numbers or "p/q" strings; JSON
/// numbers are read through their shortest decimal form, so 0.1 is exactly 1/10.
EnvironmentSpec parse_environment(std::string_view json_text);
EnvironmentSpec load_environment(const std::string& path);
std::string dump_environment(const EnvironmentSpec& spec);

/// An environment whose invariants have been checked, with O(1) row lookup.
/// Immutable after construction.
class ValidatedEnvironment {
 public:
  /// Validates the spec. Throws RowSumError, MissingRow, AliasMismatch or
  /// InvalidParam. A reward set lacking 0 is extended with it (and a warning
  /// goes to stderr), since the filler reward must be a member.
  explicit ValidatedEnvironment(EnvironmentSpec spec, NumericMode mode = NumericMode::Exact);

  const EnvironmentSpec& spec() const { return spec_; }
  NumericMode mode() const { return mode_; }

  int obs_count() const { return spec_.obs_count; }
  int reward_count() const { return static_cast<int>(spec_.rewards.size()); }
  int action_count() const { return static_cast<int>(spec_.actions.size()); }
  int context_length() const { return spec_.context_length; }
  int outcome_count() const { return obs_count() * reward_count(); }
  bool is_mdp() const { return spec_.context_length == 0; }

  int outcome_index(Percept p) const { return p.obs * reward_count() + p.reward; }
  Percept outcome(int index) const { return {index / reward_count(), index % reward_count()}; }

  const Rational& reward(int index) const { return spec_.rewards[static_cast<std::size_t>(index)]; }
  double reward_value(int index) const { return reward_values_[static_cast<std::size_t>(index)]; }
  /// Index of the zero reward used as filler.
  int zero_reward() const { return zero_reward_; }
  /// max R - min R.
  double reward_range() const { return reward_range_; }
  double reward_min() const { return reward_min_; }

  /// Root of the alias chain for `action` (itself when not an alias).
  int canonical_action(int action) const { return canonical_[static_cast<std::size_t>(action)]; }

  const Row& initial() const { return spec_.initial; }
  const RowD& initial_d() const { return initial_d_; }

  Context context_of(const History& h) const { return Context::of(h, spec_.context_length); }
  Context initial_context(Percept p) const { return Context::initial(p, spec_.context_length); }

  /// P(. | context, action). Throws MissingRow.
  const Row& row(const Context& ctx, int action) const;
  const RowD& row_d(const Context& ctx, int action) const;

  /// P(. | h a).
  const Row& transition(const History& h, int action) const { return row(context_of(h), action); }

  /// Every context of the given length reachable with positive probability
  /// under some action sequence, sorted. Length defaults to the environment's.
  std::vector<Context> reachable_contexts(std::optional<int> length = std::nullopt) const;

  /// Initial mass times transition masses along h.
  Rational history_probability(const History& h) const;

 private:
  struct Entry {
    Row exact;
    RowD approx;
  };

  const Entry& lookup(const Context& ctx, int action) const;
  void check_reachable_rows() const;

  EnvironmentSpec spec_;
  NumericMode mode_;
  std::vector<int> canonical_;
  bool has_aliases_ = false;
  std::vector<double> reward_values_;
  RowD initial_d_;
  int zero_reward_ = 0;
  double reward_range_ = 0.0;
  double reward_min_ = 0.0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Entry> entries_;
};

/// All histories with exactly `depth` steps and positive probability under
/// some action sequence, in lexicographic order. Throws BudgetExceeded when the
/// count would pass `cap`.
std::vector<History> enumerate_histories(const ValidatedEnvironment& env, int depth, std::size_t cap = 1'000'000);

/// Probability-weighted policy table. Original-mode keys are
/// Context::of(h, context_length).key(); sequentialized-mode keys append
/// "/" and the pending code prefix to the context of the last complete step.
struct PolicySpec {
  HistoryMode mode = HistoryMode::Original;
  int context_length = 0;
  std::map<std::string, std::vector<double>> rows;

  /// Throws MissingPolicyRow.
  const std::vector<double>& row(const std::string& key) const;
};

/// Checks every row has `width` non-negative entries summing to 1 within 1e-9.
void validate_policy(const PolicySpec& policy, int width);

}  // namespace seqrl
