#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace seqrl {

/// One observation-reward pair. `reward` indexes the environment's reward set.
struct Percept {
  int obs = 0;
  int reward = 0;

  friend auto operator<=>(const Percept&, const Percept&) = default;
};

enum class HistoryMode { Original, Sequentialized };

/// Alternating o r a ... o r record. Never empty: it always starts with the
/// initial percept and ends on a percept. In sequentialized mode the action
/// slots hold decision symbols instead of action ids.
class History {
 public:
  explicit History(Percept initial, HistoryMode mode = HistoryMode::Original);

  void append(int action, Percept next);
  History extended(int action, Percept next) const;

  /// Number of interaction steps (actions taken).
  std::size_t steps() const { return actions_.size(); }
  Percept percept(std::size_t i) const { return percepts_[i]; }
  int action(std::size_t i) const { return actions_[i]; }
  Percept last() const { return percepts_.back(); }
  std::span<const Percept> percepts() const { return percepts_; }
  std::span<const int> actions() const { return actions_; }
  HistoryMode mode() const { return mode_; }

  /// The first `steps` interaction steps.
  History prefix(std::size_t steps) const;

  /// "o,r,a;o,r,a;o,r" with reward indices.
  std::string key() const;

  friend bool operator==(const History&, const History&) = default;
  /// Lexicographic by (entry index, observation, reward index, action).
  friend std::strong_ordering operator<=>(const History& lhs, const History& rhs);

 private:
  std::vector<Percept> percepts_;
  std::vector<int> actions_;
  HistoryMode mode_;
};

/// A bounded suffix of a history, the part a finite-context process or policy
/// conditions on.
///   length < 0  the whole history
///   length 0    the last observation only (Markov over observations)
///   length m>0  the last m percepts and the m-1 actions between them
class Context {
 public:
  static Context of(const History& h, int length);
  static Context initial(Percept p, int length);

  Context advanced(int action, Percept next) const;
  /// Same context with every action id replaced by canon[id].
  Context mapped(std::span<const int> canon) const;

  int length() const { return length_; }
  Percept last() const { return percepts_.back(); }
  std::span<const Percept> percepts() const { return percepts_; }
  std::span<const int> actions() const { return actions_; }

  /// "o" for length 0, otherwise the history-key form of the suffix.
  std::string key() const;

  friend bool operator==(const Context&, const Context&) = default;
  friend std::strong_ordering operator<=>(const Context& lhs, const Context& rhs);

 private:
  Context(int length, std::vector<Percept> percepts, std::vector<int> actions);
  void trim();

  int length_ = 0;
  std::vector<Percept> percepts_;
  std::vector<int> actions_;
};

}  // namespace seqrl
