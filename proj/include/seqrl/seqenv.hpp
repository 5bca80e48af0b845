#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seqrl/codec.hpp"
#include "seqrl/environment.hpp"

namespace seqrl {

/// What the mock emits between real environment steps.
///   RepeatLast  the last real observation, reward 0
///   Dummy       a fixed observation, reward 0
///   Augmented   (last real observation, code prefix issued so far), reward 0;
///               observations then range over the augmented alphabet
enum class FillerMode { RepeatLast, Dummy, Augmented };

struct SeqOptions {
  FillerMode filler = FillerMode::RepeatLast;
  int dummy_obs = 0;
};

/// A history over decision symbols. `phase` counts symbols issued since the
/// last complete step; the history is complete iff phase is 0.
class SequentializedHistory {
 public:
  SequentializedHistory(History history, int depth);

  const History& history() const { return history_; }
  int depth() const { return depth_; }
  int phase() const { return static_cast<int>(history_.steps() % static_cast<std::size_t>(depth_)); }
  bool complete() const { return phase() == 0; }
  /// The partial code word issued since the last complete step.
  Codeword pending_code() const;

  SequentializedHistory extended(int symbol, Percept next) const;
  std::string key() const { return history_.key(); }

  friend bool operator==(const SequentializedHistory&, const SequentializedHistory&) = default;
  friend auto operator<=>(const SequentializedHistory& lhs, const SequentializedHistory& rhs) {
    return lhs.history_ <=> rhs.history_;
  }

 private:
  History history_;
  int depth_;
};

/// Incremental state of a sequentialized history that is a prefix of some
/// g-image: everything the sequentialized process and a context-keyed
/// sequentialized policy can depend on.
struct SeqCursor {
  Context env_ctx;     ///< environment context at the last complete step
  Context policy_ctx;  ///< caller-chosen context length, same history
  int last_obs = 0;    ///< last real observation
  Codeword pending;

  /// Key "policy-context/pending-code" used by sequentialized PolicySpec rows.
  std::string policy_key() const;
  /// Key identifying the cursor's process state (environment context and pending code).
  std::string state_key() const;
};

/// The sequentialized environment over decision symbols, backed by an
/// original environment and an action codec. Holds references; both must
/// outlive it.
class SequentializedEnvironment {
 public:
  /// Throws InvalidParam when the codec does not cover the environment's
  /// action set, or the dummy observation is out of range.
  SequentializedEnvironment(const ValidatedEnvironment& env, const ActionCodec& codec, SeqOptions options = {});

  const ValidatedEnvironment& env() const { return env_; }
  const ActionCodec& codec() const { return codec_; }
  const SeqOptions& options() const { return options_; }
  int depth() const { return codec_.depth(); }
  int base() const { return codec_.base(); }
  bool augmented() const { return options_.filler == FillerMode::Augmented; }

  /// |O| in plain modes, |O| * sum_{i<d} base^i in augmented mode.
  int observation_count() const;
  int outcome_count() const { return observation_count() * env_.reward_count(); }
  int outcome_index(Percept p) const { return p.obs * env_.reward_count() + p.reward; }
  Percept outcome(int index) const { return {index / env_.reward_count(), index % env_.reward_count()}; }

  /// Augmented observation index of (obs, prefix), prefix shorter than d.
  int augmented_index(int obs, std::span<const int> prefix) const;
  std::pair<int, Codeword> augmented_parts(int index) const;

  /// g(h). Complete by construction.
  SequentializedHistory sequentialize(const History& h) const;
  /// g^{-1}(tau), or nullopt (the distinguished bottom value) when tau is
  /// partial or not in the image of g.
  std::optional<History> desequentialize(const SequentializedHistory& tau) const;

  /// Cursor after the initial percept (a real percept of the original environment).
  SeqCursor start(Percept initial, int policy_length) const;
  /// Cursor at the end of tau. Throws UnreachableHistory if tau is not a
  /// prefix of a g-image.
  SeqCursor cursor(const SequentializedHistory& tau, std::optional<int> policy_length = std::nullopt) const;
  /// Symbol x completes the pending code word.
  bool completes(const SeqCursor& c) const { return static_cast<int>(c.pending.size()) + 1 == depth(); }
  /// Percept dispatched after a non-completing symbol x.
  Percept filler(const SeqCursor& c, int x) const;
  /// Real percept behind a dispatched percept at a complete step.
  Percept real_percept(Percept dispatched) const;
  /// Cursor after symbol x and dispatched percept; the caller guarantees the pair is reachable.
  SeqCursor advance(const SeqCursor& c, int x, Percept dispatched) const;

  /// Positive-mass outcomes of symbol x at the cursor.
  std::vector<std::pair<Percept, double>> step_outcomes(const SeqCursor& c, int x) const;
  std::vector<std::pair<Percept, Rational>> step_outcomes_exact(const SeqCursor& c, int x) const;

  /// The sequentialized environment's distribution of the next percept given
  /// tau and symbol x, over this environment's observation alphabet x rewards.
  Row seq_transition(const SequentializedHistory& tau, int x) const;
  /// Same as seq_transition in augmented mode; throws NotMarkovEnv unless the
  /// original environment is Markov over observations, InvalidParam unless
  /// this environment is augmented.
  Row augmented_seq_transition(const SequentializedHistory& tau, int x) const;

  /// Induced original-action policy: the product of the symbol probabilities
  /// along each action's code word. Keys keep the sequentialized policy's context.
  PolicySpec lift_policy(const PolicySpec& seq_policy) const;

 private:
  int dispatched_obs(int real_obs, std::span<const int> prefix) const;

  const ValidatedEnvironment& env_;
  const ActionCodec& codec_;
  SeqOptions options_;
  int prefix_count_ = 1;  // sum_{i<d} base^i
};

/// All reachable sequentialized histories with exactly `symbols` decision
/// symbols, in lexicographic order. Throws BudgetExceeded past `cap`.
std::vector<SequentializedHistory> enumerate_seq_histories(const SequentializedEnvironment& seq, int symbols,
                                                           std::size_t cap = 1'000'000);

/// One inner tick of a mock session.
struct MockTick {
  std::size_t t = 0;
  std::size_t k = 0;
  int phase = 0;
  int symbol = 0;
  Percept percept;
};

/// Buffering middle layer between a symbol-issuing agent and the original
/// environment: consults the environment once per completed code word and
/// emits fillers in between. Sampling is driven by a seeded mt19937_64.
class MockSession {
 public:
  MockSession(const SequentializedEnvironment& seq, std::uint64_t seed);

  Percept step(int symbol);

  const SequentializedHistory& transcript() const { return transcript_; }
  /// Symbols issued so far.
  std::size_t t() const { return t_; }
  /// Index of the current real step (1 before the first completed code word).
  std::size_t k() const { return k_; }
  int phase() const { return static_cast<int>(cursor_.pending.size()); }
  const std::vector<MockTick>& log() const { return log_; }
  /// "t,k,phase,x,o,r" header plus one line per tick; r as an exact rational.
  std::string log_csv() const;

 private:
  int sample(const RowD& row);

  const SequentializedEnvironment& seq_;
  std::mt19937_64 rng_;
  Percept initial_;
  SeqCursor cursor_;
  SequentializedHistory transcript_;
  std::size_t t_ = 0;
  std::size_t k_ = 1;
  std::vector<MockTick> log_;
};

}  // namespace seqrl
