#pragma once

#include <span>
#include <string>
#include <vector>

#include "seqrl/environment.hpp"

namespace seqrl {

/// Fixed-length word over the decision alphabet {0, ..., base-1}.
using Codeword = std::vector<int>;

std::string codeword_string(std::span<const int> word);
/// Parses "0110" (one digit per symbol, base <= 10). Throws InvalidParam.
Codeword parse_codeword(std::string_view text, int base);

struct PaddedActions {
  std::vector<ActionLabel> actions;
  int depth = 0;
};

/// Extends `actions` to base^d entries by duplicating the last action under
/// fresh alias labels ("a5" -> "a5_1", "a5_2", ...). Returns the input
/// unchanged when its size is already a power of the base.
PaddedActions pad_actions(std::vector<ActionLabel> actions, int base);

/// Pads an environment spec's action set; aliases reuse their root's rows.
EnvironmentSpec pad_environment(EnvironmentSpec spec, int base);

/// Bijection between action ids 0..base^d-1 and length-d code words.
class ActionCodec {
 public:
  /// Custom assignment: table[a] is the code word of action a. Throws
  /// NotBijective on repeated or malformed words.
  ActionCodec(int base, std::vector<Codeword> table);

  /// Action i gets the base-ary digits of i, most significant first.
  static ActionCodec index_order(int base, int action_count);

  int base() const { return base_; }
  int depth() const { return depth_; }
  int action_count() const { return static_cast<int>(encode_.size()); }

  const Codeword& encode(int action) const { return encode_[static_cast<std::size_t>(action)]; }
  int decode(std::span<const int> word) const;

  /// Actions whose code word extends `prefix`, in code-word order.
  std::vector<int> restricted_actions(std::span<const int> prefix) const;

  /// One "name<TAB>code" line per action.
  std::string dump(const std::vector<ActionLabel>& actions) const;
  /// Reads a dump back against the given action names. Throws NotBijective or InvalidParam.
  static ActionCodec parse(std::string_view text, const std::vector<ActionLabel>& actions, int base);

 private:
  std::size_t word_value(std::span<const int> word) const;

  int base_ = 2;
  int depth_ = 0;
  std::vector<Codeword> encode_;
  std::vector<int> decode_;  // indexed by the word's base-ary value
};

struct QuantizedInterval {
  std::vector<double> points;
  ActionCodec codec;
};

/// Grids [lo, hi] into base^d cells of width at most delta (d >= 1) and
/// returns the cell midpoints with an index-order codec. Throws
/// DegenerateInterval when hi <= lo and InvalidParam when delta <= 0.
QuantizedInterval quantize_interval(double lo, double hi, double delta, int base = 2);

}  // namespace seqrl
