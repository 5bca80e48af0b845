#include "seqrl/codec.hpp"

#include <set>
#include <sstream>

#include "seqrl/errors.hpp"

namespace seqrl {

namespace {

std::size_t ipow(int base, int exp) {
  std::size_t out = 1;
  for (int i = 0; i < exp; ++i) out *= static_cast<std::size_t>(base);
  return out;
}

void check_base(int base) {
  if (base < 2 || base > 10) throw InvalidParam("decision alphabet base must be in [2, 10], got " + std::to_string(base));
}

}  // namespace

std::string codeword_string(std::span<const int> word) {
  std::string out;
  out.reserve(word.size());
  for (int x : word) out += static_cast<char>('0' + x);
  return out;
}

Codeword parse_codeword(std::string_view text, int base) {
  Codeword out;
  for (char c : text) {
    const int x = c - '0';
    if (x < 0 || x >= base) throw InvalidParam("symbol '" + std::string(1, c) + "' outside the decision alphabet");
    out.push_back(x);
  }
  return out;
}

PaddedActions pad_actions(std::vector<ActionLabel> actions, int base) {
  check_base(base);
  if (actions.empty()) throw InvalidParam("cannot pad an empty action set");
  // A single action still needs one decision symbol, so d >= 1.
  int depth = 1;
  while (ipow(base, depth) < actions.size()) ++depth;
  const std::size_t full = ipow(base, depth);
  const int last = static_cast<int>(actions.size()) - 1;
  const std::string stem = actions.back().name;
  const int root = actions.back().alias_of.value_or(last);
  int suffix = 1;
  while (actions.size() < full) actions.push_back({stem + "_" + std::to_string(suffix++), root});
  return {std::move(actions), depth};
}

EnvironmentSpec pad_environment(EnvironmentSpec spec, int base) {
  spec.actions = pad_actions(std::move(spec.actions), base).actions;
  return spec;
}

ActionCodec::ActionCodec(int base, std::vector<Codeword> table) : base_(base), encode_(std::move(table)) {
  check_base(base);
  if (encode_.empty()) throw NotBijective("codec needs at least one action");
  depth_ = static_cast<int>(encode_.front().size());
  if (depth_ < 1) throw NotBijective("code words must have at least one symbol");
  if (ipow(base_, depth_) != encode_.size())
    throw NotBijective(std::to_string(encode_.size()) + " actions cannot biject onto words of length " + std::to_string(depth_));
  decode_.assign(encode_.size(), -1);
  for (std::size_t a = 0; a < encode_.size(); ++a) {
    const auto& word = encode_[a];
    if (static_cast<int>(word.size()) != depth_) throw NotBijective("code words have unequal lengths");
    for (int x : word)
      if (x < 0 || x >= base_) throw NotBijective("code word symbol outside the alphabet");
    const std::size_t v = word_value(word);
    if (decode_[v] >= 0)
      throw NotBijective("code word " + codeword_string(word) + " assigned to actions " + std::to_string(decode_[v]) + " and " + std::to_string(a));
    decode_[v] = static_cast<int>(a);
  }
}

ActionCodec ActionCodec::index_order(int base, int action_count) {
  check_base(base);
  int depth = 1;
  while (ipow(base, depth) < static_cast<std::size_t>(action_count)) ++depth;
  if (ipow(base, depth) != static_cast<std::size_t>(action_count))
    throw NotBijective(std::to_string(action_count) + " actions is not a power of " + std::to_string(base) + "; pad first");
  std::vector<Codeword> table(static_cast<std::size_t>(action_count), Codeword(static_cast<std::size_t>(depth)));
  for (int a = 0; a < action_count; ++a) {
    int v = a;
    for (int i = depth - 1; i >= 0; --i) {
      table[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] = v % base;
      v /= base;
    }
  }
  return ActionCodec(base, std::move(table));
}

std::size_t ActionCodec::word_value(std::span<const int> word) const {
  std::size_t v = 0;
  for (int x : word) v = v * static_cast<std::size_t>(base_) + static_cast<std::size_t>(x);
  return v;
}

int ActionCodec::decode(std::span<const int> word) const {
  if (static_cast<int>(word.size()) != depth_) throw InvalidParam("decode needs a word of length " + std::to_string(depth_));
  for (int x : word)
    if (x < 0 || x >= base_) throw InvalidParam("symbol outside the decision alphabet");
  return decode_[word_value(word)];
}

std::vector<int> ActionCodec::restricted_actions(std::span<const int> prefix) const {
  if (static_cast<int>(prefix.size()) > depth_) throw InvalidParam("prefix longer than the code length");
  // Words extending the prefix occupy one contiguous block of values.
  const std::size_t span = ipow(base_, depth_ - static_cast<int>(prefix.size()));
  const std::size_t first = word_value(prefix) * span;
  std::vector<int> out;
  out.reserve(span);
  for (std::size_t v = first; v < first + span; ++v) out.push_back(decode_[v]);
  return out;
}

std::string ActionCodec::dump(const std::vector<ActionLabel>& actions) const {
  std::ostringstream out;
  for (std::size_t a = 0; a < encode_.size(); ++a) {
    out << (a < actions.size() ? actions[a].name : std::to_string(a)) << '\t' << codeword_string(encode_[a]) << '\n';
  }
  return out.str();
}

ActionCodec ActionCodec::parse(std::string_view text, const std::vector<ActionLabel>& actions, int base) {
  std::vector<Codeword> table(actions.size());
  std::vector<bool> seen(actions.size(), false);
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InvalidParam("codec line lacks a tab: '" + line + "'");
    const std::string name = line.substr(0, tab);
    std::size_t id = actions.size();
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i].name == name) id = i;
    if (id == actions.size()) throw InvalidParam("codec names unknown action '" + name + "'");
    if (seen[id]) throw NotBijective("action '" + name + "' listed twice");
    seen[id] = true;
    table[id] = parse_codeword(line.substr(tab + 1), base);
  }
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (!seen[i]) throw NotBijective("action '" + actions[i].name + "' has no code word");
  return ActionCodec(base, std::move(table));
}

QuantizedInterval quantize_interval(double lo, double hi, double delta, int base) {
  check_base(base);
  if (!(hi > lo)) throw DegenerateInterval("interval [" + format_double(lo) + ", " + format_double(hi) + "] is empty");
  if (!(delta > 0.0)) throw InvalidParam("delta must be positive");
  const double width = hi - lo;
  int depth = 1;
  while (width / static_cast<double>(ipow(base, depth)) > delta) ++depth;
  const std::size_t cells = ipow(base, depth);
  std::vector<double> points(cells);
  for (std::size_t i = 0; i < cells; ++i) points[i] = lo + (static_cast<double>(i) + 0.5) * width / static_cast<double>(cells);
  return {std::move(points), ActionCodec::index_order(base, static_cast<int>(cells))};
}

}  // namespace seqrl
