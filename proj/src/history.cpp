#include "seqrl/history.hpp"

#include <algorithm>

namespace seqrl {

namespace {

// Compares entry sequences (o, r, a) position by position; a missing action
// (the final entry) sorts before any action.
std::strong_ordering compare_entries(std::span<const Percept> lp, std::span<const int> la,
                                     std::span<const Percept> rp, std::span<const int> ra) {
  const std::size_t n = std::min(lp.size(), rp.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = lp[i] <=> rp[i]; c != 0) return c;
    const int lhs_action = i < la.size() ? la[i] : -1;
    const int rhs_action = i < ra.size() ? ra[i] : -1;
    if (auto c = lhs_action <=> rhs_action; c != 0) return c;
  }
  return lp.size() <=> rp.size();
}

void append_entries(std::string& out, std::span<const Percept> percepts, std::span<const int> actions) {
  for (std::size_t i = 0; i < percepts.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(percepts[i].obs);
    out += ',';
    out += std::to_string(percepts[i].reward);
    if (i < actions.size()) {
      out += ',';
      out += std::to_string(actions[i]);
    }
  }
}

}  // namespace

History::History(Percept initial, HistoryMode mode) : percepts_{initial}, mode_(mode) {}

void History::append(int action, Percept next) {
  actions_.push_back(action);
  percepts_.push_back(next);
}

History History::extended(int action, Percept next) const {
  History out = *this;
  out.append(action, next);
  return out;
}

History History::prefix(std::size_t steps) const {
  History out(percepts_.front(), mode_);
  for (std::size_t i = 0; i < steps && i < actions_.size(); ++i) out.append(actions_[i], percepts_[i + 1]);
  return out;
}

std::string History::key() const {
  std::string out;
  append_entries(out, percepts_, actions_);
  return out;
}

std::strong_ordering operator<=>(const History& lhs, const History& rhs) {
  return compare_entries(lhs.percepts_, lhs.actions_, rhs.percepts_, rhs.actions_);
}

Context::Context(int length, std::vector<Percept> percepts, std::vector<int> actions)
    : length_(length), percepts_(std::move(percepts)), actions_(std::move(actions)) {
  trim();
}

void Context::trim() {
  if (length_ < 0) return;
  if (length_ == 0) {
    Percept last = percepts_.back();
    percepts_.assign(1, Percept{last.obs, 0});
    actions_.clear();
    return;
  }
  const auto keep = static_cast<std::size_t>(length_);
  if (percepts_.size() > keep) {
    percepts_.erase(percepts_.begin(), percepts_.end() - static_cast<std::ptrdiff_t>(keep));
    actions_.erase(actions_.begin(), actions_.end() - static_cast<std::ptrdiff_t>(keep - 1));
  }
}

Context Context::of(const History& h, int length) {
  const auto percepts = h.percepts();
  const auto actions = h.actions();
  if (length >= 0) {
    // Copy only the tail that survives trimming.
    const std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(length));
    const std::size_t first = percepts.size() > keep ? percepts.size() - keep : 0;
    return Context(length, std::vector<Percept>(percepts.begin() + static_cast<std::ptrdiff_t>(first), percepts.end()),
                   std::vector<int>(actions.begin() + static_cast<std::ptrdiff_t>(first), actions.end()));
  }
  return Context(length, std::vector<Percept>(percepts.begin(), percepts.end()),
                 std::vector<int>(actions.begin(), actions.end()));
}

Context Context::initial(Percept p, int length) { return Context(length, {p}, {}); }

Context Context::advanced(int action, Percept next) const {
  Context out = *this;
  out.actions_.push_back(action);
  out.percepts_.push_back(next);
  out.trim();
  return out;
}

Context Context::mapped(std::span<const int> canon) const {
  Context out = *this;
  for (int& a : out.actions_) a = canon[static_cast<std::size_t>(a)];
  return out;
}

std::string Context::key() const {
  if (length_ == 0) return std::to_string(percepts_.front().obs);
  std::string out;
  append_entries(out, percepts_, actions_);
  return out;
}

std::strong_ordering operator<=>(const Context& lhs, const Context& rhs) {
  if (auto c = lhs.length_ <=> rhs.length_; c != 0) return c;
  return compare_entries(lhs.percepts_, lhs.actions_, rhs.percepts_, rhs.actions_);
}

}  // namespace seqrl
