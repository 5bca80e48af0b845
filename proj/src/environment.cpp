#include "seqrl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "seqrl/errors.hpp"

namespace seqrl {

using nlohmann::json;

namespace {

Rational number_from_json(const json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number()) return parse_rational(j.dump());
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
  throw ParseError(where + ": expected a number or a \"p/q\" string");
}

Row row_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  Row out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json row_to_json(const Row& row) {
  json out = json::array();
  for (const auto& q : row) out.push_back(format_rational(q));
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

int parse_index(const std::string& text, const std::string& where) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ParseError(where + ": expected a non-negative integer, got '" + text + "'");
  return std::stoi(text);
}

int parse_action(const std::string& text, const std::vector<ActionLabel>& actions, const std::string& where) {
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const int id = std::stoi(text);
    if (id < static_cast<int>(actions.size())) return id;
  }
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (actions[i].name == text) return static_cast<int>(i);
  throw ParseError(where + ": unknown action '" + text + "'");
}

struct ParsedKey {
  Context ctx;
  int action;
};

ParsedKey parse_table_key(const std::string& key, const EnvironmentSpec& spec) {
  const auto bar = key.rfind('|');
  if (bar == std::string::npos) throw ParseError("table key '" + key + "' lacks '|action'");
  const int action = parse_action(key.substr(bar + 1), spec.actions, "table key '" + key + "'");
  const std::string ctx_text = key.substr(0, bar);
  const int m = spec.context_length;
  if (m == 0) {
    const int obs = parse_index(ctx_text, "table key '" + key + "'");
    return {Context::initial({obs, 0}, 0), action};
  }
  const auto entries = split(ctx_text, ';');
  if (static_cast<int>(entries.size()) > m)
    throw ParseError("table key '" + key + "' has more entries than context_length " + std::to_string(m));
  std::optional<Context> ctx;
  int pending_action = -1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto fields = split(entries[i], ',');
    const bool last = i + 1 == entries.size();
    if (fields.size() != (last ? 2u : 3u)) throw ParseError("table key '" + key + "': malformed entry '" + entries[i] + "'");
    Percept p{parse_index(fields[0], key), parse_index(fields[1], key)};
    if (!ctx)
      ctx = Context::initial(p, m);
    else
      ctx = ctx->advanced(pending_action, p);
    if (!last) pending_action = parse_action(fields[2], spec.actions, "table key '" + key + "'");
  }
  return {*ctx, action};
}

void check_row(const Row& row, std::size_t width, NumericMode mode, const std::string& where) {
  if (row.size() != width)
    throw RowSumError(where + ": row has " + std::to_string(row.size()) + " entries, expected " + std::to_string(width));
  for (const auto& q : row)
    if (q < 0) throw RowSumError(where + ": negative probability " + format_rational(q));
  if (mode == NumericMode::Exact) {
    const Rational total = row_sum(row);
    if (total != 1) throw RowSumError(where + ": row sums to " + format_rational(total));
  } else {
    double total = 0.0;
    for (const auto& q : row) total += q.get_d();
    if (std::abs(total - 1.0) > kFloatTolerance) throw RowSumError(where + ": row sums to " + format_double(total));
  }
}

void check_percept(Percept p, const EnvironmentSpec& spec, const std::string& where) {
  if (p.obs < 0 || p.obs >= spec.obs_count || p.reward < 0 || p.reward >= static_cast<int>(spec.rewards.size()))
    throw ParseError(where + ": observation or reward index out of range");
}

// Appends r = 0 to the reward set and re-lays every row for the wider outcome space.
void extend_with_zero_reward(EnvironmentSpec& spec) {
  const std::size_t old_r = spec.rewards.size();
  const std::size_t new_r = old_r + 1;
  auto relayout = [&](const Row& row) {
    Row out(static_cast<std::size_t>(spec.obs_count) * new_r, Rational(0));
    for (std::size_t i = 0; i < row.size() && old_r > 0; ++i) out[(i / old_r) * new_r + i % old_r] = row[i];
    return out;
  };
  spec.initial = relayout(spec.initial);
  for (auto& [key, row] : spec.table) row = relayout(row);
  spec.rewards.emplace_back(0);
}

}  // namespace

std::string table_key(const Context& ctx, int action) { return ctx.key() + "|" + std::to_string(action); }

EnvironmentSpec parse_environment(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("environment JSON: ") + e.what());
  }
  EnvironmentSpec spec;
  try {
    spec.obs_count = doc.at("obs_count").get<int>();
    for (std::size_t i = 0; i < doc.at("rewards").size(); ++i)
      spec.rewards.push_back(number_from_json(doc["rewards"][i], "rewards[" + std::to_string(i) + "]"));
    for (const auto& a : doc.at("actions")) {
      ActionLabel label;
      if (a.is_string()) {
        label.name = a.get<std::string>();
      } else {
        label.name = a.at("name").get<std::string>();
        if (a.contains("alias_of") && !a["alias_of"].is_null()) {
          const auto& target = a["alias_of"];
          if (target.is_number_integer()) {
            label.alias_of = target.get<int>();
          } else {
            label.alias_of = -1;
            const auto name = target.get<std::string>();
            int idx = 0;
            for (const auto& prior : doc.at("actions")) {
              const auto prior_name = prior.is_string() ? prior.get<std::string>() : prior.at("name").get<std::string>();
              if (prior_name == name) {
                label.alias_of = idx;
                break;
              }
              ++idx;
            }
            if (*label.alias_of < 0) throw ParseError("alias_of refers to unknown action '" + name + "'");
          }
        }
      }
      spec.actions.push_back(std::move(label));
    }
    spec.context_length = doc.value("context_length", 0);
    spec.initial = row_from_json(doc.at("initial"), "initial");
    for (const auto& [key, value] : doc.at("table").items()) spec.table[key] = row_from_json(value, "table[" + key + "]");
  } catch (const json::exception& e) {
    throw ParseError(std::string("environment JSON: ") + e.what());
  }
  return spec;
}

EnvironmentSpec load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_environment(buffer.str());
}

std::string dump_environment(const EnvironmentSpec& spec) {
  json doc;
  doc["obs_count"] = spec.obs_count;
  doc["rewards"] = row_to_json(spec.rewards);
  doc["actions"] = json::array();
  for (const auto& a : spec.actions) {
    json entry{{"name", a.name}};
    if (a.alias_of) entry["alias_of"] = *a.alias_of;
    doc["actions"].push_back(entry);
  }
  doc["context_length"] = spec.context_length;
  doc["initial"] = row_to_json(spec.initial);
  doc["table"] = json::object();
  for (const auto& [key, row] : spec.table) doc["table"][key] = row_to_json(row);
  return doc.dump(1);
}

ValidatedEnvironment::ValidatedEnvironment(EnvironmentSpec spec, NumericMode mode) : spec_(std::move(spec)), mode_(mode) {
  if (spec_.obs_count < 1) throw InvalidParam("obs_count must be at least 1");
  if (spec_.actions.empty()) throw InvalidParam("at least one action is required");
  if (spec_.context_length < 0) throw InvalidParam("context_length must be non-negative");
  if (spec_.rewards.empty()) throw InvalidParam("reward set is empty");
  {
    std::set<Rational> distinct(spec_.rewards.begin(), spec_.rewards.end());
    if (distinct.size() != spec_.rewards.size()) throw InvalidParam("reward set has duplicates");
  }

  auto zero = std::find(spec_.rewards.begin(), spec_.rewards.end(), Rational(0));
  if (zero == spec_.rewards.end()) {
    std::cerr << "warning: reward set lacks 0; extending it with the filler reward\n";
    extend_with_zero_reward(spec_);
    zero = spec_.rewards.end() - 1;
  }
  zero_reward_ = static_cast<int>(zero - spec_.rewards.begin());
  for (const auto& r : spec_.rewards) reward_values_.push_back(r.get_d());
  reward_min_ = *std::min_element(reward_values_.begin(), reward_values_.end());
  reward_range_ = *std::max_element(reward_values_.begin(), reward_values_.end()) - reward_min_;

  const auto n_actions = spec_.actions.size();
  canonical_.resize(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    int cur = static_cast<int>(a);
    std::size_t hops = 0;
    while (spec_.actions[static_cast<std::size_t>(cur)].alias_of) {
      cur = *spec_.actions[static_cast<std::size_t>(cur)].alias_of;
      if (cur < 0 || cur >= static_cast<int>(n_actions) || ++hops > n_actions)
        throw InvalidParam("action '" + spec_.actions[a].name + "' has an invalid alias_of chain");
    }
    canonical_[a] = cur;
    has_aliases_ = has_aliases_ || cur != static_cast<int>(a);
  }

  const std::size_t width = static_cast<std::size_t>(outcome_count());
  check_row(spec_.initial, width, mode_, "initial");
  initial_d_ = to_double(spec_.initial);

  for (const auto& [key, row] : spec_.table) {
    check_row(row, width, mode_, "table[" + key + "]");
    const auto parsed = parse_table_key(key, spec_);
    for (Percept p : parsed.ctx.percepts()) check_percept(p, spec_, "table[" + key + "]");
    const Context canon_ctx = parsed.ctx.mapped(canonical_);
    const int canon_action = canonical_action(parsed.action);
    const std::string canon_key = table_key(canon_ctx, canon_action);
    if (auto it = index_.find(canon_key); it != index_.end()) {
      if (!rows_equal(entries_[it->second].exact, row, mode_))
        throw AliasMismatch("row '" + key + "' differs from the row of its alias root '" + canon_key + "'");
      continue;
    }
    index_.emplace(canon_key, entries_.size());
    entries_.push_back({row, to_double(row)});
  }
  check_reachable_rows();
}

const ValidatedEnvironment::Entry& ValidatedEnvironment::lookup(const Context& ctx, int action) const {
  const std::string key = has_aliases_ ? table_key(ctx.mapped(canonical_), canonical_action(action)) : table_key(ctx, action);
  auto it = index_.find(key);
  if (it == index_.end()) throw MissingRow("no row for '" + key + "'");
  return entries_[it->second];
}

const Row& ValidatedEnvironment::row(const Context& ctx, int action) const { return lookup(ctx, action).exact; }

const RowD& ValidatedEnvironment::row_d(const Context& ctx, int action) const { return lookup(ctx, action).approx; }

void ValidatedEnvironment::check_reachable_rows() const {
  std::set<Context> seen;
  std::deque<Context> queue;
  for (int i = 0; i < outcome_count(); ++i) {
    if (spec_.initial[static_cast<std::size_t>(i)] > 0) {
      Context c = initial_context(outcome(i));
      if (seen.insert(c).second) queue.push_back(c);
    }
  }
  std::vector<int> roots;
  for (int a = 0; a < action_count(); ++a)
    if (canonical_action(a) == a) roots.push_back(a);
  while (!queue.empty()) {
    Context c = std::move(queue.front());
    queue.pop_front();
    for (int a : roots) {
      const Row& r = row(c, a);
      for (int i = 0; i < outcome_count(); ++i) {
        if (r[static_cast<std::size_t>(i)] > 0) {
          Context next = c.advanced(a, outcome(i));
          if (seen.insert(next).second) queue.push_back(std::move(next));
        }
      }
    }
  }
}

std::vector<Context> ValidatedEnvironment::reachable_contexts(std::optional<int> length) const {
  const int want = length.value_or(spec_.context_length);
  if (want < 0) throw InvalidParam("reachable_contexts needs a bounded context length");
  std::set<std::pair<Context, Context>> seen;
  std::deque<std::pair<Context, Context>> queue;
  for (int i = 0; i < outcome_count(); ++i) {
    if (spec_.initial[static_cast<std::size_t>(i)] > 0) {
      std::pair<Context, Context> s{initial_context(outcome(i)), Context::initial(outcome(i), want)};
      if (seen.insert(s).second) queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    auto [env_ctx, own_ctx] = queue.front();
    queue.pop_front();
    for (int a = 0; a < action_count(); ++a) {
      const Row& r = row(env_ctx, a);
      for (int i = 0; i < outcome_count(); ++i) {
        if (r[static_cast<std::size_t>(i)] > 0) {
          std::pair<Context, Context> next{env_ctx.advanced(a, outcome(i)), own_ctx.advanced(a, outcome(i))};
          if (seen.insert(next).second) queue.push_back(std::move(next));
        }
      }
    }
  }
  std::set<Context> own;
  for (const auto& s : seen) own.insert(s.second);
  return {own.begin(), own.end()};
}

Rational ValidatedEnvironment::history_probability(const History& h) const {
  Rational p = spec_.initial[static_cast<std::size_t>(outcome_index(h.percept(0)))];
  Context ctx = initial_context(h.percept(0));
  for (std::size_t i = 0; i < h.steps(); ++i) {
    const Percept next = h.percept(i + 1);
    p *= row(ctx, h.action(i))[static_cast<std::size_t>(outcome_index(next))];
    ctx = ctx.advanced(h.action(i), next);
  }
  return p;
}

std::vector<History> enumerate_histories(const ValidatedEnvironment& env, int depth, std::size_t cap) {
  if (depth < 0) throw InvalidParam("depth must be non-negative");
  std::vector<std::pair<History, Context>> frontier;
  for (int i = 0; i < env.outcome_count(); ++i) {
    if (env.initial()[static_cast<std::size_t>(i)] > 0) {
      const Percept p = env.outcome(i);
      frontier.emplace_back(History(p), env.initial_context(p));
      if (frontier.size() > cap) throw BudgetExceeded("history enumeration passed cap " + std::to_string(cap));
    }
  }
  for (int step = 0; step < depth; ++step) {
    std::vector<std::pair<History, Context>> next;
    for (const auto& [h, ctx] : frontier) {
      for (int a = 0; a < env.action_count(); ++a) {
        const Row& r = env.row(ctx, a);
        for (int i = 0; i < env.outcome_count(); ++i) {
          if (r[static_cast<std::size_t>(i)] > 0) {
            const Percept p = env.outcome(i);
            next.emplace_back(h.extended(a, p), ctx.advanced(a, p));
            if (next.size() > cap) throw BudgetExceeded("history enumeration passed cap " + std::to_string(cap));
          }
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<History> out;
  out.reserve(frontier.size());
  for (auto& entry : frontier) out.push_back(std::move(entry.first));
  return out;
}

const std::vector<double>& PolicySpec::row(const std::string& key) const {
  auto it = rows.find(key);
  if (it == rows.end()) throw MissingPolicyRow("policy has no row for '" + key + "'");
  return it->second;
}

void validate_policy(const PolicySpec& policy, int width) {
  for (const auto& [key, row] : policy.rows) {
    if (static_cast<int>(row.size()) != width)
      throw RowSumError("policy row '" + key + "' has " + std::to_string(row.size()) + " entries, expected " + std::to_string(width));
    double total = 0.0;
    for (double p : row) {
      if (p < 0.0) throw RowSumError("policy row '" + key + "' has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw RowSumError("policy row '" + key + "' sums to " + format_double(total));
  }
}

}  // namespace seqrl
