#include "seqrl/seqenv.hpp"

#include <map>
#include <sstream>

#include "seqrl/errors.hpp"

namespace seqrl {

namespace {

std::pair<std::string, std::string> split_policy_key(const std::string& key) {
  const auto slash = key.rfind('/');
  if (slash == std::string::npos) throw InvalidParam("sequentialized policy key '" + key + "' lacks '/'");
  return {key.substr(0, slash), key.substr(slash + 1)};
}

int sample_index(std::mt19937_64& rng, const RowD& row) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += row[i];
    if (u < acc) return static_cast<int>(i);
  }
  return last_positive;
}

}  // namespace

SequentializedHistory::SequentializedHistory(History history, int depth) : history_(std::move(history)), depth_(depth) {
  if (depth_ < 1) throw InvalidParam("code length must be positive");
  if (history_.mode() != HistoryMode::Sequentialized) throw InvalidParam("history is not in sequentialized mode");
}

Codeword SequentializedHistory::pending_code() const {
  const auto actions = history_.actions();
  const auto n = static_cast<std::size_t>(phase());
  return Codeword(actions.end() - static_cast<std::ptrdiff_t>(n), actions.end());
}

SequentializedHistory SequentializedHistory::extended(int symbol, Percept next) const {
  return SequentializedHistory(history_.extended(symbol, next), depth_);
}

std::string SeqCursor::policy_key() const { return policy_ctx.key() + "/" + codeword_string(pending); }

std::string SeqCursor::state_key() const { return env_ctx.key() + "/" + codeword_string(pending); }

SequentializedEnvironment::SequentializedEnvironment(const ValidatedEnvironment& env, const ActionCodec& codec, SeqOptions options)
    : env_(env), codec_(codec), options_(options) {
  if (codec_.action_count() != env_.action_count())
    throw InvalidParam("codec covers " + std::to_string(codec_.action_count()) + " actions but the environment has " +
                       std::to_string(env_.action_count()));
  if (options_.filler == FillerMode::Dummy && (options_.dummy_obs < 0 || options_.dummy_obs >= env_.obs_count()))
    throw InvalidParam("dummy observation out of range");
  prefix_count_ = 0;
  int level = 1;
  for (int i = 0; i < depth(); ++i) {
    prefix_count_ += level;
    level *= base();
  }
}

int SequentializedEnvironment::observation_count() const {
  return augmented() ? env_.obs_count() * prefix_count_ : env_.obs_count();
}

int SequentializedEnvironment::augmented_index(int obs, std::span<const int> prefix) const {
  if (static_cast<int>(prefix.size()) >= depth()) throw InvalidParam("augmented prefix must be shorter than the code length");
  // Prefixes of length i occupy ranks [(b^i - 1)/(b - 1), (b^{i+1} - 1)/(b - 1)).
  int offset = 0;
  int level = 1;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    offset += level;
    level *= base();
  }
  int value = 0;
  for (int x : prefix) value = value * base() + x;
  return obs * prefix_count_ + offset + value;
}

std::pair<int, Codeword> SequentializedEnvironment::augmented_parts(int index) const {
  const int obs = index / prefix_count_;
  int rank = index % prefix_count_;
  int length = 0;
  int level = 1;
  while (rank >= level) {
    rank -= level;
    level *= base();
    ++length;
  }
  Codeword prefix(static_cast<std::size_t>(length));
  for (int i = length - 1; i >= 0; --i) {
    prefix[static_cast<std::size_t>(i)] = rank % base();
    rank /= base();
  }
  return {obs, prefix};
}

int SequentializedEnvironment::dispatched_obs(int real_obs, std::span<const int> prefix) const {
  switch (options_.filler) {
    case FillerMode::Augmented:
      return augmented_index(real_obs, prefix);
    case FillerMode::Dummy:
      return prefix.empty() ? real_obs : options_.dummy_obs;
    case FillerMode::RepeatLast:
      break;
  }
  return real_obs;
}

SeqCursor SequentializedEnvironment::start(Percept initial, int policy_length) const {
  return SeqCursor{env_.initial_context(initial), Context::initial(initial, policy_length), initial.obs, {}};
}

Percept SequentializedEnvironment::filler(const SeqCursor& c, int x) const {
  Codeword prefix = c.pending;
  prefix.push_back(x);
  return {dispatched_obs(c.last_obs, prefix), env_.zero_reward()};
}

Percept SequentializedEnvironment::real_percept(Percept dispatched) const {
  if (!augmented()) return dispatched;
  auto [obs, prefix] = augmented_parts(dispatched.obs);
  if (!prefix.empty()) throw UnreachableHistory("augmented observation carries a code prefix at a complete step");
  return {obs, dispatched.reward};
}

SeqCursor SequentializedEnvironment::advance(const SeqCursor& c, int x, Percept dispatched) const {
  SeqCursor next = c;
  if (completes(c)) {
    next.pending.push_back(x);
    const int action = codec_.decode(next.pending);
    const Percept real = real_percept(dispatched);
    next.env_ctx = c.env_ctx.advanced(action, real);
    next.policy_ctx = c.policy_ctx.advanced(action, real);
    next.last_obs = real.obs;
    next.pending.clear();
  } else {
    next.pending.push_back(x);
  }
  return next;
}

SeqCursor SequentializedEnvironment::cursor(const SequentializedHistory& tau, std::optional<int> policy_length) const {
  if (tau.depth() != depth()) throw UnreachableHistory("history was built for code length " + std::to_string(tau.depth()));
  const History& h = tau.history();
  const Percept first = h.percept(0);
  if (first.obs < 0 || first.obs >= observation_count() || first.reward < 0 || first.reward >= env_.reward_count())
    throw UnreachableHistory("initial percept out of range");
  SeqCursor c = start(real_percept(first), policy_length.value_or(env_.context_length()));
  for (std::size_t i = 0; i < h.steps(); ++i) {
    const int x = h.action(i);
    const Percept p = h.percept(i + 1);
    if (x < 0 || x >= base()) throw UnreachableHistory("symbol outside the decision alphabet");
    if (!completes(c)) {
      if (p != filler(c, x))
        throw UnreachableHistory("filler at symbol " + std::to_string(i + 1) + " deviates from the construction");
    } else if (p.obs < 0 || p.obs >= observation_count() || p.reward < 0 || p.reward >= env_.reward_count()) {
      throw UnreachableHistory("percept out of range");
    }
    c = advance(c, x, p);
  }
  return c;
}

SequentializedHistory SequentializedEnvironment::sequentialize(const History& h) const {
  if (h.mode() != HistoryMode::Original) throw InvalidParam("sequentialize expects an original-mode history");
  History out(Percept{dispatched_obs(h.percept(0).obs, {}), h.percept(0).reward}, HistoryMode::Sequentialized);
  int last_obs = h.percept(0).obs;
  for (std::size_t i = 0; i < h.steps(); ++i) {
    const int action = h.action(i);
    if (action < 0 || action >= codec_.action_count()) throw InvalidParam("action outside the codec's action set");
    const Codeword& word = codec_.encode(action);
    Codeword prefix;
    for (int j = 0; j + 1 < depth(); ++j) {
      prefix.push_back(word[static_cast<std::size_t>(j)]);
      out.append(word[static_cast<std::size_t>(j)], {dispatched_obs(last_obs, prefix), env_.zero_reward()});
    }
    const Percept next = h.percept(i + 1);
    out.append(word.back(), {dispatched_obs(next.obs, {}), next.reward});
    last_obs = next.obs;
  }
  return SequentializedHistory(std::move(out), depth());
}

std::optional<History> SequentializedEnvironment::desequentialize(const SequentializedHistory& tau) const {
  if (tau.depth() != depth() || !tau.complete()) return std::nullopt;
  try {
    cursor(tau);
  } catch (const UnreachableHistory&) {
    return std::nullopt;
  }
  const History& s = tau.history();
  History out(real_percept(s.percept(0)));
  const auto d = static_cast<std::size_t>(depth());
  for (std::size_t i = 0; i < s.steps(); i += d) {
    Codeword word(s.actions().begin() + static_cast<std::ptrdiff_t>(i), s.actions().begin() + static_cast<std::ptrdiff_t>(i + d));
    out.append(codec_.decode(word), real_percept(s.percept(i + d)));
  }
  return out;
}

std::vector<std::pair<Percept, Rational>> SequentializedEnvironment::step_outcomes_exact(const SeqCursor& c, int x) const {
  if (x < 0 || x >= base()) throw InvalidParam("symbol outside the decision alphabet");
  if (!completes(c)) return {{filler(c, x), Rational(1)}};
  Codeword word = c.pending;
  word.push_back(x);
  const Row& row = env_.row(c.env_ctx, codec_.decode(word));
  std::vector<std::pair<Percept, Rational>> out;
  for (int i = 0; i < env_.outcome_count(); ++i) {
    const Rational& p = row[static_cast<std::size_t>(i)];
    if (p > 0) {
      const Percept real = env_.outcome(i);
      out.emplace_back(Percept{dispatched_obs(real.obs, {}), real.reward}, p);
    }
  }
  return out;
}

std::vector<std::pair<Percept, double>> SequentializedEnvironment::step_outcomes(const SeqCursor& c, int x) const {
  if (x < 0 || x >= base()) throw InvalidParam("symbol outside the decision alphabet");
  if (!completes(c)) return {{filler(c, x), 1.0}};
  Codeword word = c.pending;
  word.push_back(x);
  const RowD& row = env_.row_d(c.env_ctx, codec_.decode(word));
  std::vector<std::pair<Percept, double>> out;
  for (int i = 0; i < env_.outcome_count(); ++i) {
    const double p = row[static_cast<std::size_t>(i)];
    if (p > 0.0) {
      const Percept real = env_.outcome(i);
      out.emplace_back(Percept{dispatched_obs(real.obs, {}), real.reward}, p);
    }
  }
  return out;
}

Row SequentializedEnvironment::seq_transition(const SequentializedHistory& tau, int x) const {
  const SeqCursor c = cursor(tau);
  Row out(static_cast<std::size_t>(outcome_count()), Rational(0));
  for (const auto& [p, mass] : step_outcomes_exact(c, x)) out[static_cast<std::size_t>(outcome_index(p))] = mass;
  return out;
}

Row SequentializedEnvironment::augmented_seq_transition(const SequentializedHistory& tau, int x) const {
  if (!env_.is_mdp()) throw NotMarkovEnv("the original environment conditions on more than the last observation");
  if (!augmented()) throw InvalidParam("environment was not built with augmented fillers");
  return seq_transition(tau, x);
}

PolicySpec SequentializedEnvironment::lift_policy(const PolicySpec& seq_policy) const {
  if (seq_policy.mode != HistoryMode::Sequentialized) throw InvalidParam("lift_policy expects a sequentialized policy");
  PolicySpec lifted;
  lifted.mode = HistoryMode::Original;
  lifted.context_length = seq_policy.context_length;
  std::map<std::string, bool> contexts;
  for (const auto& [key, row] : seq_policy.rows) contexts[split_policy_key(key).first] = true;
  for (const auto& [ctx_key, unused] : contexts) {
    std::vector<double> row(static_cast<std::size_t>(codec_.action_count()), 1.0);
    for (int a = 0; a < codec_.action_count(); ++a) {
      const Codeword& word = codec_.encode(a);
      for (int i = 0; i < depth(); ++i) {
        const std::string key = ctx_key + "/" + codeword_string(std::span<const int>(word).first(static_cast<std::size_t>(i)));
        row[static_cast<std::size_t>(a)] *= seq_policy.row(key)[static_cast<std::size_t>(word[static_cast<std::size_t>(i)])];
      }
    }
    lifted.rows.emplace(ctx_key, std::move(row));
  }
  return lifted;
}

std::vector<SequentializedHistory> enumerate_seq_histories(const SequentializedEnvironment& seq, int symbols, std::size_t cap) {
  if (symbols < 0) throw InvalidParam("symbol count must be non-negative");
  const auto& env = seq.env();
  std::vector<std::pair<SequentializedHistory, SeqCursor>> frontier;
  for (int i = 0; i < env.outcome_count(); ++i) {
    if (env.initial()[static_cast<std::size_t>(i)] > 0) {
      const Percept real = env.outcome(i);
      const SeqCursor c = seq.start(real, env.context_length());
      const Percept shown = seq.augmented() ? Percept{seq.augmented_index(real.obs, {}), real.reward} : real;
      frontier.emplace_back(SequentializedHistory(History(shown, HistoryMode::Sequentialized), seq.depth()), c);
    }
  }
  for (int step = 0; step < symbols; ++step) {
    std::vector<std::pair<SequentializedHistory, SeqCursor>> next;
    for (const auto& [tau, c] : frontier) {
      for (int x = 0; x < seq.base(); ++x) {
        for (const auto& [p, mass] : seq.step_outcomes(c, x)) {
          next.emplace_back(tau.extended(x, p), seq.advance(c, x, p));
          if (next.size() > cap) throw BudgetExceeded("sequentialized enumeration passed cap " + std::to_string(cap));
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<SequentializedHistory> out;
  out.reserve(frontier.size());
  for (auto& entry : frontier) out.push_back(std::move(entry.first));
  return out;
}

MockSession::MockSession(const SequentializedEnvironment& seq, std::uint64_t seed)
    : seq_(seq),
      rng_(seed),
      initial_(seq.env().outcome(sample_index(rng_, seq.env().initial_d()))),
      cursor_(seq.start(initial_, seq.env().context_length())),
      transcript_(History(Percept{seq.augmented() ? seq.augmented_index(initial_.obs, {}) : initial_.obs, initial_.reward},
                          HistoryMode::Sequentialized),
                  seq.depth()) {}

int MockSession::sample(const RowD& row) { return sample_index(rng_, row); }

Percept MockSession::step(int symbol) {
  if (symbol < 0 || symbol >= seq_.base()) throw InvalidParam("symbol outside the decision alphabet");
  Percept dispatched;
  if (seq_.completes(cursor_)) {
    Codeword word = cursor_.pending;
    word.push_back(symbol);
    const int action = seq_.codec().decode(word);
    const Percept real = seq_.env().outcome(sample(seq_.env().row_d(cursor_.env_ctx, action)));
    dispatched = seq_.augmented() ? Percept{seq_.augmented_index(real.obs, {}), real.reward} : real;
    ++k_;
  } else {
    dispatched = seq_.filler(cursor_, symbol);
  }
  cursor_ = seq_.advance(cursor_, symbol, dispatched);
  transcript_ = transcript_.extended(symbol, dispatched);
  ++t_;
  log_.push_back({t_, k_, phase(), symbol, dispatched});
  return dispatched;
}

std::string MockSession::log_csv() const {
  std::ostringstream out;
  out << "t,k,phase,x,o,r\n";
  for (const auto& tick : log_)
    out << tick.t << ',' << tick.k << ',' << tick.phase << ',' << tick.symbol << ',' << tick.percept.obs << ','
        << format_rational(seq_.env().reward(tick.percept.reward)) << '\n';
  return out.str();
}

}  // namespace seqrl
