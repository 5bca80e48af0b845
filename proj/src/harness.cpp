#include "seqrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "seqrl/codec.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/esa.hpp"
#include "seqrl/planner.hpp"
#include "seqrl/seqenv.hpp"

namespace seqrl {

namespace {

using json = nlohmann::ordered_json;

// Grid width of the census family (m = 1 by default); Q* values lie in [0, 2] at gamma 0.5.
constexpr double kCensusDelta = 0.25;
constexpr double kFloatSlack = 1e-10;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <class T>
T pick(std::mt19937_64& rng, std::initializer_list<T> options) {
  return *(options.begin() + static_cast<std::ptrdiff_t>(rng() % options.size()));
}

std::vector<Codeword> words_of_length(int base, int length) {
  std::vector<Codeword> out{{}};
  for (int i = 0; i < length; ++i) {
    std::vector<Codeword> longer;
    for (const auto& w : out)
      for (int x = 0; x < base; ++x) {
        longer.push_back(w);
        longer.back().push_back(x);
      }
    out = std::move(longer);
  }
  return out;
}

/// Builds the transition table over every context reachable from the
/// initial row, visiting contexts in a fixed order.
void fill_table(EnvironmentSpec& spec, const std::function<Row(const Context&, int)>& make_row) {
  const int n_rewards = static_cast<int>(spec.rewards.size());
  const int n_outcomes = spec.obs_count * n_rewards;
  auto outcome = [&](int i) { return Percept{i / n_rewards, i % n_rewards}; };
  std::set<Context> seen;
  std::deque<Context> queue;
  for (int i = 0; i < n_outcomes; ++i) {
    if (spec.initial[static_cast<std::size_t>(i)] > 0) {
      Context c = Context::initial(outcome(i), spec.context_length);
      if (seen.insert(c).second) queue.push_back(c);
    }
  }
  while (!queue.empty()) {
    const Context ctx = queue.front();
    queue.pop_front();
    for (int a = 0; a < static_cast<int>(spec.actions.size()); ++a) {
      Row row = make_row(ctx, a);
      for (int i = 0; i < n_outcomes; ++i) {
        if (row[static_cast<std::size_t>(i)] > 0) {
          Context next = ctx.advanced(a, outcome(i));
          if (seen.insert(next).second) queue.push_back(std::move(next));
        }
      }
      spec.table.emplace(table_key(ctx, a), std::move(row));
    }
  }
}

Row random_row(std::mt19937_64& rng, int n, double sparsity) {
  const int support = std::max(1, static_cast<int>(std::lround((1.0 - sparsity) * n)));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < support; ++i) {
    const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Row row(static_cast<std::size_t>(n), Rational(0));
  long total = 0;
  std::vector<long> weights(static_cast<std::size_t>(support));
  for (auto& w : weights) total += (w = 1 + static_cast<long>(rng() % 9));
  for (int i = 0; i < support; ++i) {
    Rational p(weights[static_cast<std::size_t>(i)], total);
    p.canonicalize();
    row[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = p;
  }
  return row;
}

std::string hex(std::uint64_t v, int digits) {
  std::ostringstream out;
  out << std::hex << std::setw(digits) << std::setfill('0') << (v >> (64 - 4 * digits));
  return out.str();
}

// ---------------------------------------------------------------------------
// Report plumbing

struct Recorder {
  VerificationReport& report;
  std::string suite;
  std::string env_id;

  void add(const std::string& check, double lhs, double rhs, double diff, double tol, bool pass, std::string note = {}) {
    report.records.push_back({suite, env_id, check, lhs, rhs, diff, tol, pass, false, std::move(note)});
  }
  void equal(const std::string& check, double lhs, double rhs, double tol, std::string note = {}) {
    const double diff = std::abs(lhs - rhs);
    add(check, lhs, rhs, diff, tol, diff <= tol, std::move(note));
  }
  void at_most(const std::string& check, double lhs, double rhs, double tol, std::string note = {}) {
    add(check, lhs, rhs, std::abs(lhs - rhs), tol, lhs <= rhs + tol, std::move(note));
  }
  void at_least(const std::string& check, double lhs, double rhs, double tol, std::string note = {}) {
    add(check, lhs, rhs, std::abs(lhs - rhs), tol, lhs + tol >= rhs, std::move(note));
  }
  void skip(const std::string& check, std::string note) {
    report.records.push_back({suite, env_id, check, 0.0, 0.0, 0.0, 0.0, true, true, std::move(note)});
  }
  void error(const Error& e) { add("error", 0.0, 0.0, 0.0, 0.0, false, e.what()); }
};

/// Largest |lhs - rhs| seen, with the pair that produced it.
struct Worst {
  double lhs = 0.0;
  double rhs = 0.0;
  double diff = -1.0;
  std::size_t count = 0;

  void add(double l, double r) {
    ++count;
    const double d = std::abs(l - r);
    if (d > diff) {
      lhs = l;
      rhs = r;
      diff = d;
    }
  }
  void emit(Recorder& rec, const std::string& check, double tol) const {
    if (count == 0) return;
    rec.add(check, lhs, rhs, diff, tol, diff <= tol, "worst of " + std::to_string(count));
  }
};

// ---------------------------------------------------------------------------
// Environment families

struct Draw {
  EnvSizes sizes;
  int m = 0;
  double sparsity = 0.0;
};

using DrawRule = std::function<Draw(std::mt19937_64&)>;

struct Family {
  std::vector<std::pair<std::string, EnvironmentSpec>> members;
};

Family make_family(const SuiteConfig& config, int default_count, const DrawRule& rule) {
  Family family;
  if (config.env_file) {
    EnvironmentSpec spec = load_environment(*config.env_file);
    family.members.emplace_back("file:" + env_fingerprint(spec), std::move(spec));
    return family;
  }
  const int count = config.env_count > 0 ? config.env_count : default_count;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = splitmix64(config.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(seed);
    Draw draw = rule(rng);
    if (config.sizes) draw.sizes = *config.sizes;
    if (config.m) draw.m = *config.m;
    EnvironmentSpec spec = random_env(seed, draw.sizes, draw.m, draw.sparsity);
    std::ostringstream id;
    id << std::setw(2) << std::setfill('0') << i << ':' << env_fingerprint(spec);
    family.members.emplace_back(id.str(), std::move(spec));
  }
  return family;
}

Draw value_draw(std::mt19937_64& rng) {
  Draw d;
  d.sizes.obs = pick(rng, {1, 2, 3});
  d.sizes.rewards = pick(rng, {2, 3});
  d.sizes.actions = pick(rng, {2, 3, 4, 5, 8});
  d.m = pick(rng, {0, 1});
  d.sparsity = pick(rng, {0.0, 0.3, 0.6});
  return d;
}

Draw process_draw(std::mt19937_64& rng) {
  Draw d;
  d.sizes.obs = pick(rng, {1, 2, 3});
  d.sizes.rewards = pick(rng, {1, 2, 3});
  d.sizes.actions = pick(rng, {2, 4, 8});
  d.m = pick(rng, {0, 1});
  d.sparsity = pick(rng, {0.0, 0.5});
  return d;
}

Draw mdp_draw(std::mt19937_64& rng) {
  Draw d = process_draw(rng);
  d.m = 0;
  return d;
}

Draw small_draw(std::mt19937_64& rng) {
  Draw d;
  d.sizes.obs = pick(rng, {1, 2, 3});
  d.sizes.rewards = pick(rng, {2, 3});
  d.sizes.actions = pick(rng, {2, 3, 4});
  d.m = pick(rng, {0, 1});
  d.sparsity = pick(rng, {0.0, 0.5});
  return d;
}

/// An environment padded to a power of two with its binary codec and
/// sequentialization.
struct Prepared {
  std::unique_ptr<ValidatedEnvironment> env;
  std::unique_ptr<ActionCodec> codec;
  std::unique_ptr<SequentializedEnvironment> seq;

  Prepared(const EnvironmentSpec& spec, NumericMode mode, SeqOptions options = {}) {
    env = std::make_unique<ValidatedEnvironment>(pad_environment(spec, 2), mode);
    codec = std::make_unique<ActionCodec>(ActionCodec::index_order(2, env->action_count()));
    seq = std::make_unique<SequentializedEnvironment>(*env, *codec, options);
  }
};

int horizon_for_config(const ValidatedEnvironment& env, double gamma, double tol) {
  // Two tails enter every comparison.
  return horizon_for(gamma, std::max(env.reward_range(), 1e-300), tol / 2.0);
}

int value_depth(const SuiteConfig& config) { return config.depth > 0 ? config.depth : 1; }

std::vector<History> histories_up_to(const ValidatedEnvironment& env, int depth) {
  std::vector<History> out;
  for (int k = 0; k <= depth; ++k) {
    auto level = enumerate_histories(env, k);
    out.insert(out.end(), std::make_move_iterator(level.begin()), std::make_move_iterator(level.end()));
  }
  return out;
}

SeqCursor weld(const SequentializedEnvironment& seq, SeqCursor c, std::span<const int> prefix) {
  for (int x : prefix) c = seq.advance(c, x, seq.filler(c, x));
  return c;
}

PolicySpec random_seq_policy(std::mt19937_64& rng, const ValidatedEnvironment& env, const SequentializedEnvironment& seq,
                             int policy_length) {
  PolicySpec policy;
  policy.mode = HistoryMode::Sequentialized;
  policy.context_length = policy_length;
  const auto width = static_cast<std::size_t>(seq.base());
  for (const auto& ctx : env.reachable_contexts(policy_length)) {
    for (int len = 0; len < seq.depth(); ++len) {
      for (const auto& prefix : words_of_length(seq.base(), len)) {
        std::vector<double> row(width);
        double total = 0.0;
        for (auto& w : row) total += (w = static_cast<double>(1 + rng() % 8));
        if (rng() % 4 == 0) {
          const auto zero = static_cast<std::size_t>(rng() % width);
          total -= row[zero];
          row[zero] = 0.0;
        }
        for (auto& w : row) w /= total;
        policy.rows.emplace(ctx.key() + "/" + codeword_string(prefix), std::move(row));
      }
    }
  }
  return policy;
}

/// Deterministic sequentialized policy choosing, at every reachable
/// (context, prefix), the symbol maximizing (or minimizing) the optimal value.
PolicySpec greedy_seq_policy(const ValidatedEnvironment& env, const SequentializedEnvironment& seq, SeqPlanner& planner, bool worst) {
  PolicySpec policy;
  policy.mode = HistoryMode::Sequentialized;
  policy.context_length = env.context_length();
  for (const auto& ctx : env.reachable_contexts()) {
    for (int len = 0; len < seq.depth(); ++len) {
      for (const auto& prefix : words_of_length(seq.base(), len)) {
        const SeqCursor c{ctx, ctx, ctx.last().obs, prefix};
        const int steps = planner.steps_for_phase(len);
        int choice = 0;
        double best = planner.q_star(c, 0, steps);
        for (int x = 1; x < seq.base(); ++x) {
          const double q = planner.q_star(c, x, steps);
          const bool better = worst ? q < best - kTieTolerance * (1.0 + std::abs(best)) : q > best + kTieTolerance * (1.0 + std::abs(best));
          if (better) {
            best = q;
            choice = x;
          }
        }
        std::vector<double> row(static_cast<std::size_t>(seq.base()), 0.0);
        row[static_cast<std::size_t>(choice)] = 1.0;
        policy.rows.emplace(c.policy_key(), std::move(row));
      }
    }
  }
  return policy;
}

PolicySpec mix_policies(const PolicySpec& a, const PolicySpec& b, double p) {
  PolicySpec out = a;
  for (auto& [key, row] : out.rows) {
    const auto& other = b.rows.at(key);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = (1.0 - p) * row[i] + p * other[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suites

using SuiteFn = void (*)(const SuiteConfig&, VerificationReport&);

template <class Body>
void for_each_env(const SuiteConfig& config, VerificationReport& report, const std::string& suite, int default_count,
                  const DrawRule& rule, Body body) {
  Family family;
  try {
    family = make_family(config, default_count, rule);
  } catch (const Error& e) {
    Recorder{report, suite, "family"}.error(e);
    return;
  }
  for (const auto& [id, spec] : family.members) {
    Recorder rec{report, suite, id};
    try {
      body(rec, spec);
    } catch (const Error& e) {
      rec.error(e);
    }
  }
}

void suite_prop_seq_process(const SuiteConfig& config, VerificationReport& report) {
  const int depth = config.depth > 0 ? config.depth : 2;
  for_each_env(config, report, "prop-seq-process", 50, process_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    std::size_t complete_rows = 0, complete_equal = 0, filler_rows = 0, filler_equal = 0, trips = 0, trips_ok = 0;
    for (const auto& h : histories_up_to(env, depth)) {
      const SequentializedHistory tau = seq.sequentialize(h);
      ++trips;
      if (const auto back = seq.desequentialize(tau); back && *back == h) ++trips_ok;
      for (int a = 0; a < env.action_count(); ++a) {
        const Codeword& word = p.codec->encode(a);
        SequentializedHistory t = tau;
        SeqCursor c = seq.cursor(tau);
        for (int i = 0; i + 1 < seq.depth(); ++i) {
          const int x = word[static_cast<std::size_t>(i)];
          const Percept f = seq.filler(c, x);
          Row expected(static_cast<std::size_t>(seq.outcome_count()), Rational(0));
          expected[static_cast<std::size_t>(seq.outcome_index(f))] = 1;
          ++filler_rows;
          if (rows_equal(seq.seq_transition(t, x), expected, config.numeric)) ++filler_equal;
          t = t.extended(x, f);
          c = seq.advance(c, x, f);
        }
        ++complete_rows;
        if (rows_equal(seq.seq_transition(t, word.back()), env.transition(h, a), config.numeric)) ++complete_equal;
      }
    }
    const double tol = config.numeric == NumericMode::Exact ? 0.0 : kFloatTolerance;
    const std::string mode = config.numeric == NumericMode::Exact ? "exact" : "floating";
    rec.equal("completing-rows", static_cast<double>(complete_equal), static_cast<double>(complete_rows), 0.0, mode + " row comparison, tol " + format_double(tol));
    rec.equal("filler-rows", static_cast<double>(filler_equal), static_cast<double>(filler_rows), 0.0, mode);
    rec.equal("g-inverse-round-trip", static_cast<double>(trips_ok), static_cast<double>(trips), 0.0);
  });
}

void suite_thm_markov(const SuiteConfig& config, VerificationReport& report) {
  const int depth = config.depth > 0 ? config.depth : 2;
  for_each_env(config, report, "thm-markov", 20, mdp_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric, SeqOptions{FillerMode::Augmented, 0});
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    if (!env.is_mdp()) {
      rec.skip("markov", "NotMarkovEnv: context length " + std::to_string(env.context_length()));
      return;
    }
    std::map<std::pair<int, int>, Row> rows;
    std::set<std::pair<int, int>> broken;
    std::size_t compared = 0;
    for (int symbols = 0; symbols <= depth * seq.depth(); ++symbols) {
      for (const auto& tau : enumerate_seq_histories(seq, symbols)) {
        for (int x = 0; x < seq.base(); ++x) {
          Row row = seq.augmented_seq_transition(tau, x);
          const std::pair<int, int> key{tau.history().last().obs, x};
          auto [it, fresh] = rows.try_emplace(key, row);
          ++compared;
          if (!fresh && !rows_equal(it->second, row, config.numeric)) broken.insert(key);
        }
      }
    }
    rec.equal("function-of-state", static_cast<double>(rows.size() - broken.size()), static_cast<double>(rows.size()), 0.0,
              std::to_string(compared) + " transitions over " + std::to_string(rows.size()) + " (obs, symbol) pairs");
    rec.equal("augmented-alphabet", seq.observation_count(), static_cast<double>(env.obs_count() * (env.action_count() - 1)), 0.0);
  });
}

void suite_prop_qmax(const SuiteConfig& config, VerificationReport& report) {
  for_each_env(config, report, "prop-qmax", 30, value_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    const int horizon = horizon_for_config(env, config.gamma, config.tol);
    SeqPlanner sp(seq, config.gamma, horizon);
    const int d = seq.depth();
    const double scale = std::pow(sp.lambda(), d - 1);
    const double tol = 2.0 * tail_bound(config.gamma, env.reward_range(), horizon) + kFloatSlack;
    Worst worst;
    for (const auto& h : histories_up_to(env, value_depth(config))) {
      const SeqCursor c = seq.cursor(seq.sequentialize(h));
      double lhs = -INFINITY;
      for (int x = 0; x < seq.base(); ++x) lhs = std::max(lhs, sp.q_star(c, x, sp.steps_for_phase(0)));
      double rhs = -INFINITY;
      for (const auto& word : words_of_length(seq.base(), d)) {
        const SeqCursor w = weld(seq, c, std::span<const int>(word).first(static_cast<std::size_t>(d - 1)));
        rhs = std::max(rhs, sp.q_star(w, word.back(), sp.steps_for_phase(d - 1)));
      }
      worst.add(lhs, scale * rhs);
    }
    worst.emit(rec, "max-relationship", tol);
  });
}

void suite_lemma_qstar(const SuiteConfig& config, VerificationReport& report) {
  for_each_env(config, report, "lemma-qstar", 30, value_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    const int horizon = horizon_for_config(env, config.gamma, config.tol);
    Planner planner(env, config.gamma, horizon);
    SeqPlanner sp(seq, config.gamma, horizon);
    const int d = seq.depth();
    const double tol = 2.0 * tail_bound(config.gamma, env.reward_range(), horizon) + kFloatSlack;
    std::vector<Worst> worst(static_cast<std::size_t>(d));
    for (const auto& h : histories_up_to(env, value_depth(config))) {
      const SeqCursor c = seq.cursor(seq.sequentialize(h));
      const auto q = planner.q_row(h);
      for (int i = 1; i <= d; ++i) {
        for (const auto& prefix : words_of_length(seq.base(), i)) {
          const std::span<const int> full(prefix);
          const SeqCursor w = weld(seq, c, full.first(static_cast<std::size_t>(i - 1)));
          const double lhs = sp.q_star(w, prefix.back(), sp.steps_for_phase(i - 1));
          double best = -INFINITY;
          for (int a : p.codec->restricted_actions(full)) best = std::max(best, q[static_cast<std::size_t>(a)]);
          worst[static_cast<std::size_t>(i - 1)].add(lhs, std::pow(sp.lambda(), d - i) * best);
        }
      }
    }
    for (int i = 1; i <= d; ++i) worst[static_cast<std::size_t>(i - 1)].emit(rec, "x-relationship-i" + std::to_string(i), tol);
  });
}

/// lemma-qpi and eq-vv share their environments and random policies.
void value_policy_suite(const SuiteConfig& config, VerificationReport& report, bool qpi) {
  const std::string suite = qpi ? "lemma-qpi" : "eq-vv";
  const int policies = 20;
  for_each_env(config, report, suite, 30, value_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    const int horizon = horizon_for_config(env, config.gamma, config.tol);
    const int d = seq.depth();
    const double tol = 2.0 * tail_bound(config.gamma, env.reward_range(), horizon) + kFloatSlack;
    const auto hs = histories_up_to(env, value_depth(config));
    std::mt19937_64 rng(splitmix64(config.seed ^ std::hash<std::string>{}(rec.env_id)));
    Worst q_worst, v_worst, star_worst;
    if (!qpi) {
      Planner planner(env, config.gamma, horizon);
      SeqPlanner sp(seq, config.gamma, horizon);
      const double scale = std::pow(sp.lambda(), d - 1);
      for (const auto& h : hs) star_worst.add(sp.v_star(seq.sequentialize(h)), scale * planner.v_star(h));
    }
    for (int k = 0; k < policies; ++k) {
      const int policy_length = static_cast<int>(rng() % 2);
      const PolicySpec seq_policy = random_seq_policy(rng, env, seq, policy_length);
      const PolicySpec lifted = seq.lift_policy(seq_policy);
      SeqPolicyEvaluator sev(seq, seq_policy, config.gamma, horizon);
      PolicyEvaluator ev(env, lifted, config.gamma, horizon);
      const double scale = std::pow(sev.lambda(), d - 1);
      for (const auto& h : hs) {
        const SeqCursor c = seq.cursor(seq.sequentialize(h), policy_length);
        if (qpi) {
          for (int a = 0; a < env.action_count(); ++a) {
            const Codeword& word = p.codec->encode(a);
            const SeqCursor w = weld(seq, c, std::span<const int>(word).first(static_cast<std::size_t>(d - 1)));
            q_worst.add(sev.q_pi(w, word.back(), sev.steps_for_phase(d - 1)), ev.q_pi(h, a));
          }
        } else {
          v_worst.add(sev.v_pi(c, sev.steps_for_phase(0)), scale * ev.v_pi(h));
        }
      }
    }
    if (qpi) {
      q_worst.emit(rec, "qpi-x-relationship", tol);
    } else {
      v_worst.emit(rec, "v-pi", tol);
      star_worst.emit(rec, "v-star", tol);
    }
  });
}

void suite_lemma_qpi(const SuiteConfig& config, VerificationReport& report) { value_policy_suite(config, report, true); }
void suite_eq_vv(const SuiteConfig& config, VerificationReport& report) { value_policy_suite(config, report, false); }

void suite_thm_uplift(const SuiteConfig& config, VerificationReport& report) {
  const double epsilon = config.epsilon > 0.0 ? config.epsilon : 0.2;
  const int depth = config.depth > 0 ? config.depth : 3;
  for_each_env(config, report, "thm-uplift", 10, value_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    const int horizon = horizon_for_config(env, config.gamma, config.tol);
    SeqPlanner sp(seq, config.gamma, horizon);
    const int d = seq.depth();
    const double lambda_scale = std::pow(sp.lambda(), d - 1);
    const double target = lambda_scale * epsilon;
    const auto contexts = env.reachable_contexts();

    const PolicySpec best = greedy_seq_policy(env, seq, sp, false);
    const PolicySpec worst = greedy_seq_policy(env, seq, sp, true);
    auto gap = [&](const PolicySpec& policy) {
      SeqPolicyEvaluator ev(seq, policy, config.gamma, horizon);
      double g = 0.0;
      for (const auto& ctx : contexts) {
        const SeqCursor c{ctx, ctx, ctx.last().obs, {}};
        g = std::max(g, sp.v_star(c, sp.steps_for_phase(0)) - ev.v_pi(c, sp.steps_for_phase(0)));
      }
      return g;
    };
    // Mix toward the worst policy until the gap at complete histories reaches the target.
    double lo = 0.0, hi = 1.0;
    if (gap(worst) <= target) {
      lo = 1.0;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mix_policies(best, worst, mid)) <= target ? lo : hi) = mid;
      }
    }
    const PolicySpec chosen = mix_policies(best, worst, lo);
    const double achieved = gap(chosen);
    const PolicySpec lifted = seq.lift_policy(chosen);
    const LossReport loss = policy_loss(env, lifted, config.gamma, horizon, depth);

    std::ostringstream note;
    note << "mix " << format_double(lo) << ", d " << d;
    rec.at_most("seq-gap", achieved, target, 1e-12, note.str());
    rec.at_most("lifted-loss", loss.loss, epsilon, loss.slack + kFloatSlack, "over " + std::to_string(loss.histories) + " histories");
    rec.at_most("eps-prime-forms", config.gamma * epsilon, target, 1e-15,
                "gamma*eps <= lambda^(d-1)*eps; the lambda form is the binding hypothesis");
  });
}

void suite_bounds_arith(const SuiteConfig&, VerificationReport& report) {
  Recorder rec{report, "bounds-arith", "-"};
  auto exact = [&](const std::string& check, const Rational& lhs, const Rational& rhs) {
    rec.add(check, to_double(lhs), to_double(rhs), std::abs(to_double(lhs - rhs)), 0.0, lhs == rhs,
            format_rational(lhs) + " vs " + format_rational(rhs));
  };
  const Rational eps(1, 10), gamma(1, 2);
  try {
    exact("plain(0.1,0.5,4)", bound_plain(eps, gamma, 4), Rational(655'360'000));
    exact("binary(0.1,0.5,4)", bound_binary(eps, gamma, 4).binary_bound, Rational(74'649'600));
    exact("plain(1,0,2)", bound_plain(1, 0, 2), 4);
    exact("plain(1,0,2,R=2)", bound_plain(1, 0, 2, 2), 16);
    for (int k = 1; k <= 9; ++k) {
      const Rational g(k, 10);
      exact("agreement-gamma=" + format_rational(g), bound_binary(eps, g, 2).binary_asymptotic_bound, bound_plain(eps, g, 2));
    }
    for (int k = 1; k <= 9; ++k) {
      const Rational g(k, 10);
      for (int d = 1; d <= 20; ++d) {
        const double one_minus_lambda = 1.0 - lambda_of(to_double(g), d);
        const Rational cert = (1 - g) / (d + 1 - g);
        rec.at_least("one-minus-lambda-gamma=" + format_rational(g) + "-d=" + std::to_string(d), one_minus_lambda, to_double(cert), 0.0);
      }
    }
    for (int actions : {2, 3, 4, 8, 16, 1024}) {
      for (int k = 1; k <= 9; k += 4) {
        const BoundReport b = bound_binary(eps, Rational(k, 10), actions);
        const std::string tag = "A=" + std::to_string(actions) + "-gamma=" + format_rational(b.gamma);
        rec.at_most("direct<=proof-" + tag, b.binary_direct_bound, to_double(b.binary_proof_bound), 1e-9 * to_double(b.binary_proof_bound));
        rec.add("proof<=statement-" + tag, to_double(b.binary_proof_bound), to_double(b.binary_bound),
                std::abs(to_double(b.binary_bound - b.binary_proof_bound)), 0.0, b.binary_proof_bound <= b.binary_bound);
      }
    }
  } catch (const Error& e) {
    rec.error(e);
  }
}

void suite_esa_census(const SuiteConfig& config, VerificationReport& report) {
  const int depth = config.depth > 0 ? config.depth : 3;
  const double delta = kCensusDelta;
  const Rational delta_q(delta);
  const Rational gamma_q(config.gamma);
  const std::uint64_t seed = splitmix64(config.seed);
  const int m = config.m.value_or(1);
  int first_bin = -1, last_plain = -1;
  for (int actions : {2, 4, 8, 16}) {
    Recorder rec{report, "esa-census", "A=" + std::to_string(actions)};
    try {
      const ValidatedEnvironment env(scaling_env(seed, actions, m), config.numeric);
      const int horizon = horizon_for_config(env, config.gamma, config.tol);
      const ActionCodec codec = ActionCodec::index_order(2, actions);
      const SequentializedEnvironment seq(env, codec);
      EsaProcess plain = EsaProcess::plain(env, config.gamma, horizon);
      EsaProcess bin = EsaProcess::binarized(seq, config.gamma, horizon);
      const AbstractionMap plain_map = build_abstraction(plain, delta, depth);
      const AbstractionMap bin_map = build_abstraction(bin, delta, depth);
      const int pc = plain_map.occupied_cells();
      const int bc = bin_map.occupied_cells();
      if (first_bin < 0) first_bin = bc;
      std::ostringstream note;
      note << "complete cells " << bin_map.complete_cells << ", partial cells " << bin_map.partial_cells << ", histories "
           << format_double(bin_map.complete_histories) << "+" << format_double(bin_map.partial_histories);
      rec.at_most("bin-within-bound", bc, to_double(bound_binary(delta_q, gamma_q, actions).binary_bound), 0.0, note.str());
      rec.at_most("bin-within-2x", bc, 2.0 * first_bin, 0.0);
      rec.at_most("plain-within-bound", pc, to_double(bound_plain(delta_q, gamma_q, actions)), 0.0);
      if (last_plain >= 0) rec.at_least("plain-monotone", pc, last_plain, 0.0);
      rec.at_most("plain-q-uniform", plain_map.max_cell_spread(), delta, 0.0);
      rec.at_most("bin-q-uniform", bin_map.max_cell_spread(), delta, 0.0);
      last_plain = pc;
    } catch (const Error& e) {
      rec.error(e);
    }
  }
}

void suite_esa_endtoend(const SuiteConfig& config, VerificationReport& report) {
  const double epsilon = config.epsilon > 0.0 ? config.epsilon : 0.3;
  const int depth = config.depth > 0 ? config.depth : 3;
  for_each_env(config, report, "esa-endtoend", 5, small_draw, [&](Recorder& rec, const EnvironmentSpec& spec) {
    Prepared p(spec, config.numeric);
    const auto& env = *p.env;
    const auto& seq = *p.seq;
    const int horizon = horizon_for_config(env, config.gamma, config.tol);
    const int d = seq.depth();
    const double lambda = lambda_of(config.gamma, d);
    const double eps_prime = std::pow(lambda, d - 1) * epsilon;
    for (double scale : {0.25, 0.5, 1.0}) {
      const double delta = eps_prime * (1.0 - lambda) * (1.0 - lambda) * scale;
      EsaProcess process = EsaProcess::binarized(seq, config.gamma, horizon);
      const AbstractionMap map = build_abstraction(process, delta, depth);
      const SurrogateMDP mdp = build_surrogate(process, map, Weighting::Visit);
      const SurrogateSolution sol = solve_surrogate(mdp, lambda, 1e-10);
      const PolicySpec lifted = seq.lift_policy(compose_policy(process, map, sol));
      const LossReport loss = policy_loss(env, lifted, config.gamma, horizon, depth);
      std::ostringstream note;
      note << "delta " << format_double(delta) << ", cells " << map.occupied_cells();
      rec.at_most("loss-scale=" + format_double(scale), loss.loss, epsilon, loss.slack + kFloatSlack, note.str());
    }
  });
}

const std::vector<std::pair<std::string, SuiteFn>>& suite_table() {
  static const std::vector<std::pair<std::string, SuiteFn>> table = {
      {"prop-seq-process", suite_prop_seq_process}, {"thm-markov", suite_thm_markov}, {"prop-qmax", suite_prop_qmax},
      {"lemma-qstar", suite_lemma_qstar},           {"lemma-qpi", suite_lemma_qpi},   {"eq-vv", suite_eq_vv},
      {"thm-uplift", suite_thm_uplift},             {"bounds-arith", suite_bounds_arith},
      {"esa-census", suite_esa_census},             {"esa-endtoend", suite_esa_endtoend},
  };
  return table;
}

std::string result_word(const CheckRecord& r) { return r.skipped ? "skip" : (r.pass ? "pass" : "fail"); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

EnvironmentSpec random_env(std::uint64_t seed, EnvSizes sizes, int m, double sparsity) {
  if (sizes.obs < 1 || sizes.obs > 4 || sizes.rewards < 1 || sizes.rewards > 4 || sizes.actions < 1 || sizes.actions > 16 || m < 0 || m > 2)
    throw InvalidSizes("random environments need 1 <= |O| <= 4, 1 <= |R| <= 4, 1 <= |A| <= 16, 0 <= m <= 2");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw InvalidSizes("sparsity must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  EnvironmentSpec spec;
  spec.obs_count = sizes.obs;
  spec.context_length = m;
  for (int k = 0; k < sizes.rewards; ++k) spec.rewards.push_back(sizes.rewards == 1 ? Rational(0) : Rational(k, sizes.rewards - 1));
  for (auto& r : spec.rewards) r.canonicalize();
  for (int a = 0; a < sizes.actions; ++a) spec.actions.push_back({"a" + std::to_string(a), std::nullopt});
  const int n = sizes.obs * sizes.rewards;
  spec.initial = random_row(rng, n, sparsity);
  fill_table(spec, [&](const Context&, int) { return random_row(rng, n, sparsity); });
  return spec;
}

EnvironmentSpec scaling_env(std::uint64_t seed, int action_count, int m) {
  if (action_count < 2) throw InvalidSizes("the scaling family needs at least two actions");
  const EnvironmentSpec base = random_env(seed, EnvSizes{2, 3, 2}, m, 0.3);
  EnvironmentSpec spec = base;
  spec.actions.clear();
  spec.table.clear();
  for (int a = 0; a < action_count; ++a) spec.actions.push_back({"a" + std::to_string(a), std::nullopt});
  std::vector<int> kind(static_cast<std::size_t>(action_count));
  for (int a = 0; a < action_count; ++a) kind[static_cast<std::size_t>(a)] = a % 2;
  fill_table(spec, [&](const Context& ctx, int a) { return base.table.at(table_key(ctx.mapped(kind), a % 2)); });
  return spec;
}

PolicySpec parse_policy(std::string_view json_text) {
  PolicySpec policy;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    const std::string mode = doc.value("mode", std::string("original"));
    if (mode == "original")
      policy.mode = HistoryMode::Original;
    else if (mode == "sequentialized")
      policy.mode = HistoryMode::Sequentialized;
    else
      throw ParseError("policy mode must be 'original' or 'sequentialized'");
    policy.context_length = doc.value("context_length", 0);
    for (const auto& [key, row] : doc.at("rows").items()) {
      std::vector<double> values;
      for (const auto& v : row) values.push_back(v.is_string() ? to_double(parse_rational(v.get<std::string>())) : v.get<double>());
      policy.rows.emplace(key, std::move(values));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("policy: ") + e.what());
  }
  return policy;
}

PolicySpec load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_policy(text.str());
}

std::string dump_policy(const PolicySpec& policy) {
  json doc;
  doc["mode"] = policy.mode == HistoryMode::Original ? "original" : "sequentialized";
  doc["context_length"] = policy.context_length;
  doc["rows"] = json::object();
  for (const auto& [key, row] : policy.rows) doc["rows"][key] = row;
  return doc.dump(2) + "\n";
}

std::string env_fingerprint(const EnvironmentSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump_environment(spec)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex(h, 8);
}

std::size_t VerificationReport::passed() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.pass && !r.skipped; }));
}

std::size_t VerificationReport::failed() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.pass; }));
}

std::size_t VerificationReport::skipped() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.skipped; }));
}

void VerificationReport::append(const VerificationReport& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  runtime_seconds += other.runtime_seconds;
}

const std::vector<std::string>& suite_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& [id, fn] : suite_table()) out.push_back(id);
    return out;
  }();
  return ids;
}

VerificationReport run_suite(const SuiteConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  VerificationReport report;
  bool found = false;
  for (const auto& [id, fn] : suite_table()) {
    if (config.suite != "all" && config.suite != id) continue;
    found = true;
    fn(config, report);
  }
  if (!found) throw InvalidParam("unknown suite '" + config.suite + "'");
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "md" || name == "markdown") return ReportFormat::Markdown;
  throw InvalidParam("report format must be json, csv or markdown");
}

std::string emit_report(const VerificationReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::Json: {
      json doc;
      doc["summary"] = {{"records", report.records.size()}, {"passed", report.passed()}, {"failed", report.failed()}, {"skipped", report.skipped()}};
      doc["records"] = json::array();
      for (const auto& r : report.records) {
        doc["records"].push_back({{"suite", r.suite},
                                  {"env_id", r.env_id},
                                  {"check_id", r.check_id},
                                  {"lhs", r.lhs},
                                  {"rhs", r.rhs},
                                  {"abs_diff", r.abs_diff},
                                  {"tol", r.tol},
                                  {"pass", r.pass},
                                  {"skipped", r.skipped},
                                  {"note", r.note}});
      }
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::Csv:
      out << "suite,env_id,check_id,lhs,rhs,abs_diff,tol,pass\n";
      for (const auto& r : report.records)
        out << csv_field(r.suite) << ',' << csv_field(r.env_id) << ',' << csv_field(r.check_id) << ',' << format_double(r.lhs) << ','
            << format_double(r.rhs) << ',' << format_double(r.abs_diff) << ',' << format_double(r.tol) << ',' << result_word(r) << '\n';
      break;
    case ReportFormat::Markdown:
      out << "| suite | env | check | lhs | rhs | abs diff | tol | result |\n";
      out << "|---|---|---|---|---|---|---|---|\n";
      for (const auto& r : report.records)
        out << "| " << r.suite << " | " << r.env_id << " | " << r.check_id << " | " << format_double(r.lhs) << " | " << format_double(r.rhs)
            << " | " << format_double(r.abs_diff) << " | " << format_double(r.tol) << " | " << result_word(r) << " |\n";
      out << "\n" << report.passed() << " passed, " << report.failed() << " failed, " << report.skipped() << " skipped\n";
      break;
  }
  return out.str();
}

void write_report(const VerificationReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << emit_report(report, format);
  if (!out) throw IoError("write to " + path + " failed");
}

}  // namespace seqrl
