#include "seqrl/esa.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seqrl/errors.hpp"

namespace seqrl {

namespace {

Rational rpow(const Rational& base, int exp) {
  Rational out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

Rational rceil(const Rational& value) {
  mpz_class out;
  mpz_cdiv_q(out.get_mpz_t(), value.get_num_mpz_t(), value.get_den_mpz_t());
  return Rational(out);
}

void check_bound_params(const Rational& epsilon, const Rational& gamma, int action_count, const Rational& range) {
  if (epsilon <= 0) throw InvalidParam("epsilon must be positive");
  if (gamma < 0 || gamma >= 1) throw InvalidParam("gamma must lie in [0, 1)");
  if (action_count < 2) throw InvalidParam("bounds need at least two actions");
  if (range <= 0) throw InvalidParam("reward range must be positive");
}

int padded_depth(int action_count) {
  int d = 1;
  while ((1LL << d) < action_count) ++d;
  return d;
}

}  // namespace

std::string to_string(AbstractionMode mode) { return mode == AbstractionMode::Plain ? "plain" : "bin"; }

std::string to_string(Weighting weighting) { return weighting == Weighting::Uniform ? "uniform" : "visit"; }

EsaProcess::EsaProcess(const ValidatedEnvironment& env, AbstractionMode mode) : env_(env), mode_(mode) {}

EsaProcess EsaProcess::plain(const ValidatedEnvironment& env, double gamma, int horizon) {
  EsaProcess p(env, AbstractionMode::Plain);
  p.width_ = env.action_count();
  p.horizon_ = horizon;
  p.discount_ = gamma;
  p.planner_ = std::make_unique<Planner>(env, gamma, horizon);
  return p;
}

EsaProcess EsaProcess::binarized(const SequentializedEnvironment& seq, double gamma, int horizon) {
  EsaProcess p(seq.env(), AbstractionMode::Binarized);
  p.seq_ = &seq;
  p.width_ = seq.base();
  p.depth_ = seq.depth();
  p.horizon_ = horizon;
  p.seq_planner_ = std::make_unique<SeqPlanner>(seq, gamma, horizon);
  p.discount_ = p.seq_planner_->lambda();
  return p;
}

double EsaProcess::tail() const {
  return mode_ == AbstractionMode::Plain ? planner_->tail() : seq_planner_->tail(depth_ - 1);
}

std::string EsaProcess::add(const Context& ctx) {
  std::string key = ctx.key();
  contexts_.try_emplace(key, ctx);
  return key;
}

std::string EsaProcess::add(const SeqCursor& cursor) {
  std::string key = cursor.state_key();
  cursors_.try_emplace(key, cursor);
  return key;
}

const SeqCursor& EsaProcess::cursor(const std::string& state) const { return cursors_.at(state); }

const Context& EsaProcess::context(const std::string& state) const { return contexts_.at(state); }

std::vector<std::pair<std::string, double>> EsaProcess::initial() {
  std::vector<std::pair<std::string, double>> out;
  for (int i = 0; i < env_.outcome_count(); ++i) {
    const double p = env_.initial_d()[static_cast<std::size_t>(i)];
    if (p <= 0.0) continue;
    const Percept first = env_.outcome(i);
    if (mode_ == AbstractionMode::Plain)
      out.emplace_back(add(env_.initial_context(first)), p);
    else
      out.emplace_back(add(seq_->start(first, env_.context_length())), p);
  }
  return out;
}

std::vector<EsaProcess::Edge> EsaProcess::edges(const std::string& state, int u) {
  std::vector<Edge> out;
  if (mode_ == AbstractionMode::Plain) {
    const Context ctx = contexts_.at(state);
    const RowD& row = env_.row_d(ctx, u);
    for (int i = 0; i < env_.outcome_count(); ++i) {
      const double p = row[static_cast<std::size_t>(i)];
      if (p <= 0.0) continue;
      const Percept next = env_.outcome(i);
      out.push_back({p, env_.reward_value(next.reward), add(ctx.advanced(u, next))});
    }
    return out;
  }
  const SeqCursor c = cursors_.at(state);
  for (const auto& [percept, p] : seq_->step_outcomes(c, u))
    out.push_back({p, env_.reward_value(percept.reward), add(seq_->advance(c, u, percept))});
  return out;
}

std::vector<double> EsaProcess::q(const std::string& state) {
  if (auto it = q_cache_.find(state); it != q_cache_.end()) return it->second;
  std::vector<double> out;
  if (mode_ == AbstractionMode::Plain) {
    out = planner_->q_row(contexts_.at(state), horizon_);
  } else {
    const SeqCursor& c = cursors_.at(state);
    const int steps = seq_planner_->steps_for_phase(static_cast<int>(c.pending.size()));
    for (int x = 0; x < width_; ++x) out.push_back(seq_planner_->q_star(c, x, steps));
  }
  q_cache_.emplace(state, out);
  return out;
}

bool EsaProcess::complete(const std::string& state) const {
  return mode_ == AbstractionMode::Plain || cursors_.at(state).pending.empty();
}

Cell cell_of(const std::vector<double>& q, double delta) {
  if (!(delta > 0.0)) throw InvalidParam("grid width must be positive");
  Cell out;
  out.reserve(q.size());
  for (double v : q) out.push_back(static_cast<long long>(std::floor(v / delta)));
  return out;
}

int AbstractionMap::lookup(EsaProcess& process, const std::string& state) const {
  if (auto it = member_index.find(state); it != member_index.end()) return members[static_cast<std::size_t>(it->second)].cell;
  const auto it = cell_index.find(cell_of(process.q(state), delta));
  return it == cell_index.end() ? -1 : it->second;
}

double AbstractionMap::max_cell_spread() const {
  std::vector<std::vector<double>> lo(cells.size()), hi(cells.size());
  for (const auto& m : members) {
    auto& l = lo[static_cast<std::size_t>(m.cell)];
    auto& h = hi[static_cast<std::size_t>(m.cell)];
    if (l.empty()) {
      l = m.q;
      h = m.q;
      continue;
    }
    for (std::size_t i = 0; i < m.q.size(); ++i) {
      l[i] = std::min(l[i], m.q[i]);
      h[i] = std::max(h[i], m.q[i]);
    }
  }
  double spread = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t i = 0; i < lo[c].size(); ++i) spread = std::max(spread, hi[c][i] - lo[c][i]);
  return spread;
}

AbstractionMap build_abstraction(EsaProcess& process, double delta, int depth, double cap) {
  if (!(delta > 0.0)) throw InvalidParam("grid width must be positive");
  if (depth < 0) throw InvalidParam("enumeration depth must be non-negative");
  AbstractionMap map;
  map.mode = process.mode();
  map.delta = delta;
  map.depth = depth;

  struct Mass {
    double histories = 0.0;
    double visit = 0.0;
  };
  auto record = [&](const std::string& state, const Mass& mass) {
    auto [it, fresh] = map.member_index.try_emplace(state, static_cast<int>(map.members.size()));
    if (fresh) {
      AbstractionMap::Member m;
      m.state = state;
      m.complete = process.complete(state);
      map.members.push_back(std::move(m));
    }
    auto& m = map.members[static_cast<std::size_t>(it->second)];
    m.histories += mass.histories;
    m.visit += mass.visit;
    (m.complete ? map.complete_histories : map.partial_histories) += mass.histories;
    if (map.complete_histories + map.partial_histories > cap)
      throw BudgetExceeded("abstraction enumeration passed " + format_double(cap) + " histories");
  };

  // Histories that end in the same state are interchangeable, so each level
  // is carried as state -> (history count, visitation mass).
  std::map<std::string, Mass> frontier;
  for (const auto& [state, p] : process.initial()) {
    auto& m = frontier[state];
    m.histories += 1.0;
    m.visit += p;
  }
  const int levels = depth * process.depth();
  const double pick = 1.0 / static_cast<double>(process.width());
  for (int level = 0;; ++level) {
    for (const auto& [state, mass] : frontier) record(state, mass);
    if (level == levels) break;
    std::map<std::string, Mass> next;
    for (const auto& [state, mass] : frontier) {
      for (int u = 0; u < process.width(); ++u) {
        for (const auto& e : process.edges(state, u)) {
          auto& m = next[e.next];
          m.histories += mass.histories;
          m.visit += mass.visit * pick * e.p;
        }
      }
    }
    frontier = std::move(next);
  }

  std::set<int> complete_cells, partial_cells;
  for (auto& m : map.members) {
    m.q = process.q(m.state);
    Cell cell = cell_of(m.q, delta);
    auto [it, fresh] = map.cell_index.try_emplace(cell, static_cast<int>(map.cells.size()));
    if (fresh) map.cells.push_back(std::move(cell));
    m.cell = it->second;
    (m.complete ? complete_cells : partial_cells).insert(m.cell);
  }
  map.complete_cells = static_cast<int>(complete_cells.size());
  map.partial_cells = static_cast<int>(partial_cells.size());
  return map;
}

SurrogateMDP build_surrogate(EsaProcess& process, const AbstractionMap& map, Weighting weighting) {
  SurrogateMDP mdp;
  const int n = map.occupied_cells();
  mdp.state_count = n + 1;
  mdp.sink = n;
  mdp.width = process.width();
  const auto width = static_cast<std::size_t>(mdp.width);
  mdp.transition.assign(static_cast<std::size_t>(mdp.state_count),
                        std::vector<std::vector<double>>(width, std::vector<double>(static_cast<std::size_t>(mdp.state_count), 0.0)));
  mdp.reward.assign(static_cast<std::size_t>(mdp.state_count), std::vector<double>(width, 0.0));

  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  auto weight = [&](const AbstractionMap::Member& m) { return weighting == Weighting::Uniform ? m.histories : m.visit; };
  for (const auto& m : map.members) total[static_cast<std::size_t>(m.cell)] += weight(m);
  for (int s = 0; s < n; ++s)
    if (!(total[static_cast<std::size_t>(s)] > 0.0)) throw EmptyCell("cell " + std::to_string(s) + " carries no weight");

  for (const auto& m : map.members) {
    const auto s = static_cast<std::size_t>(m.cell);
    const double w = weight(m) / total[s];
    if (w == 0.0) continue;
    for (std::size_t u = 0; u < width; ++u) {
      for (const auto& e : process.edges(m.state, static_cast<int>(u))) {
        const int next = map.lookup(process, e.next);
        mdp.transition[s][u][static_cast<std::size_t>(next < 0 ? mdp.sink : next)] += w * e.p;
        mdp.reward[s][u] += w * e.p * e.r;
      }
    }
  }
  for (std::size_t u = 0; u < width; ++u) mdp.transition[static_cast<std::size_t>(mdp.sink)][u][static_cast<std::size_t>(mdp.sink)] = 1.0;
  return mdp;
}

SurrogateSolution solve_surrogate(const SurrogateMDP& mdp, double disc, double tol) {
  if (!(disc >= 0.0 && disc < 1.0)) throw InvalidParam("discount must lie in [0, 1)");
  if (!(tol > 0.0)) throw InvalidParam("tolerance must be positive");
  const auto n = static_cast<std::size_t>(mdp.state_count);
  const auto width = static_cast<std::size_t>(mdp.width);
  SurrogateSolution sol;
  sol.values.assign(n, 0.0);
  sol.q.assign(n, std::vector<double>(width, 0.0));
  while (true) {
    ++sol.iterations;
    double residual = 0.0;
    std::vector<double> next(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t u = 0; u < width; ++u) {
        double q = mdp.reward[s][u];
        for (std::size_t t = 0; t < n; ++t) q += disc * mdp.transition[s][u][t] * sol.values[t];
        sol.q[s][u] = q;
      }
      next[s] = *std::max_element(sol.q[s].begin(), sol.q[s].end());
      residual = std::max(residual, std::abs(next[s] - sol.values[s]));
    }
    sol.values = std::move(next);
    if (residual <= tol * (1.0 - disc) || sol.iterations >= 1'000'000) break;
  }
  sol.policy.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    double best = sol.q[s][0];
    for (std::size_t u = 1; u < width; ++u) {
      if (sol.q[s][u] > best + kTieTolerance * (1.0 + std::abs(best))) {
        best = sol.q[s][u];
        sol.policy[s] = static_cast<int>(u);
      }
    }
  }
  return sol;
}

PolicySpec compose_policy(EsaProcess& process, const AbstractionMap& map, const SurrogateSolution& solution) {
  const ValidatedEnvironment& env = process.env();
  PolicySpec policy;
  policy.context_length = env.context_length();
  const auto width = static_cast<std::size_t>(process.width());
  auto choose = [&](const std::string& state) {
    const int cell = map.lookup(process, state);
    std::vector<double> row(width, 0.0);
    row[static_cast<std::size_t>(cell < 0 ? 0 : solution.policy[static_cast<std::size_t>(cell)])] = 1.0;
    return row;
  };
  const auto contexts = env.reachable_contexts();
  if (process.mode() == AbstractionMode::Plain) {
    policy.mode = HistoryMode::Original;
    for (const auto& ctx : contexts) policy.rows.emplace(ctx.key(), choose(process.add(ctx)));
    return policy;
  }
  policy.mode = HistoryMode::Sequentialized;
  for (const auto& ctx : contexts) {
    std::vector<Codeword> prefixes{{}};
    for (int level = 0; level < process.depth(); ++level) {
      std::vector<Codeword> longer;
      for (const auto& prefix : prefixes) {
        const SeqCursor c{ctx, ctx, ctx.last().obs, prefix};
        policy.rows.emplace(c.policy_key(), choose(process.add(c)));
        for (int x = 0; x < process.width(); ++x) {
          longer.push_back(prefix);
          longer.back().push_back(x);
        }
      }
      prefixes = std::move(longer);
    }
  }
  return policy;
}

LossReport policy_loss(const ValidatedEnvironment& env, const PolicySpec& policy, double gamma, int horizon, int depth) {
  if (policy.mode != HistoryMode::Original) throw InvalidParam("policy_loss expects an original-mode policy");
  Planner planner(env, gamma, horizon);
  PolicyEvaluator evaluator(env, policy, gamma, horizon);
  LossReport report;
  report.slack = planner.tail() + evaluator.tail();

  struct Node {
    Context env_ctx;
    Context policy_ctx;
    std::size_t count;
  };
  std::map<std::string, Node> frontier;
  for (int i = 0; i < env.outcome_count(); ++i) {
    if (env.initial()[static_cast<std::size_t>(i)] <= 0) continue;
    const Percept first = env.outcome(i);
    Node node{env.initial_context(first), Context::initial(first, policy.context_length), 1};
    frontier.emplace(node.env_ctx.key() + "|" + node.policy_ctx.key(), node);
  }
  std::set<std::string> seen;
  for (int level = 0;; ++level) {
    for (const auto& [key, node] : frontier) {
      report.histories += node.count;
      if (!seen.insert(key).second) continue;
      const double gap = planner.v_star(node.env_ctx, horizon) - evaluator.v_pi(node.env_ctx, node.policy_ctx, horizon);
      report.loss = std::max(report.loss, gap);
    }
    if (level == depth) break;
    std::map<std::string, Node> next;
    for (const auto& [key, node] : frontier) {
      for (int a = 0; a < env.action_count(); ++a) {
        const RowD& row = env.row_d(node.env_ctx, a);
        for (int i = 0; i < env.outcome_count(); ++i) {
          if (row[static_cast<std::size_t>(i)] <= 0.0) continue;
          const Percept p = env.outcome(i);
          Node child{node.env_ctx.advanced(a, p), node.policy_ctx.advanced(a, p), node.count};
          auto [it, fresh] = next.try_emplace(child.env_ctx.key() + "|" + child.policy_ctx.key(), child);
          if (!fresh) it->second.count += node.count;
        }
      }
    }
    frontier = std::move(next);
  }
  return report;
}

Rational bound_plain(const Rational& epsilon, const Rational& gamma, int action_count, const Rational& range) {
  check_bound_params(epsilon, gamma, action_count, range);
  const Rational base = 2 * range / (epsilon * rpow(1 - gamma, 3));
  return rpow(base, action_count);
}

BoundReport bound_binary(const Rational& epsilon, const Rational& gamma, int action_count, const Rational& range) {
  check_bound_params(epsilon, gamma, action_count, range);
  if (gamma == 0) throw InvalidParam("the binary bound divides by gamma^2 and is undefined at gamma = 0");
  BoundReport r;
  r.epsilon = epsilon;
  r.gamma = gamma;
  r.reward_range = range;
  r.action_count = action_count;
  r.d = padded_depth(action_count);
  r.padded_actions = 1 << r.d;
  const Rational d = r.d;
  const Rational scale = 4 * range * range;
  const Rational delta6 = rpow(1 - gamma, 6);
  r.plain_bound = bound_plain(epsilon, gamma, action_count, range);
  r.binary_bound = scale * rpow(rceil(1 - gamma + d), 6) / (gamma * gamma * epsilon * epsilon * delta6);
  r.binary_asymptotic_bound = scale * rpow(d, 6) / (epsilon * epsilon * delta6);
  r.binary_proof_bound = scale * rpow(1 - gamma + d, 6) / (gamma * gamma * epsilon * epsilon * delta6);
  r.lambda = lambda_of(to_double(gamma), r.d);
  r.one_minus_lambda = 1.0 - r.lambda;
  r.lambda_certificate = (1 - gamma) / (d + 1 - gamma);
  r.eps_prime_lambda = std::pow(r.lambda, r.d - 1) * to_double(epsilon);
  r.eps_prime_gamma = gamma * epsilon;
  r.binary_direct_bound =
      to_double(scale) / (r.eps_prime_lambda * r.eps_prime_lambda * std::pow(r.one_minus_lambda, 6));
  return r;
}

}  // namespace seqrl
