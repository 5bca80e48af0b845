// seqrl: command-line front end. Exit codes: 0 pass, 1 check failure, 2 usage error.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqrl/codec.hpp"
#include "seqrl/environment.hpp"
#include "seqrl/errors.hpp"
#include "seqrl/esa.hpp"
#include "seqrl/harness.hpp"
#include "seqrl/planner.hpp"
#include "seqrl/seqenv.hpp"

using namespace seqrl;

namespace {

constexpr int kUsage = 2;

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

struct Loaded {
  std::unique_ptr<ValidatedEnvironment> env;
  std::unique_ptr<ActionCodec> codec;
  std::unique_ptr<SequentializedEnvironment> seq;
};

Loaded load(const std::string& path, int base, std::optional<std::string> codec_path, SeqOptions options) {
  Loaded l;
  l.env = std::make_unique<ValidatedEnvironment>(pad_environment(load_environment(path), base), numeric_mode_from_env());
  if (codec_path) {
    std::ifstream in(*codec_path);
    if (!in) throw IoError("cannot read " + *codec_path);
    std::ostringstream text;
    text << in.rdbuf();
    l.codec = std::make_unique<ActionCodec>(ActionCodec::parse(text.str(), l.env->spec().actions, base));
  } else {
    l.codec = std::make_unique<ActionCodec>(ActionCodec::index_order(base, l.env->action_count()));
  }
  l.seq = std::make_unique<SequentializedEnvironment>(*l.env, *l.codec, options);
  return l;
}

struct SolveArgs {
  std::string env, mode = "orig", policy, out;
  double gamma = 0.5, tol = 1e-6;
  int depth = 2, base = 2;
};

int cmd_solve(const SolveArgs& a) {
  const SeqOptions options{a.mode == "aug" ? FillerMode::Augmented : FillerMode::RepeatLast, 0};
  Loaded l = load(a.env, a.base, std::nullopt, options);
  const auto& env = *l.env;
  const int horizon = horizon_for(a.gamma, std::max(env.reward_range(), 1e-300), a.tol);
  std::optional<PolicySpec> policy;
  if (!a.policy.empty()) policy = load_policy(a.policy);
  std::ostringstream out;
  if (a.mode == "orig") {
    out << "history,action,value\n";
    Planner planner(env, a.gamma, horizon);
    std::unique_ptr<PolicyEvaluator> ev;
    if (policy) {
      validate_policy(*policy, env.action_count());
      ev = std::make_unique<PolicyEvaluator>(env, *policy, a.gamma, horizon);
    }
    for (int k = 0; k <= a.depth; ++k)
      for (const auto& h : enumerate_histories(env, k))
        for (int act = 0; act < env.action_count(); ++act)
          out << '"' << h.key() << "\"," << env.spec().actions[static_cast<std::size_t>(act)].name << ','
              << format_double(ev ? ev->q_pi(h, act) : planner.q_star(h, act)) << '\n';
  } else {
    out << "history,symbol,value\n";
    const auto& seq = *l.seq;
    SeqPlanner planner(seq, a.gamma, horizon);
    std::unique_ptr<SeqPolicyEvaluator> ev;
    if (policy) {
      validate_policy(*policy, seq.base());
      ev = std::make_unique<SeqPolicyEvaluator>(seq, *policy, a.gamma, horizon);
    }
    for (int k = 0; k <= a.depth * seq.depth(); ++k)
      for (const auto& tau : enumerate_seq_histories(seq, k))
        for (int x = 0; x < seq.base(); ++x)
          out << '"' << tau.key() << "\"," << x << ',' << format_double(ev ? ev->q_pi(tau, x) : planner.q_star(tau, x)) << '\n';
  }
  write_output(out.str(), a.out);
  return 0;
}

struct MockArgs {
  std::string env, symbols, filler = "repeat", codec = "default", out;
  std::uint64_t seed = 7;
  int base = 2, dummy = 0;
};

int cmd_mock(const MockArgs& a) {
  SeqOptions options;
  if (a.filler == "dummy") options = {FillerMode::Dummy, a.dummy};
  if (a.filler == "aug") options = {FillerMode::Augmented, 0};
  Loaded l = load(a.env, a.base, a.codec.empty() || a.codec == "default" ? std::nullopt : std::optional<std::string>(a.codec), options);
  MockSession session(*l.seq, a.seed);
  for (int x : parse_codeword(a.symbols, a.base)) session.step(x);
  write_output(session.log_csv(), a.out);
  return 0;
}

struct EsaArgs {
  std::string env, mode = "bin", weighting = "visit", out;
  double delta = 0.1, gamma = 0.5, tol = 1e-6;
  int depth = 3;
};

int cmd_esa(const EsaArgs& a) {
  Loaded l = load(a.env, 2, std::nullopt, {});
  const auto& env = *l.env;
  const int horizon = horizon_for(a.gamma, std::max(env.reward_range(), 1e-300), a.tol / 2.0);
  const bool bin = a.mode == "bin";
  EsaProcess process = bin ? EsaProcess::binarized(*l.seq, a.gamma, horizon) : EsaProcess::plain(env, a.gamma, horizon);
  const AbstractionMap map = build_abstraction(process, a.delta, a.depth);
  const Weighting weighting = a.weighting == "uniform" ? Weighting::Uniform : Weighting::Visit;
  const SurrogateMDP mdp = build_surrogate(process, map, weighting);
  const SurrogateSolution sol = solve_surrogate(mdp, process.discount(), 1e-10);
  PolicySpec policy = compose_policy(process, map, sol);
  if (bin) policy = l.seq->lift_policy(policy);
  const LossReport loss = policy_loss(env, policy, a.gamma, horizon, a.depth);

  nlohmann::ordered_json doc;
  doc["mode"] = to_string(process.mode());
  doc["weighting"] = to_string(weighting);
  doc["delta"] = a.delta;
  doc["gamma"] = a.gamma;
  doc["depth"] = a.depth;
  doc["horizon"] = horizon;
  doc["occupied_cells"] = map.occupied_cells();
  doc["complete_cells"] = map.complete_cells;
  doc["partial_cells"] = map.partial_cells;
  doc["complete_histories"] = map.complete_histories;
  doc["partial_histories"] = map.partial_histories;
  doc["max_cell_spread"] = map.max_cell_spread();
  const Rational eps(a.delta), gamma(a.gamma);
  if (env.action_count() >= 2) {
    doc["bound_plain"] = format_decimal(bound_plain(eps, gamma, env.action_count(), Rational(env.reward_range())), 6);
    if (a.gamma > 0.0)
      doc["bound_binary"] = format_decimal(bound_binary(eps, gamma, env.action_count(), Rational(env.reward_range())).binary_bound, 6);
  }
  doc["policy_loss"] = loss.loss;
  doc["loss_slack"] = loss.slack;
  doc["histories"] = loss.histories;
  write_output(doc.dump(2) + "\n", a.out);
  return 0;
}

struct BoundsArgs {
  int actions = 4;
  std::string gamma = "1/2", epsilon = "1/10", range = "1", format = "json";
};

int cmd_bounds(const BoundsArgs& a) {
  const Rational gamma = parse_rational(a.gamma), eps = parse_rational(a.epsilon), range = parse_rational(a.range);
  const BoundReport b = bound_binary(eps, gamma, a.actions, range);
  if (a.format == "table") {
    std::printf("%-26s %s\n", "epsilon", format_rational(b.epsilon).c_str());
    std::printf("%-26s %s\n", "gamma", format_rational(b.gamma).c_str());
    std::printf("%-26s %d (padded %d, d %d)\n", "actions", b.action_count, b.padded_actions, b.d);
    std::printf("%-26s %.17g\n", "lambda", b.lambda);
    std::printf("%-26s %s\n", "plain bound", format_decimal(b.plain_bound, 10).c_str());
    std::printf("%-26s %s\n", "binary bound", format_decimal(b.binary_bound, 10).c_str());
    std::printf("%-26s %s\n", "binary bound (gamma->1)", format_decimal(b.binary_asymptotic_bound, 10).c_str());
    std::printf("%-26s %s\n", "binary bound (proof form)", format_decimal(b.binary_proof_bound, 10).c_str());
    std::printf("%-26s %.10g\n", "binary bound (direct)", b.binary_direct_bound);
    std::printf("%-26s %.17g >= %s\n", "1 - lambda", b.one_minus_lambda, format_decimal(b.lambda_certificate, 17).c_str());
    std::printf("%-26s %.17g\n", "eps' = lambda^(d-1) eps", b.eps_prime_lambda);
    std::printf("%-26s %s\n", "eps' >= gamma eps", format_rational(b.eps_prime_gamma).c_str());
    return 0;
  }
  nlohmann::ordered_json doc;
  doc["epsilon"] = format_rational(b.epsilon);
  doc["gamma"] = format_rational(b.gamma);
  doc["reward_range"] = format_rational(b.reward_range);
  doc["action_count"] = b.action_count;
  doc["padded_actions"] = b.padded_actions;
  doc["d"] = b.d;
  doc["lambda"] = b.lambda;
  doc["plain_bound"] = format_rational(b.plain_bound);
  doc["binary_bound"] = format_rational(b.binary_bound);
  doc["binary_asymptotic_bound"] = format_rational(b.binary_asymptotic_bound);
  doc["binary_proof_bound"] = format_rational(b.binary_proof_bound);
  doc["binary_direct_bound"] = b.binary_direct_bound;
  doc["one_minus_lambda"] = b.one_minus_lambda;
  doc["lambda_certificate"] = format_rational(b.lambda_certificate);
  doc["eps_prime_lambda"] = b.eps_prime_lambda;
  doc["eps_prime_gamma"] = format_rational(b.eps_prime_gamma);
  std::cout << doc.dump(2) << '\n';
  return 0;
}

struct VerifyArgs {
  std::string out, format = "json", env;
  SuiteConfig config;
};

int cmd_verify(VerifyArgs a) {
  if (!a.env.empty()) a.config.env_file = a.env;
  a.config.numeric = numeric_mode_from_env();
  const VerificationReport report = run_suite(a.config);
  const ReportFormat format = parse_report_format(a.format);
  if (a.out.empty())
    std::cout << emit_report(report, format);
  else
    write_report(report, format, a.out);
  std::fprintf(stderr, "%zu passed, %zu failed, %zu skipped in %.1f s\n", report.passed(), report.failed(), report.skipped(),
               report.runtime_seconds);
  return report.ok() ? 0 : 1;
}

struct GenArgs {
  std::uint64_t seed = 7;
  EnvSizes sizes;
  int m = 0;
  double sparsity = 0.0;
  int scaling = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  const EnvironmentSpec spec = a.scaling > 0 ? scaling_env(a.seed, a.scaling, a.m) : random_env(a.seed, a.sizes, a.m, a.sparsity);
  write_output(dump_environment(spec), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action sequentialization toolkit"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Q values on the original, sequentialized or augmented process (CSV)");
  s->add_option("--env", solve.env, "environment JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--mode", solve.mode)->check(CLI::IsMember({"orig", "seq", "aug"}));
  s->add_option("--gamma", solve.gamma)->check(CLI::Range(0.0, 0.999999));
  s->add_option("--tol", solve.tol, "truncation tolerance")->check(CLI::PositiveNumber);
  s->add_option("--policy", solve.policy, "policy JSON; values become Q^pi")->check(CLI::ExistingFile);
  s->add_option("--depth", solve.depth, "history depth in original steps")->check(CLI::NonNegativeNumber);
  s->add_option("--base", solve.base, "decision alphabet size")->check(CLI::Range(2, 10));
  s->add_option("--out", solve.out);

  MockArgs mock;
  auto* m = app.add_subcommand("mock", "Drive the buffering mock with a symbol string and print its tick log");
  m->add_option("--env", mock.env)->required()->check(CLI::ExistingFile);
  m->add_option("--symbols", mock.symbols, "e.g. 0110")->required();
  m->add_option("--seed", mock.seed);
  m->add_option("--filler", mock.filler)->check(CLI::IsMember({"repeat", "dummy", "aug"}));
  m->add_option("--dummy-obs", mock.dummy);
  m->add_option("--codec", mock.codec, "'default' (index order) or a file of name<TAB>code lines");
  m->add_option("--base", mock.base)->check(CLI::Range(2, 10));
  m->add_option("--out", mock.out);

  EsaArgs esa;
  auto* e = app.add_subcommand("esa", "Build an abstraction and surrogate MDP and report its census and loss");
  e->add_option("--env", esa.env)->required()->check(CLI::ExistingFile);
  e->add_option("--mode", esa.mode)->check(CLI::IsMember({"plain", "bin"}));
  e->add_option("--delta", esa.delta)->check(CLI::PositiveNumber);
  e->add_option("--depth", esa.depth)->check(CLI::NonNegativeNumber);
  e->add_option("--weighting", esa.weighting)->check(CLI::IsMember({"uniform", "visit"}));
  e->add_option("--gamma", esa.gamma)->check(CLI::Range(0.0, 0.999999));
  e->add_option("--tol", esa.tol)->check(CLI::PositiveNumber);
  e->add_option("--out", esa.out);

  BoundsArgs bounds;
  auto* b = app.add_subcommand("bounds", "State-count bounds of the plain and binarized abstractions");
  b->add_option("--actions", bounds.actions)->required()->check(CLI::Range(2, 1 << 30));
  b->add_option("--gamma", bounds.gamma, "rational or decimal")->required();
  b->add_option("--epsilon", bounds.epsilon)->required();
  b->add_option("--range", bounds.range, "reward range R");
  b->add_option("--format", bounds.format)->check(CLI::IsMember({"json", "table"}));

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Run verification suites");
  v->add_option("--suite", verify.config.suite)->check(CLI::IsMember([] {
    auto ids = suite_ids();
    ids.push_back("all");
    return ids;
  }()));
  v->add_option("--seed", verify.config.seed);
  v->add_option("--count", verify.config.env_count, "environments per family")->check(CLI::NonNegativeNumber);
  v->add_option("--gamma", verify.config.gamma)->check(CLI::Range(0.0, 0.999999));
  v->add_option("--epsilon", verify.config.epsilon)->check(CLI::NonNegativeNumber);
  v->add_option("--depth", verify.config.depth)->check(CLI::NonNegativeNumber);
  v->add_option("--tol", verify.config.tol)->check(CLI::PositiveNumber);
  v->add_option("--env", verify.env, "run the suite on this environment only")->check(CLI::ExistingFile);
  v->add_option("--out", verify.out);
  v->add_option("--format", verify.format)->check(CLI::IsMember({"json", "csv", "md", "markdown"}));

  GenArgs gen;
  int obs = 2, rewards = 2, actions = 2;
  auto* g = app.add_subcommand("gen", "Write a seeded random environment");
  g->add_option("--seed", gen.seed);
  g->add_option("--obs", obs);
  g->add_option("--rewards", rewards);
  g->add_option("--actions", actions);
  g->add_option("-m,--context", gen.m);
  g->add_option("--sparsity", gen.sparsity)->check(CLI::Range(0.0, 1.0));
  g->add_option("--scaling", gen.scaling, "member of the action-scaling family with this many actions");
  g->add_option("--out", gen.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*m) return cmd_mock(mock);
    if (*e) return cmd_esa(esa);
    if (*b) return cmd_bounds(bounds);
    if (*v) return cmd_verify(verify);
    if (*g) {
      gen.sizes = {obs, rewards, actions};
      return cmd_gen(gen);
    }
  } catch (const Error& err) {
    std::fprintf(stderr, "seqrl: %s\n", err.what());
    return kUsage;
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "seqrl: %s\n", err.what());
    return kUsage;
  }
  return kUsage;
}
