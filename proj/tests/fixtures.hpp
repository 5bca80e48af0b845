#pragma once

#include <functional>
#include <string>
#include <vector>

#include "seqrl/codec.hpp"
#include "seqrl/environment.hpp"
#include "seqrl/seqenv.hpp"

namespace fixtures {

using seqrl::EnvironmentSpec;
using seqrl::Rational;
using seqrl::Row;

/// Observation-only (m = 0) table over `obs` observations; row(o, a) gives P(. | o, a).
inline EnvironmentSpec mdp(int obs, const std::vector<std::string>& rewards, const std::vector<std::string>& actions,
                           const std::function<Row(int, int)>& row, Row initial = {}) {
  EnvironmentSpec spec;
  spec.obs_count = obs;
  for (const auto& r : rewards) spec.rewards.push_back(seqrl::parse_rational(r));
  for (const auto& a : actions) spec.actions.push_back({a, std::nullopt});
  spec.context_length = 0;
  const std::size_t n = static_cast<std::size_t>(obs) * rewards.size();
  if (initial.empty()) {
    initial.assign(n, Rational(0));
    initial[0] = 1;
  }
  spec.initial = initial;
  for (int o = 0; o < obs; ++o)
    for (int a = 0; a < static_cast<int>(actions.size()); ++a) spec.table[std::to_string(o) + "|" + std::to_string(a)] = row(o, a);
  return spec;
}

inline Row point(std::size_t n, std::size_t at) {
  Row r(n, Rational(0));
  r[at] = 1;
  return r;
}

/// One observation, rewards {0, 1}; a1 pays 1 and a2 pays 0, deterministically.
inline EnvironmentSpec two_action() {
  return mdp(1, {"0", "1"}, {"a1", "a2"}, [](int, int a) { return point(2, a == 0 ? 1 : 0); });
}

/// One observation, rewards {0, 1/3, 2/3, 1}; action a00..a11 (index i) pays i/3.
inline EnvironmentSpec four_action() {
  return mdp(1, {"0", "1/3", "2/3", "1"}, {"a00", "a01", "a10", "a11"},
             [](int, int a) { return point(4, static_cast<std::size_t>(a)); });
}

/// Two observations, rewards {0, 1}, four actions. Action a moves to
/// observation (a mod 2) and pays 1 iff it lands on observation 1 from observation 0.
inline EnvironmentSpec two_obs_four_action() {
  return mdp(2, {"0", "1"}, {"a00", "a01", "a10", "a11"}, [](int o, int a) {
    const int next = a % 2;
    const int reward = (o == 0 && next == 1) ? 1 : 0;
    return point(4, static_cast<std::size_t>(next * 2 + reward));
  });
}

/// Environment padded to base 2 with its index-order codec and sequentialization.
struct Rig {
  explicit Rig(EnvironmentSpec spec, seqrl::SeqOptions options = {})
      : env(seqrl::pad_environment(std::move(spec), 2)),
        codec(seqrl::ActionCodec::index_order(2, env.action_count())),
        seq(env, codec, options) {}
  seqrl::ValidatedEnvironment env;
  seqrl::ActionCodec codec;
  seqrl::SequentializedEnvironment seq;
};

}  // namespace fixtures
