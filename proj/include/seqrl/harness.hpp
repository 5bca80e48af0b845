#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqrl/environment.hpp"

namespace seqrl {

struct EnvSizes {
  int obs = 2;
  int rewards = 2;  // including 0
  int actions = 2;
};

/// Seeded random finite-context environment. Rewards are evenly spaced in
/// [0, 1]; each row puts integer weights on max(1, round((1 - sparsity) * n))
/// outcomes. Rows exist for every context reachable from the initial
/// distribution. Throws InvalidSizes outside |O| <= 4, |R| <= 4, |A| <= 16, m <= 2.
EnvironmentSpec random_env(std::uint64_t seed, EnvSizes sizes, int m, double sparsity);

/// Member of the action-scaling family: every action behaves like action
/// (a mod 2) of one shared two-action environment drawn from `seed`.
EnvironmentSpec scaling_env(std::uint64_t seed, int action_count, int m = 0);

/// Policy files: {"mode": "original"|"sequentialized", "context_length": m,
/// "rows": {key: [p, ...]}}.
PolicySpec parse_policy(std::string_view json_text);
PolicySpec load_policy(const std::string& path);
std::string dump_policy(const PolicySpec& policy);

/// Stable short fingerprint of an environment spec.
std::string env_fingerprint(const EnvironmentSpec& spec);

struct CheckRecord {
  std::string suite;
  std::string env_id;
  std::string check_id;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
  double tol = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

struct VerificationReport {
  std::vector<CheckRecord> records;
  /// Wall time; kept out of every serialized form so reruns are byte-identical.
  double runtime_seconds = 0.0;

  std::size_t passed() const;
  std::size_t failed() const;
  std::size_t skipped() const;
  bool ok() const { return failed() == 0; }
  void append(const VerificationReport& other);
};

struct SuiteConfig {
  std::string suite = "all";
  std::optional<std::string> env_file;
  std::uint64_t seed = 7;
  /// 0 selects the suite's default family size.
  int env_count = 0;
  /// Overrides for the random family; unset fields use the suite defaults.
  std::optional<EnvSizes> sizes;
  std::optional<int> m;
  double gamma = 0.5;
  double epsilon = 0.0;  // 0 selects the suite default (0.2 uplift, 0.3 end-to-end)
  int depth = 0;         // 0 selects the suite default
  /// Target for the summed truncation tails of every value comparison.
  double tol = 1e-6;
  NumericMode numeric = NumericMode::Exact;
};

const std::vector<std::string>& suite_ids();

/// Runs one suite, or every suite for "all". Module errors become failed
/// records; unmet preconditions become skipped records. Throws InvalidParam
/// for an unknown suite id.
VerificationReport run_suite(const SuiteConfig& config);

enum class ReportFormat { Json, Csv, Markdown };
ReportFormat parse_report_format(std::string_view name);
std::string emit_report(const VerificationReport& report, ReportFormat format);
/// Throws IoError.
void write_report(const VerificationReport& report, ReportFormat format, const std::string& path);

}  // namespace seqrl
