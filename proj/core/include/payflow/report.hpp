#pragma once

#include "payflow/attack.hpp"
#include "payflow/scenario.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::report {

struct RunOptions {
  actors::PortalConfig config;
  std::uint64_t seed = 0;
  /// Scenario sources as given on the command line, for the config echo.
  std::vector<std::string> scenario_paths;
  bool attack_suite = false;
  std::size_t suite_seeds = 20;
  std::size_t budget = attack::kDefaultBudget;
  std::optional<Tick> reconcile_every;
};

struct InvariantSummary {
  std::size_t authority_violations = 0;
  std::size_t erp_integrity_violations = 0;
  bool erp_audit_ok = true;
  std::size_t witnesses = 0;
  std::size_t witnesses_ok = 0;
  /// Successful attack cells with no reconciliation or scan finding.
  std::size_t undetected_successes = 0;
};

struct RunReport {
  RunOptions options;
  std::vector<scenario::ScenarioOutcome> scenarios;
  std::optional<attack::SuiteResult> suite;
  InvariantSummary invariants;

  /// 0 when every scenario expectation holds, the ERP stayed consistent and the
  /// attack suite behaved as the variant predicts (hardened: no success,
  /// vulnerable: at least one); 1 otherwise.
  int exit_code() const;
  std::vector<std::string> failures() const;
};

/// Runs the scenarios and, if asked, the attack suite over seeds
/// seed..seed+suite_seeds-1.
RunReport run(const RunOptions& options, const std::vector<scenario::Scenario>& scenarios);

/// Deterministic: equal reports give byte-identical text.
std::string to_json(const RunReport& r);
std::string to_text(const RunReport& r);
/// Discrepancies and anomalies only.
std::string findings_json(const RunReport& r);

std::string witness_to_json(const attack::Witness& w);
/// Throws Error on malformed input.
attack::Witness witness_from_json(std::string_view json);

struct VerifyResult {
  /// False when the input is not a JSON report at all.
  bool readable = true;
  std::size_t successes = 0;
  std::size_t verified = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Re-checks every success witness in a JSON report without re-running
/// anything.
VerifyResult verify_report(std::string_view json);

} // namespace payflow::report
