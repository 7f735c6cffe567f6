#pragma once

#include "payflow/monitor.hpp"
#include "payflow/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::scenario {

/// A problem in a scenario file. `line` is 1-based; 0 when the file could not
/// be read at all. `pointer` is a JSON pointer to the offending value.
struct Diagnostic {
  std::size_t line = 0;
  std::size_t column = 0;
  std::string pointer;
  std::string message;

  /// "line:col: message (at /pointer)"
  std::string to_string() const;
  bool operator==(const Diagnostic&) const = default;
};

struct Expectation {
  std::string object_id;
  std::optional<fsm::PaymentState> erp;
  std::optional<actors::PortalView> portal;
  std::optional<bool> access;
  /// When set, the expectation applies to that variant only.
  std::optional<actors::Variant> variant;
};

struct Scenario {
  std::string name;
  actors::WorldSpec world;
  std::vector<actors::ClientScript> clients;
  std::vector<std::string> vocabulary;
  std::vector<Expectation> expect;

  monitor::ScanConfig scan_config() const;
};

struct ParseResult {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return scenario.has_value() && diagnostics.empty(); }
};

/// Parses and validates: every referenced user and object resolves, ids are
/// unique, amounts are positive, ops and mutation kinds are known. All
/// problems are collected, each anchored to its line.
ParseResult parse_scenario(std::string_view text);
ParseResult load_scenario(const std::filesystem::path& path);
std::vector<Diagnostic> validate_scenario(const std::filesystem::path& path);

/// The legitimate end-to-end payment: login, pay, wait for settlement,
/// return, status, service.
std::string_view happy_path_json();
Scenario happy_path();

struct ExpectationResult {
  Expectation expectation;
  bool ok = false;
  std::string actual;
};

struct ScenarioOutcome {
  std::string name;
  actors::PortalConfig config;
  std::uint64_t seed = 0;
  std::vector<ExpectationResult> expectations;
  /// Ticks at which some object had access granted while the ERP was not
  /// Captured/Settled, or the goal predicate held. Empty for a clean run.
  std::vector<Tick> authority_violations;
  bool erp_audit_ok = true;
  std::vector<monitor::Discrepancy> discrepancies;
  std::vector<monitor::AnomalyEvent> anomalies;
  actors::Transcript transcript;
  std::string erp_snapshot;
  Tick end_tick = 0;

  bool expectations_hold() const;
};

/// Runs the clients round-robin, drains background work, then reconciles.
/// With `reconcile_every` set, also reconciles on that cadence during the run.
ScenarioOutcome run_scenario(const Scenario& s, const actors::PortalConfig& config,
                             std::uint64_t seed, std::optional<Tick> reconcile_every = {});

} // namespace payflow::scenario
