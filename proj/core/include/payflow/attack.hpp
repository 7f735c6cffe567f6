#pragma once

#include "payflow/monitor.hpp"
#include "payflow/simulation.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace payflow::attack {

enum class StrategyId : std::uint8_t {
  S1HeaderTamper,
  S2CookieForge,
  S3ReturnReplay,
  S4SequenceSkip,
  S5ParamSwap,
  S6TokenTamper,
  S7CallbackReplay,
};

inline constexpr std::array<StrategyId, 7> kAllStrategies{
    StrategyId::S1HeaderTamper, StrategyId::S2CookieForge,  StrategyId::S3ReturnReplay,
    StrategyId::S4SequenceSkip, StrategyId::S5ParamSwap,    StrategyId::S6TokenTamper,
    StrategyId::S7CallbackReplay};

/// "S1".."S7".
std::string_view to_string(StrategyId s);
/// "HeaderTamper", ...
std::string_view strategy_name(StrategyId s);
std::optional<StrategyId> parse_strategy(std::string_view s);

inline constexpr std::size_t kDefaultBudget = 500;

struct AttackStrategy {
  StrategyId id = StrategyId::S1HeaderTamper;
  std::size_t budget = kDefaultBudget;
  std::uint64_t seed = 0;
};

/// The attacker's only handle on the system: an HTTP client logged in as one
/// ordinary account. It exposes no key, ERP or gateway object.
class ClientChannel {
public:
  ClientChannel(actors::Simulation& sim, std::string user, std::string password);

  http::HttpResponse login();
  http::HttpRequest build(actors::ClientOp op, std::string_view object) const;
  /// Sends and absorbs cookies. After the goal is reached further sends are
  /// dropped and return 400.
  http::HttpResponse send(const http::HttpRequest& req);
  void wait(Tick ticks);
  Tick now() const;
  bool stopped() const;
  const http::Session& session() const { return agent_.session(); }
  http::Session& session() { return agent_.session(); }

  /// Every request this client sent and the response it got back.
  const std::vector<std::pair<http::HttpRequest, http::HttpResponse>>& exchanges() const {
    return exchanges_;
  }

private:
  actors::Simulation& sim_;
  actors::ClientAgent agent_;
  std::vector<std::pair<http::HttpRequest, http::HttpResponse>> exchanges_;
  bool* stop_flag_ = nullptr;
  friend class AttemptRunner;
};

/// Read-only copy of the three ledgers the goal predicate looks at.
struct LedgerView {
  struct PortalEntry {
    std::string object_id;
    actors::PortalView view = actors::PortalView::Unpaid;
    bool access_granted = false;
    bool operator==(const PortalEntry&) const = default;
  };
  struct ErpEntry {
    std::string object_id;
    fsm::PaymentState state = fsm::PaymentState::Created;
    std::uint32_t attempt_id = 1;
    bool operator==(const ErpEntry&) const = default;
  };
  std::vector<PortalEntry> portal;
  std::vector<ErpEntry> erp;
  std::vector<actors::LedgerEntry> gateway_ledger;
  std::vector<evidence::Nonce> consumed_nonces;

  bool operator==(const LedgerView&) const = default;
};

LedgerView capture(const actors::Portal& portal, const actors::Erp& erp,
                   const actors::Gateway& gateway);

enum class GoalClause : std::uint8_t {
  /// Portal shows PaidView or grants access while the ERP is not Captured/Settled.
  PortalAheadOfErp,
  /// ERP at Authorized or beyond without consumed gateway evidence to back it.
  UnbackedErpState,
};

std::string_view to_string(GoalClause c);
std::optional<GoalClause> parse_goal_clause(std::string_view s);

struct GoalHit {
  std::string object_id;
  GoalClause clause = GoalClause::PortalAheadOfErp;
  bool operator==(const GoalHit&) const = default;
};

/// First object (by id) satisfying the attacker's goal.
std::optional<GoalHit> goal_hit(const LedgerView& view);
std::optional<GoalHit> goal_hit(const actors::Portal& portal, const actors::Erp& erp,
                                const actors::Gateway& gateway);
bool goal_predicate(const LedgerView& view);

/// True when the ERP holds an Authorized-or-later object with no consumed
/// gateway evidence behind it.
bool erp_integrity_violated(const actors::Erp& erp, const actors::Gateway& gateway);

struct Witness {
  std::string object_id;
  Tick tick = 0;
  GoalClause clause = GoalClause::PortalAheadOfErp;
  LedgerView snapshot;
  std::vector<actors::TranscriptRecord> slice;
  actors::GrantSource granted_via = actors::GrantSource::None;
  std::optional<Tick> grant_tick;
  /// First portal ERP query for the object after the grant.
  std::optional<Tick> confirmation_tick;
};

struct WitnessCheck {
  bool ok = false;
  std::string reason;
};

/// Re-derives the success from the witness alone: the snapshot satisfies the
/// goal for the object, and folding the slice's ERP traffic through the
/// transition table gives the snapshot's (unpaid) ERP state while the slice
/// holds a portal response granting the object.
WitnessCheck recheck_witness(const Witness& w);

struct AttackResult {
  StrategyId strategy = StrategyId::S1HeaderTamper;
  actors::PortalConfig config;
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<Witness> witness;
  std::size_t attempts = 0;
  std::size_t space = 0;
  std::size_t budget = kDefaultBudget;
  /// Attempts where the ERP ended an attempt inconsistent with gateway evidence
  /// or with its own audit log.
  std::size_t erp_violations = 0;
  /// Requests the strategy altered or swapped, and how many of them the
  /// portal refused with the status the hardened design mandates.
  std::size_t mutated_requests = 0;
  std::size_t refused_requests = 0;
  /// Relayed receipts the ERP accepted (S7).
  std::size_t replays_accepted = 0;
  /// Findings from the winning attempt.
  std::vector<monitor::Discrepancy> discrepancies;
  std::vector<monitor::AnomalyEvent> anomalies;
};

/// The built-in attack world: attacker mallory owns M1 (gateway declines or
/// stalls it, depending on the seed) and M2 (always approved); victim victor
/// owns V1. Gateway latency is 1 + seed % 4.
actors::WorldSpec attack_world(std::uint64_t seed);
monitor::ScanConfig attack_scan_config();

inline constexpr std::string_view kAttacker = "mallory";
inline constexpr std::string_view kAttackerPassword = "mallory-pw";

/// Number of distinct attempts in the strategy's parameter space.
std::size_t parameter_space(StrategyId s, const actors::PortalConfig& config, std::uint64_t seed);

/// Breadth-first over the parameter space, a fresh simulation per attempt,
/// stopping at the first attempt that reaches the goal.
AttackResult run_attack(const AttackStrategy& strategy, const actors::PortalConfig& config);

/// One attempt, with its full transcript; for inspection and tests.
struct AttemptRun {
  std::optional<GoalHit> hit;
  std::optional<Witness> witness;
  actors::Transcript transcript;
  std::vector<std::pair<http::HttpRequest, http::HttpResponse>> exchanges;
  std::vector<monitor::Discrepancy> discrepancies;
  std::size_t mutated_requests = 0;
  std::size_t refused_requests = 0;
  std::size_t replays_accepted = 0;
  bool erp_violation = false;
};
AttemptRun run_attempt(StrategyId s, const actors::PortalConfig& config, std::uint64_t seed,
                       std::size_t index);

struct SuiteResult {
  actors::PortalConfig config;
  std::vector<std::uint64_t> seeds;
  std::size_t budget = kDefaultBudget;
  /// Strategy-major: all seeds of S1, then S2, ...
  std::vector<AttackResult> cells;
  /// For each enabled flaw, the strategies that succeed with that flaw alone.
  std::map<actors::Flaw, std::vector<StrategyId>> coverage;

  std::size_t successes() const;
  std::size_t erp_violations() const;
};

SuiteResult run_suite(const actors::PortalConfig& config, const std::vector<std::uint64_t>& seeds,
                      std::size_t budget = kDefaultBudget);

} // namespace payflow::attack
