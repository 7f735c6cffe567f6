#pragma once

#include "payflow/common.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// The authoritative payment state machine. Every state change of a business
/// object goes through apply_transition, which checks the issuing actor and
/// the evidence the transition table demands.
namespace payflow::fsm {

enum class PaymentState : std::uint8_t {
  Created,
  PaymentInitiated,
  AuthorizationPending,
  Authorized,
  Captured,
  Settled,
  Failed,
  Canceled,
};

inline constexpr std::array<PaymentState, 8> kAllStates{
    PaymentState::Created,    PaymentState::PaymentInitiated,
    PaymentState::AuthorizationPending, PaymentState::Authorized,
    PaymentState::Captured,   PaymentState::Settled,
    PaymentState::Failed,     PaymentState::Canceled,
};

enum class EventKind : std::uint8_t {
  InitiatePayment,
  ForwardToGateway,
  AuthorizeOk,
  AuthorizeFail,
  Capture,
  Settle,
  Cancel,
  Timeout,
};

inline constexpr std::array<EventKind, 8> kAllEventKinds{
    EventKind::InitiatePayment, EventKind::ForwardToGateway,
    EventKind::AuthorizeOk,     EventKind::AuthorizeFail,
    EventKind::Capture,         EventKind::Settle,
    EventKind::Cancel,          EventKind::Timeout,
};

enum class ActorKind : std::uint8_t { Client, Portal, Gateway, Erp };

inline constexpr std::array<ActorKind, 4> kAllActorKinds{
    ActorKind::Client, ActorKind::Portal, ActorKind::Gateway, ActorKind::Erp};

struct Actor {
  ActorKind kind = ActorKind::Client;
  std::string id;

  bool operator==(const Actor&) const = default;
};

std::string_view to_string(PaymentState s);
std::string_view to_string(EventKind k);
std::string_view to_string(ActorKind k);
std::optional<PaymentState> parse_state(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);
std::optional<ActorKind> parse_actor_kind(std::string_view s);

/// Settled, Failed and Canceled have no outgoing transitions.
constexpr bool is_terminal(PaymentState s) {
  return s == PaymentState::Settled || s == PaymentState::Failed ||
         s == PaymentState::Canceled;
}

/// States that confer the durable benefit of a completed payment.
constexpr bool is_paid(PaymentState s) {
  return s == PaymentState::Captured || s == PaymentState::Settled;
}

/// Event kinds that must carry gateway evidence.
constexpr bool carries_evidence(EventKind k) {
  return k == EventKind::AuthorizeOk || k == EventKind::Capture;
}

struct TransitionEvent {
  EventKind kind = EventKind::InitiatePayment;
  std::string object_id;
  std::uint32_t attempt_id = 1;
  Actor issuer;
  /// Opaque wire form of the evidence; interpreted only by the verifier.
  std::optional<Bytes> evidence;
  Tick logical_time = 0;

  bool operator==(const TransitionEvent&) const = default;
};

struct BusinessObject {
  std::string object_id;
  std::string owner_user_id;
  std::int64_t amount = 0; ///< minor currency units
  std::string currency;
  PaymentState state = PaymentState::Created;
  std::uint32_t attempt_id = 1;

  bool operator==(const BusinessObject&) const = default;
};

/// Builds a fresh object in Created; throws Error unless amount > 0.
BusinessObject make_object(std::string object_id, std::string owner_user_id,
                           std::int64_t amount, std::string currency);

struct TransitionRule {
  PaymentState from;
  EventKind kind;
  ActorKind issuer;
  bool evidence_required;
  PaymentState to;

  bool operator==(const TransitionRule&) const = default;
};

class TransitionTable {
public:
  /// Throws Error if two rules share (from, kind) or a rule leaves a terminal
  /// state.
  explicit TransitionTable(std::vector<TransitionRule> rules);

  /// The table the ERP enforces.
  static const TransitionTable& standard();

  const TransitionRule* find(PaymentState from, EventKind kind) const;
  std::span<const TransitionRule> rules() const { return rules_; }

private:
  std::vector<TransitionRule> rules_;
};

struct AllowedTransition {
  EventKind kind;
  ActorKind issuer;
  bool evidence_required;

  bool operator==(const AllowedTransition&) const = default;
  auto operator<=>(const AllowedTransition&) const = default;
};

/// Rules leaving `state`, sorted by event kind. Empty for terminal states.
std::vector<AllowedTransition>
allowed_transitions(PaymentState state,
                    const TransitionTable& table = TransitionTable::standard());

enum class Decision : std::uint8_t {
  Allowed,
  RejectedIllegalTransition,
  RejectedWrongActor,
  RejectedMissingEvidence,
  RejectedInvalidEvidence,
};

std::string_view to_string(Decision d);
std::optional<Decision> parse_decision(std::string_view s);

/// What the evidence must be bound to for the transition to count.
struct EvidenceExpectation {
  std::string_view object_id;
  std::uint32_t attempt_id;
  std::int64_t amount;
  std::string_view currency;
  EventKind kind;
};

using EvidenceVerifier =
    std::function<bool(std::span<const std::uint8_t>, const EvidenceExpectation&)>;

/// Raised when an event is addressed to a different object than the one it is
/// validated against.
class ObjectMismatch : public Error {
public:
  using Error::Error;
};

/// Rejections are reported in a fixed order: illegal transition, wrong actor,
/// missing evidence, invalid evidence. An event for a stale attempt counts as
/// an illegal transition; evidence attached to a kind that takes none counts
/// as invalid evidence.
Decision validate_event(const BusinessObject& obj, const TransitionEvent& event,
                        const EvidenceVerifier& verifier,
                        const TransitionTable& table = TransitionTable::standard());

struct AuditRecord {
  Tick logical_time = 0;
  std::string object_id;
  TransitionEvent event;
  Decision decision = Decision::Allowed;
  PaymentState resulting_state = PaymentState::Created;

  bool applied() const { return decision == Decision::Allowed; }
  bool operator==(const AuditRecord&) const = default;
};

struct TransitionResult {
  BusinessObject object;
  AuditRecord record;
};

/// Validates and, when allowed, applies the event. Always yields exactly one
/// audit record.
TransitionResult
apply_transition(BusinessObject obj, const TransitionEvent& event,
                 const EvidenceVerifier& verifier,
                 const TransitionTable& table = TransitionTable::standard());

/// Starts a fresh attempt on a Failed object: attempt_id + 1, state Created.
/// Throws Error for any other state.
BusinessObject open_retry(BusinessObject obj);

class AuditCorruption : public Error {
public:
  using Error::Error;
};

/// Folds the Applied records for initial.attempt_id through the table,
/// starting from Created. Records of earlier attempts are skipped. Throws
/// AuditCorruption on unsorted input, foreign object ids, or an Applied record
/// the table forbids.
PaymentState
replay_audit(std::span<const AuditRecord> records, const BusinessObject& initial,
             const TransitionTable& table = TransitionTable::standard());

} // namespace payflow::fsm
