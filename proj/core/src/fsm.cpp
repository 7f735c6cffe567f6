#include "payflow/fsm.hpp"

#include <algorithm>

namespace payflow::fsm {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<E, N>& all) {
  for (E e : all) {
    if (to_string(e) == s) {
      return e;
    }
  }
  return std::nullopt;
}

constexpr std::array<Decision, 5> kAllDecisions{
    Decision::Allowed, Decision::RejectedIllegalTransition,
    Decision::RejectedWrongActor, Decision::RejectedMissingEvidence,
    Decision::RejectedInvalidEvidence};

} // namespace

std::string_view to_string(PaymentState s) {
  switch (s) {
  case PaymentState::Created: return "Created";
  case PaymentState::PaymentInitiated: return "PaymentInitiated";
  case PaymentState::AuthorizationPending: return "AuthorizationPending";
  case PaymentState::Authorized: return "Authorized";
  case PaymentState::Captured: return "Captured";
  case PaymentState::Settled: return "Settled";
  case PaymentState::Failed: return "Failed";
  case PaymentState::Canceled: return "Canceled";
  }
  return "?";
}

std::string_view to_string(EventKind k) {
  switch (k) {
  case EventKind::InitiatePayment: return "InitiatePayment";
  case EventKind::ForwardToGateway: return "ForwardToGateway";
  case EventKind::AuthorizeOk: return "AuthorizeOk";
  case EventKind::AuthorizeFail: return "AuthorizeFail";
  case EventKind::Capture: return "Capture";
  case EventKind::Settle: return "Settle";
  case EventKind::Cancel: return "Cancel";
  case EventKind::Timeout: return "Timeout";
  }
  return "?";
}

std::string_view to_string(ActorKind k) {
  switch (k) {
  case ActorKind::Client: return "Client";
  case ActorKind::Portal: return "Portal";
  case ActorKind::Gateway: return "Gateway";
  case ActorKind::Erp: return "Erp";
  }
  return "?";
}

std::string_view to_string(Decision d) {
  switch (d) {
  case Decision::Allowed: return "Allowed";
  case Decision::RejectedIllegalTransition: return "RejectedIllegalTransition";
  case Decision::RejectedWrongActor: return "RejectedWrongActor";
  case Decision::RejectedMissingEvidence: return "RejectedMissingEvidence";
  case Decision::RejectedInvalidEvidence: return "RejectedInvalidEvidence";
  }
  return "?";
}

std::optional<PaymentState> parse_state(std::string_view s) {
  return lookup(s, kAllStates);
}
std::optional<EventKind> parse_event_kind(std::string_view s) {
  return lookup(s, kAllEventKinds);
}
std::optional<ActorKind> parse_actor_kind(std::string_view s) {
  return lookup(s, kAllActorKinds);
}
std::optional<Decision> parse_decision(std::string_view s) {
  return lookup(s, kAllDecisions);
}

BusinessObject make_object(std::string object_id, std::string owner_user_id,
                           std::int64_t amount, std::string currency) {
  if (amount <= 0) {
    throw Error("business object " + object_id + ": amount must be positive");
  }
  if (object_id.empty()) {
    throw Error("business object id must not be empty");
  }
  return BusinessObject{std::move(object_id), std::move(owner_user_id), amount,
                        std::move(currency), PaymentState::Created, 1};
}

TransitionTable::TransitionTable(std::vector<TransitionRule> rules)
    : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (is_terminal(rules_[i].from)) {
      throw Error("transition rule leaves terminal state " +
                  std::string(to_string(rules_[i].from)));
    }
    for (std::size_t j = i + 1; j < rules_.size(); ++j) {
      if (rules_[i].from == rules_[j].from && rules_[i].kind == rules_[j].kind) {
        throw Error("duplicate transition rule for (" +
                    std::string(to_string(rules_[i].from)) + ", " +
                    std::string(to_string(rules_[i].kind)) + ")");
      }
    }
  }
}

const TransitionTable& TransitionTable::standard() {
  using S = PaymentState;
  using K = EventKind;
  using A = ActorKind;
  static const TransitionTable table({
      {S::Created, K::InitiatePayment, A::Portal, false, S::PaymentInitiated},
      {S::Created, K::Cancel, A::Portal, false, S::Canceled},
      {S::PaymentInitiated, K::ForwardToGateway, A::Portal, false,
       S::AuthorizationPending},
      {S::PaymentInitiated, K::Cancel, A::Portal, false, S::Canceled},
      {S::AuthorizationPending, K::AuthorizeOk, A::Gateway, true, S::Authorized},
      {S::AuthorizationPending, K::AuthorizeFail, A::Gateway, false, S::Failed},
      {S::AuthorizationPending, K::Timeout, A::Erp, false, S::Failed},
      {S::Authorized, K::Capture, A::Gateway, true, S::Captured},
      {S::Captured, K::Settle, A::Erp, false, S::Settled},
  });
  return table;
}

const TransitionRule* TransitionTable::find(PaymentState from, EventKind kind) const {
  for (const auto& r : rules_) {
    if (r.from == from && r.kind == kind) {
      return &r;
    }
  }
  return nullptr;
}

std::vector<AllowedTransition> allowed_transitions(PaymentState state,
                                                   const TransitionTable& table) {
  std::vector<AllowedTransition> out;
  for (const auto& r : table.rules()) {
    if (r.from == state) {
      out.push_back({r.kind, r.issuer, r.evidence_required});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Decision validate_event(const BusinessObject& obj, const TransitionEvent& event,
                        const EvidenceVerifier& verifier,
                        const TransitionTable& table) {
  if (event.object_id != obj.object_id) {
    throw ObjectMismatch("event for " + event.object_id +
                         " validated against object " + obj.object_id);
  }
  const TransitionRule* rule = table.find(obj.state, event.kind);
  if (rule == nullptr || event.attempt_id != obj.attempt_id) {
    return Decision::RejectedIllegalTransition;
  }
  if (event.issuer.kind != rule->issuer) {
    return Decision::RejectedWrongActor;
  }
  if (!rule->evidence_required) {
    return event.evidence ? Decision::RejectedInvalidEvidence : Decision::Allowed;
  }
  if (!event.evidence) {
    return Decision::RejectedMissingEvidence;
  }
  const EvidenceExpectation expected{obj.object_id, obj.attempt_id, obj.amount,
                                     obj.currency, event.kind};
  if (!verifier || !verifier(*event.evidence, expected)) {
    return Decision::RejectedInvalidEvidence;
  }
  return Decision::Allowed;
}

TransitionResult apply_transition(BusinessObject obj, const TransitionEvent& event,
                                  const EvidenceVerifier& verifier,
                                  const TransitionTable& table) {
  const Decision d = validate_event(obj, event, verifier, table);
  if (d == Decision::Allowed) {
    obj.state = table.find(obj.state, event.kind)->to;
  }
  AuditRecord rec{event.logical_time, obj.object_id, event, d, obj.state};
  return {std::move(obj), std::move(rec)};
}

BusinessObject open_retry(BusinessObject obj) {
  if (obj.state != PaymentState::Failed) {
    throw Error("retry requested for " + obj.object_id + " in state " +
                std::string(to_string(obj.state)));
  }
  obj.state = PaymentState::Created;
  obj.attempt_id += 1;
  return obj;
}

PaymentState replay_audit(std::span<const AuditRecord> records,
                          const BusinessObject& initial,
                          const TransitionTable& table) {
  PaymentState state = PaymentState::Created;
  Tick last = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AuditRecord& r = records[i];
    if (r.object_id != initial.object_id) {
      throw AuditCorruption("audit record " + std::to_string(i) + " belongs to " +
                            r.object_id + ", not " + initial.object_id);
    }
    if (i > 0 && r.logical_time < last) {
      throw AuditCorruption("audit record " + std::to_string(i) +
                            " is out of logical-time order");
    }
    last = r.logical_time;
    if (!r.applied() || r.event.attempt_id != initial.attempt_id) {
      continue;
    }
    const TransitionRule* rule = table.find(state, r.event.kind);
    if (rule == nullptr || rule->issuer != r.event.issuer.kind ||
        (rule->evidence_required && !r.event.evidence)) {
      throw AuditCorruption("audit record " + std::to_string(i) + " applies " +
                            std::string(to_string(r.event.kind)) + " from " +
                            std::string(to_string(state)) +
                            ", which the table forbids");
    }
    state = rule->to;
    if (r.resulting_state != state) {
      throw AuditCorruption("audit record " + std::to_string(i) +
                            " claims state " +
                            std::string(to_string(r.resulting_state)) +
                            " but the fold reaches " +
                            std::string(to_string(state)));
    }
  }
  return state;
}

} // namespace payflow::fsm
