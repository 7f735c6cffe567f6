#include "payflow/gateway.hpp"

#include <algorithm>
#include <tuple>

namespace payflow::actors {

std::string_view to_string(GatewayOutcome o) {
  switch (o) {
  case GatewayOutcome::Approve: return "approve";
  case GatewayOutcome::Decline: return "decline";
  case GatewayOutcome::Stall: return "stall";
  }
  return "?";
}

std::optional<GatewayOutcome> parse_gateway_outcome(std::string_view s) {
  for (auto o : {GatewayOutcome::Approve, GatewayOutcome::Decline, GatewayOutcome::Stall}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

GatewayOutcome GatewayPolicy::outcome_for(std::string_view object_id,
                                          std::uint32_t attempt_id) const {
  const auto it = script.find(object_id);
  if (it == script.end() || attempt_id == 0 || attempt_id > it->second.size()) {
    return default_outcome;
  }
  return it->second[attempt_id - 1];
}

Gateway::Gateway(std::string gateway_id, evidence::SigningKey key, GatewayPolicy policy,
                 std::uint64_t nonce_seed)
    : id_(std::move(gateway_id)), key_(std::move(key)), policy_(std::move(policy)),
      nonces_(nonce_seed) {
  if (key_.purpose() != evidence::KeyPurpose::GatewayToErp) {
    throw evidence::KeyPurposeError("the gateway signs evidence with a GatewayToErp key");
  }
}

AuthorizeResult Gateway::gateway_authorize(const PaymentRequest& request, const Erp& erp) {
  if (!erp.contains(request.object_id)) {
    return {GatewayOutcome::Decline, false, "unknown object " + request.object_id};
  }
  const auto& obj = erp.object(request.object_id);
  if (obj.state != fsm::PaymentState::AuthorizationPending ||
      obj.attempt_id != request.attempt_id) {
    return {GatewayOutcome::Decline, false,
            "object " + request.object_id + " is not awaiting authorization"};
  }
  const GatewayOutcome outcome = policy_.outcome_for(request.object_id, request.attempt_id);
  const Tick at = request.requested_at + policy_.latency;
  switch (outcome) {
  case GatewayOutcome::Approve:
    queue_.push_back({at, next_seq_++, fsm::EventKind::AuthorizeOk, request});
    queue_.push_back({at + 1, next_seq_++, fsm::EventKind::Capture, request});
    break;
  case GatewayOutcome::Decline:
    queue_.push_back({at, next_seq_++, fsm::EventKind::AuthorizeFail, request});
    break;
  case GatewayOutcome::Stall:
    break;
  }
  return {outcome, true, {}};
}

std::vector<fsm::TransitionEvent> Gateway::due(Tick now) {
  std::vector<Scheduled> ready;
  std::erase_if(queue_, [&](const Scheduled& s) {
    if (s.due <= now) {
      ready.push_back(s);
      return true;
    }
    return false;
  });
  std::sort(ready.begin(), ready.end(), [](const Scheduled& a, const Scheduled& b) {
    return std::tie(a.due, a.seq) < std::tie(b.due, b.seq);
  });

  std::vector<fsm::TransitionEvent> out;
  for (const auto& s : ready) {
    fsm::TransitionEvent ev{s.kind, s.request.object_id, s.request.attempt_id,
                            fsm::Actor{fsm::ActorKind::Gateway, id_}, std::nullopt, now};
    if (fsm::carries_evidence(s.kind)) {
      const auto outcome = s.kind == fsm::EventKind::AuthorizeOk
                               ? evidence::Outcome::Authorized
                               : evidence::Outcome::Captured;
      const auto signed_ev = evidence::sign_evidence(
          key_,
          {id_, s.request.object_id, s.request.attempt_id, s.request.amount,
           s.request.currency, outcome, now},
          nonces_);
      ledger_.push_back({id_, s.request.object_id, s.request.attempt_id, outcome,
                         signed_ev.nonce, now});
      ev.evidence = evidence::encode_evidence(signed_ev);
    }
    out.push_back(std::move(ev));
  }
  return out;
}

std::optional<Tick> Gateway::next_due() const {
  std::optional<Tick> best;
  for (const auto& s : queue_) {
    if (!best || s.due < *best) best = s.due;
  }
  return best;
}

} // namespace payflow::actors
