#include "payflow/erp.hpp"

#include "json_io.hpp"
#include "payflow/codec.hpp"

#include <algorithm>
#include <utility>

namespace payflow::actors {

using jsonio::Json;

Erp::Erp(evidence::SigningKey gateway_key, ErpConfig config)
    : key_(std::move(gateway_key)), config_(config) {
  if (key_.purpose() != evidence::KeyPurpose::GatewayToErp) {
    throw evidence::KeyPurposeError("the ERP verifies gateway evidence with a GatewayToErp key");
  }
}

void Erp::add_object(fsm::BusinessObject obj, Tick now) {
  const std::string id = obj.object_id;
  if (!objects_.emplace(id, Entry{std::move(obj), now, {}}).second) {
    throw Error("duplicate business object " + id);
  }
}

const Erp::Entry& Erp::entry(std::string_view id) const {
  const auto it = objects_.find(id);
  if (it == objects_.end()) {
    throw UnknownObject("unknown business object " + std::string(id));
  }
  return it->second;
}

Erp::Entry& Erp::entry(std::string_view id) {
  return const_cast<Entry&>(std::as_const(*this).entry(id));
}

ErpOutcome Erp::erp_apply(const fsm::TransitionEvent& event) {
  Entry& e = entry(event.object_id);
  std::optional<evidence::Verdict> verdict;
  const fsm::EvidenceVerifier verifier = [&](std::span<const std::uint8_t> wire,
                                             const fsm::EvidenceExpectation& expected) {
    const auto ev = evidence::decode_evidence(wire);
    if (!ev) {
      verdict = evidence::Verdict::BadSignature;
      return false;
    }
    evidence::Expected want{std::string(expected.object_id), expected.attempt_id,
                            expected.amount, std::string(expected.currency),
                            expected.kind == fsm::EventKind::AuthorizeOk
                                ? evidence::Outcome::Authorized
                                : evidence::Outcome::Captured};
    verdict = evidence::verify_evidence(key_, *ev, want, nonces_);
    return *verdict == evidence::Verdict::Verified;
  };

  auto result = fsm::apply_transition(e.object, event, verifier);
  if (result.record.applied()) {
    e.object = std::move(result.object);
    e.state_since = event.logical_time;
    if (event.evidence) {
      e.accepted.push_back(*event.evidence);
    }
  }
  audit_.push_back(result.record);
  return ErpOutcome{result.record.decision, std::move(result.record), verdict};
}

fsm::PaymentState Erp::erp_status(std::string_view object_id) const {
  return entry(object_id).object.state;
}

const fsm::BusinessObject& Erp::object(std::string_view object_id) const {
  return entry(object_id).object;
}

bool Erp::contains(std::string_view object_id) const {
  return objects_.find(object_id) != objects_.end();
}

std::vector<fsm::BusinessObject> Erp::objects() const {
  std::vector<fsm::BusinessObject> out;
  out.reserve(objects_.size());
  for (const auto& [id, e] : objects_) out.push_back(e.object);
  return out;
}

void Erp::open_retry(std::string_view object_id, Tick now) {
  Entry& e = entry(object_id);
  e.object = fsm::open_retry(std::move(e.object));
  e.state_since = now;
  e.accepted.clear();
}

std::vector<ErpOutcome> Erp::step(Tick now) {
  std::vector<ErpOutcome> out;
  for (auto& [id, e] : objects_) {
    std::optional<fsm::EventKind> kind;
    if (e.object.state == fsm::PaymentState::Captured &&
        now >= e.state_since + config_.settle_delay) {
      kind = fsm::EventKind::Settle;
    } else if (e.object.state == fsm::PaymentState::AuthorizationPending &&
               now >= e.state_since + config_.timeout_ticks) {
      kind = fsm::EventKind::Timeout;
    }
    if (kind) {
      out.push_back(erp_apply(fsm::TransitionEvent{
          *kind, id, e.object.attempt_id, fsm::Actor{fsm::ActorKind::Erp, "erp"},
          std::nullopt, now}));
    }
  }
  return out;
}

std::optional<Tick> Erp::next_deadline() const {
  std::optional<Tick> best;
  for (const auto& [id, e] : objects_) {
    std::optional<Tick> t;
    if (e.object.state == fsm::PaymentState::Captured) {
      t = e.state_since + config_.settle_delay;
    } else if (e.object.state == fsm::PaymentState::AuthorizationPending) {
      t = e.state_since + config_.timeout_ticks;
    }
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

Tick Erp::state_since(std::string_view object_id) const {
  return entry(object_id).state_since;
}

std::vector<fsm::AuditRecord> Erp::audit_for(std::string_view object_id) const {
  std::vector<fsm::AuditRecord> out;
  for (const auto& r : audit_) {
    if (r.object_id == object_id) out.push_back(r);
  }
  return out;
}

const std::vector<Bytes>& Erp::accepted_evidence(std::string_view object_id) const {
  return entry(object_id).accepted;
}

bool Erp::verify_audit() const {
  for (const auto& [id, e] : objects_) {
    fsm::BusinessObject initial = e.object;
    initial.state = fsm::PaymentState::Created;
    try {
      if (fsm::replay_audit(audit_for(id), initial) != e.object.state) return false;
    } catch (const fsm::AuditCorruption&) {
      return false;
    }
  }
  return true;
}

std::string Erp::snapshot_json() const {
  Json objects = Json::array();
  for (const auto& [id, e] : objects_) {
    Json o = jsonio::to_json(e.object);
    o["state_since"] = e.state_since;
    Json accepted = Json::array();
    for (const auto& b : e.accepted) accepted.push_back(codec::base64_encode(b));
    o["accepted_evidence"] = std::move(accepted);
    objects.push_back(std::move(o));
  }
  Json nonces = Json::array();
  for (const auto& n : nonces_.consumed()) nonces.push_back(evidence::to_hex(n));
  Json audit = Json::array();
  for (const auto& r : audit_) audit.push_back(jsonio::to_json(r));
  Json root{{"objects", std::move(objects)},
            {"consumed_nonces", std::move(nonces)},
            {"audit", std::move(audit)}};
  return root.dump();
}

Erp Erp::restore(std::string_view json, evidence::SigningKey gateway_key, ErpConfig config) {
  Json root;
  try {
    root = Json::parse(json);
  } catch (const Json::parse_error& e) {
    throw jsonio::FormatError(std::string("ERP snapshot: ") + e.what());
  }
  Erp erp(std::move(gateway_key), config);
  for (const Json& o : jsonio::member(root, "objects")) {
    Entry e{jsonio::object_from_json(o), jsonio::get_uint(o, "state_since"), {}};
    for (const Json& b : jsonio::member(o, "accepted_evidence")) {
      auto bytes = codec::base64_decode(b.get<std::string>());
      if (!bytes) throw jsonio::FormatError("ERP snapshot: bad accepted evidence");
      e.accepted.push_back(std::move(*bytes));
    }
    const std::string id = e.object.object_id;
    erp.objects_.emplace(id, std::move(e));
  }
  for (const Json& n : jsonio::member(root, "consumed_nonces")) {
    const auto nonce = evidence::nonce_from_hex(n.get<std::string>());
    if (!nonce) throw jsonio::FormatError("ERP snapshot: bad nonce");
    erp.nonces_.consume(*nonce);
  }
  for (const Json& r : jsonio::member(root, "audit")) {
    erp.audit_.push_back(jsonio::audit_from_json(r));
  }
  return erp;
}

} // namespace payflow::actors
