#include "json_io.hpp"

#include "payflow/codec.hpp"

namespace payflow::jsonio {

const Json& member(const Json& j, std::string_view key) {
  if (!j.is_object()) {
    throw FormatError("expected an object holding '" + std::string(key) + "'");
  }
  const auto it = j.find(std::string(key));
  if (it == j.end()) {
    throw FormatError("missing key '" + std::string(key) + "'");
  }
  return *it;
}

std::string get_string(const Json& j, std::string_view key) {
  const Json& v = member(j, key);
  if (!v.is_string()) throw FormatError("'" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t get_uint(const Json& j, std::string_view key) {
  const Json& v = member(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw FormatError("'" + std::string(key) + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::int64_t get_int(const Json& j, std::string_view key) {
  const Json& v = member(j, key);
  if (!v.is_number_integer()) throw FormatError("'" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

fsm::PaymentState state_from(const Json& j, std::string_view key) {
  const auto s = fsm::parse_state(get_string(j, key));
  if (!s) throw FormatError("'" + std::string(key) + "' is not a payment state");
  return *s;
}

Json to_json(const fsm::BusinessObject& obj) {
  return Json{{"id", obj.object_id},     {"owner", obj.owner_user_id},
              {"amount", obj.amount},    {"currency", obj.currency},
              {"state", fsm::to_string(obj.state)}, {"attempt", obj.attempt_id}};
}

fsm::BusinessObject object_from_json(const Json& j) {
  fsm::BusinessObject obj = fsm::make_object(get_string(j, "id"), get_string(j, "owner"),
                                             get_int(j, "amount"), get_string(j, "currency"));
  obj.state = state_from(j, "state");
  obj.attempt_id = static_cast<std::uint32_t>(get_uint(j, "attempt"));
  return obj;
}

Json to_json(const fsm::TransitionEvent& ev) {
  Json j{{"kind", fsm::to_string(ev.kind)},
         {"object", ev.object_id},
         {"attempt", ev.attempt_id},
         {"issuer", fsm::to_string(ev.issuer.kind)},
         {"issuer_id", ev.issuer.id},
         {"tick", ev.logical_time}};
  j["evidence"] = ev.evidence ? Json(codec::base64_encode(*ev.evidence)) : Json(nullptr);
  return j;
}

fsm::TransitionEvent event_from_json(const Json& j) {
  fsm::TransitionEvent ev;
  const auto kind = fsm::parse_event_kind(get_string(j, "kind"));
  const auto issuer = fsm::parse_actor_kind(get_string(j, "issuer"));
  if (!kind || !issuer) throw FormatError("bad event kind or issuer");
  ev.kind = *kind;
  ev.object_id = get_string(j, "object");
  ev.attempt_id = static_cast<std::uint32_t>(get_uint(j, "attempt"));
  ev.issuer = fsm::Actor{*issuer, get_string(j, "issuer_id")};
  ev.logical_time = get_uint(j, "tick");
  const Json& e = member(j, "evidence");
  if (!e.is_null()) {
    auto bytes = codec::base64_decode(e.get<std::string>());
    if (!bytes) throw FormatError("evidence is not valid base64");
    ev.evidence = std::move(*bytes);
  }
  return ev;
}

Json to_json(const fsm::AuditRecord& rec) {
  return Json{{"tick", rec.logical_time},
              {"object", rec.object_id},
              {"event", to_json(rec.event)},
              {"decision", rec.applied() ? std::string("Applied")
                                         : std::string(fsm::to_string(rec.decision))},
              {"state", fsm::to_string(rec.resulting_state)}};
}

fsm::AuditRecord audit_from_json(const Json& j) {
  fsm::AuditRecord rec;
  rec.logical_time = get_uint(j, "tick");
  rec.object_id = get_string(j, "object");
  rec.event = event_from_json(member(j, "event"));
  const std::string d = get_string(j, "decision");
  if (d == "Applied") {
    rec.decision = fsm::Decision::Allowed;
  } else if (auto parsed = fsm::parse_decision(d)) {
    rec.decision = *parsed;
  } else {
    throw FormatError("unknown audit decision '" + d + "'");
  }
  rec.resulting_state = state_from(j, "state");
  return rec;
}

} // namespace payflow::jsonio
