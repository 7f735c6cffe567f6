#pragma once

// JSON encoding of core value types, shared by the ERP snapshot, transcripts,
// scenarios and reports. Private to the core library.

#include "payflow/fsm.hpp"

#include <json.hpp>

#include <string_view>

namespace payflow::jsonio {

using Json = nlohmann::ordered_json;

class FormatError : public Error {
public:
  using Error::Error;
};

Json to_json(const fsm::BusinessObject& obj);
fsm::BusinessObject object_from_json(const Json& j);

Json to_json(const fsm::TransitionEvent& ev);
fsm::TransitionEvent event_from_json(const Json& j);

Json to_json(const fsm::AuditRecord& rec);
fsm::AuditRecord audit_from_json(const Json& j);

/// Typed member access; throws FormatError naming the key.
const Json& member(const Json& j, std::string_view key);
std::string get_string(const Json& j, std::string_view key);
std::uint64_t get_uint(const Json& j, std::string_view key);
std::int64_t get_int(const Json& j, std::string_view key);

fsm::PaymentState state_from(const Json& j, std::string_view key);

} // namespace payflow::jsonio
