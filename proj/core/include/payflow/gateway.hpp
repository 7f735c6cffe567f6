#pragma once

#include "payflow/erp.hpp"
#include "payflow/evidence.hpp"
#include "payflow/fsm.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::actors {

enum class GatewayOutcome : std::uint8_t { Approve, Decline, Stall };

std::string_view to_string(GatewayOutcome o);
std::optional<GatewayOutcome> parse_gateway_outcome(std::string_view s);

struct GatewayPolicy {
  /// Per object: outcome for attempt 1, 2, ...; attempts beyond the script
  /// use default_outcome.
  std::map<std::string, std::vector<GatewayOutcome>, std::less<>> script;
  GatewayOutcome default_outcome = GatewayOutcome::Approve;
  Tick latency = 2;

  GatewayOutcome outcome_for(std::string_view object_id, std::uint32_t attempt_id) const;
};

struct PaymentRequest {
  std::string object_id;
  std::uint32_t attempt_id = 1;
  std::int64_t amount = 0;
  std::string currency;
  Tick requested_at = 0;
};

/// One minted piece of evidence.
struct LedgerEntry {
  std::string gateway_id;
  std::string object_id;
  std::uint32_t attempt_id = 1;
  evidence::Outcome outcome = evidence::Outcome::Authorized;
  evidence::Nonce nonce{};
  Tick minted_at = 0;

  bool operator==(const LedgerEntry&) const = default;
};

struct AuthorizeResult {
  GatewayOutcome outcome = GatewayOutcome::Decline;
  bool accepted = false;
  std::string reason;
};

/// Simulated payment processor. Approvals produce AuthorizeOk after `latency`
/// ticks and Capture one tick later, each with freshly minted evidence; the
/// callbacks go straight to the ERP.
class Gateway {
public:
  Gateway(std::string gateway_id, evidence::SigningKey key, GatewayPolicy policy,
          std::uint64_t nonce_seed);

  /// Declines with a reason when the object is unknown or not awaiting
  /// authorization.
  AuthorizeResult gateway_authorize(const PaymentRequest& request, const Erp& erp);

  /// Callbacks due at or before `now`, in scheduling order. Evidence is
  /// minted at delivery time.
  std::vector<fsm::TransitionEvent> due(Tick now);
  std::optional<Tick> next_due() const;

  const std::string& id() const { return id_; }
  const GatewayPolicy& policy() const { return policy_; }
  const std::vector<LedgerEntry>& ledger() const { return ledger_; }

private:
  struct Scheduled {
    Tick due;
    std::uint64_t seq;
    fsm::EventKind kind;
    PaymentRequest request;
  };

  std::string id_;
  evidence::SigningKey key_;
  GatewayPolicy policy_;
  evidence::NonceGenerator nonces_;
  std::vector<Scheduled> queue_;
  std::uint64_t next_seq_ = 0;
  std::vector<LedgerEntry> ledger_;
};

} // namespace payflow::actors
