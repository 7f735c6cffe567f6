#pragma once

#include "payflow/evidence.hpp"
#include "payflow/fsm.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::actors {

struct ErpConfig {
  /// Ticks an object may sit in AuthorizationPending before the ERP fails it.
  Tick timeout_ticks = 100;
  /// The ERP settles this many ticks after capture.
  Tick settle_delay = 1;
};

class UnknownObject : public Error {
public:
  using Error::Error;
};

struct ErpOutcome {
  fsm::Decision decision = fsm::Decision::Allowed;
  fsm::AuditRecord record;
  /// Set when the verifier looked at evidence.
  std::optional<evidence::Verdict> verdict;
};

/// System of record. All state changes go through fsm::apply_transition with
/// gateway-evidence verification bound in; every attempt, accepted or not,
/// lands in the audit log.
class Erp {
public:
  explicit Erp(evidence::SigningKey gateway_key, ErpConfig config = {});

  /// Throws Error on duplicate ids.
  void add_object(fsm::BusinessObject obj, Tick now = 0);

  /// Throws UnknownObject.
  ErpOutcome erp_apply(const fsm::TransitionEvent& event);

  /// Authoritative, read-only. Throws UnknownObject.
  fsm::PaymentState erp_status(std::string_view object_id) const;
  const fsm::BusinessObject& object(std::string_view object_id) const;
  bool contains(std::string_view object_id) const;
  /// Ordered by object id.
  std::vector<fsm::BusinessObject> objects() const;

  /// Opens a fresh attempt on a Failed object.
  void open_retry(std::string_view object_id, Tick now);

  /// Settles captured objects and times out stale authorizations.
  std::vector<ErpOutcome> step(Tick now);
  /// Earliest tick at which step() would act, if any.
  std::optional<Tick> next_deadline() const;

  Tick state_since(std::string_view object_id) const;
  const std::vector<fsm::AuditRecord>& audit_log() const { return audit_; }
  std::vector<fsm::AuditRecord> audit_for(std::string_view object_id) const;
  const evidence::NonceStore& nonces() const { return nonces_; }
  /// Wire bytes of evidence accepted for the object's current attempt.
  const std::vector<Bytes>& accepted_evidence(std::string_view object_id) const;
  const ErpConfig& config() const { return config_; }

  /// True when replaying each object's audit trail reproduces its state.
  bool verify_audit() const;

  /// Objects, audit log and consumed nonces as JSON. restore() rebuilds an
  /// ERP whose replay protection carries over.
  std::string snapshot_json() const;
  static Erp restore(std::string_view json, evidence::SigningKey gateway_key,
                     ErpConfig config = {});

private:
  struct Entry {
    fsm::BusinessObject object;
    Tick state_since = 0;
    std::vector<Bytes> accepted;
  };

  const Entry& entry(std::string_view id) const;
  Entry& entry(std::string_view id);

  evidence::SigningKey key_;
  ErpConfig config_;
  std::map<std::string, Entry, std::less<>> objects_;
  std::vector<fsm::AuditRecord> audit_;
  evidence::NonceStore nonces_;
};

} // namespace payflow::actors
