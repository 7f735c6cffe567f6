#pragma once

#include "payflow/erp.hpp"
#include "payflow/portal.hpp"
#include "payflow/transcript.hpp"

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace payflow::monitor {

enum class DiscrepancyKind : std::uint8_t {
  PortalAheadOfErp,
  ErpAheadOfPortal,
  MissingInPortal,
  MissingInErp,
};

std::string_view to_string(DiscrepancyKind k);
std::optional<DiscrepancyKind> parse_discrepancy_kind(std::string_view s);

struct Discrepancy {
  std::string object_id;
  std::optional<actors::PortalView> portal_view;
  bool access_granted = false;
  std::optional<fsm::PaymentState> erp_state;
  DiscrepancyKind kind = DiscrepancyKind::PortalAheadOfErp;
  Tick detected_at = 0;

  bool operator==(const Discrepancy&) const = default;
};

/// Pure comparison of one object's two views; nullopt when they agree.
/// Portal "paid" means PaidView or access granted; ERP "paid" means Captured
/// or Settled. A portal still showing PaymentInFlight is not behind.
std::optional<DiscrepancyKind> classify(const actors::PortalRecord* portal,
                                        const fsm::BusinessObject* erp);

/// One entry per disagreeing object, ordered by object id.
std::vector<Discrepancy> reconcile(std::span<const actors::PortalRecord> portal,
                                   std::span<const fsm::BusinessObject> erp, Tick now);
std::vector<Discrepancy> reconcile(const actors::Portal& portal, const actors::Erp& erp,
                                   Tick now);

/// Reconciles every `every` ticks and keeps the first sighting of each
/// (object, kind) pair.
class PeriodicReconciler {
public:
  explicit PeriodicReconciler(Tick every) : every_(every == 0 ? 1 : every) {}
  void observe(const actors::Portal& portal, const actors::Erp& erp, Tick now);
  const std::vector<Discrepancy>& findings() const { return findings_; }
  std::size_t runs() const { return runs_; }

private:
  Tick every_;
  std::size_t runs_ = 0;
  std::set<std::pair<std::string, DiscrepancyKind>> seen_;
  std::vector<Discrepancy> findings_;
};

enum class AnomalyKind : std::uint8_t {
  PartialFlowRepeat,
  UnexpectedParam,
  OutOfOrderEndpoint,
  DuplicateRequest,
};

std::string_view to_string(AnomalyKind k);
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view s);

struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::DuplicateRequest;
  std::string session_id;
  /// Transcript indices; never empty.
  std::vector<std::size_t> evidence;
  Tick tick = 0;
  std::string object_id;
  std::string detail;

  bool operator==(const AnomalyEvent&) const = default;
};

struct ScanConfig {
  /// k: incomplete payment starts per session before PartialFlowRepeat.
  std::size_t partial_flow_threshold = 3;
  /// w: ticks within which a byte-identical request counts as a duplicate.
  Tick duplicate_window = 10;
  /// Accepted query/form parameter names.
  std::vector<std::string> vocabulary{"obj", "user", "password", "receipt"};
  /// Declared object ids; when non-empty, obj values outside it are unexpected.
  std::vector<std::string> object_ids;
};

class TranscriptOrderError : public Error {
public:
  using Error::Error;
};

/// Looks only at client traffic. Throws TranscriptOrderError when ticks go
/// backwards.
std::vector<AnomalyEvent> scan_transcript(std::span<const actors::TranscriptRecord> records,
                                          const ScanConfig& config = {});
std::vector<AnomalyEvent> scan_transcript(const actors::Transcript& transcript,
                                          const ScanConfig& config = {});

} // namespace payflow::monitor
