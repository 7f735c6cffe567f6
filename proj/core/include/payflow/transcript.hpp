#pragma once

#include "payflow/common.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::actors {

enum class Direction : std::uint8_t {
  ClientToPortal,
  PortalToClient,
  GatewayToErp,
  PortalToErp,
  ErpInternal,
};

/// "C->P", "P->C", "G->E", "P->E", "E".
std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);

/// One message on the bus. `wire` holds raw HTTP bytes; ERP-side traffic is
/// rendered as pseudo requests to /erp/... so every record parses the same way.
struct TranscriptRecord {
  Tick tick = 0;
  Direction direction = Direction::ClientToPortal;
  std::string actor;
  std::string session;
  std::string wire;
  std::string summary;

  bool operator==(const TranscriptRecord&) const = default;
};

class Transcript {
public:
  void append(TranscriptRecord rec) { records_.push_back(std::move(rec)); }
  const std::vector<TranscriptRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const TranscriptRecord& operator[](std::size_t i) const { return records_[i]; }
  void clear() { records_.clear(); }

  /// Records with tick <= last.
  std::vector<TranscriptRecord> slice_until(Tick last) const;

  /// One JSON object per line; wire bytes as base64.
  std::string to_jsonl() const;
  /// Throws Error naming the offending line.
  static Transcript from_jsonl(std::string_view text);

private:
  std::vector<TranscriptRecord> records_;
};

} // namespace payflow::actors
