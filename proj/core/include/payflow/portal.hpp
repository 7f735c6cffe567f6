#pragma once

#include "payflow/erp.hpp"
#include "payflow/evidence.hpp"
#include "payflow/gateway.hpp"
#include "payflow/http.hpp"
#include "payflow/transcript.hpp"

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::actors {

enum class Variant : std::uint8_t { Vulnerable, Hardened };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

enum class Flaw : std::uint8_t { F1, F2, F3, F4, F4b };

inline constexpr std::array<Flaw, 5> kAllFlaws{Flaw::F1, Flaw::F2, Flaw::F3, Flaw::F4,
                                               Flaw::F4b};

std::string_view to_string(Flaw f);
std::optional<Flaw> parse_flaw(std::string_view s);

/// Set of enabled flaws.
class Flaws {
public:
  constexpr Flaws() = default;
  static constexpr Flaws all() { return Flaws(0x1f); }
  static constexpr Flaws none() { return Flaws(); }
  static Flaws only(Flaw f) { return Flaws().with(f); }

  bool has(Flaw f) const { return bits_ & bit(f); }
  Flaws with(Flaw f) const { return Flaws(bits_ | bit(f)); }
  Flaws without(Flaw f) const { return Flaws(bits_ & ~bit(f)); }
  bool empty() const { return bits_ == 0; }
  bool subset_of(Flaws other) const { return (bits_ & ~other.bits_) == 0; }
  std::uint8_t bits() const { return bits_; }
  static Flaws from_bits(std::uint8_t b) { return Flaws(b & 0x1f); }

  /// "F1,F2"; "none" when empty.
  std::string to_string() const;
  /// Accepts a comma list or "none"; nullopt on an unknown name.
  static std::optional<Flaws> parse(std::string_view s);

  bool operator==(const Flaws&) const = default;

private:
  constexpr explicit Flaws(std::uint8_t b) : bits_(b) {}
  static constexpr std::uint8_t bit(Flaw f) { return std::uint8_t(1u << unsigned(f)); }
  std::uint8_t bits_ = 0;
};

struct PortalConfig {
  Variant variant = Variant::Hardened;
  Flaws flaws;
  /// F4b: ticks between an optimistic grant and the follow-up ERP check.
  Tick recheck_delay = 3;

  static PortalConfig hardened() { return {Variant::Hardened, Flaws::none()}; }
  static PortalConfig vulnerable(Flaws f = Flaws::all()) { return {Variant::Vulnerable, f}; }

  /// Flaws actually in force: always none for Hardened.
  Flaws effective() const { return variant == Variant::Hardened ? Flaws::none() : flaws; }
};

enum class PortalView : std::uint8_t { Unpaid, PaymentInFlight, PaidView };

std::string_view to_string(PortalView v);
std::optional<PortalView> parse_view(std::string_view s);

/// What made the portal show PaidView or grant access.
enum class GrantSource : std::uint8_t {
  None,
  Erp,
  ClientSignal,      ///< F1
  SessionFlags,      ///< F2
  ClientArtifact,    ///< F3
  UnverifiedRecord,  ///< F4
  DeferredCheck,     ///< F4b
};

std::string_view to_string(GrantSource g);
std::optional<GrantSource> parse_grant_source(std::string_view s);
/// The flaw behind a grant source; nullopt for None and Erp.
std::optional<Flaw> flaw_of(GrantSource g);

struct PortalRecord {
  std::string object_id;
  std::string owner_user_id;
  PortalView view = PortalView::Unpaid;
  bool access_granted = false;
  Tick last_update = 0;
  GrantSource granted_via = GrantSource::None;
  std::optional<Tick> grant_tick;

  bool claims_paid() const { return view == PortalView::PaidView || access_granted; }
};

struct User {
  std::string id;
  std::string password;
};

/// Server-side session. The F2 flags are tracked in every variant and only
/// consulted when F2 is enabled.
struct PortalSession {
  std::string session_id;
  std::string user_id;
  bool started = false;
  bool returned = false;
  bool confirmed = false;
};

struct ErpQuery {
  Tick tick;
  std::string object_id;
  fsm::PaymentState state;
};

/// Where the portal writes its side of the bus.
struct BusContext {
  Tick now = 0;
  Transcript* transcript = nullptr;
};

class Portal {
public:
  Portal(PortalConfig config, std::vector<User> users, evidence::SigningKey token_key,
         std::uint64_t session_seed);

  /// Creates an Unpaid record mirroring an ERP object.
  void add_record(std::string object_id, std::string owner_user_id);

  /// Routes: POST /login, GET /invoices, POST /pay/{id}, GET /pay/return?obj=,
  /// GET /status/{id}, GET /service/{id}.
  http::HttpResponse portal_handle(const http::HttpRequest& req, Erp& erp, Gateway& gateway,
                                   const BusContext& bus);

  /// Runs due F4b rechecks.
  void step(Erp& erp, const BusContext& bus);
  std::optional<Tick> next_recheck() const;

  const PortalConfig& config() const { return config_; }
  const std::map<std::string, PortalRecord, std::less<>>& records() const { return records_; }
  /// For fault injection in tests and reconciliation drills.
  PortalRecord* record(std::string_view id);
  const PortalSession* session(std::string_view session_id) const;
  const std::vector<ErpQuery>& erp_queries() const { return queries_; }

  /// Session id attached to a request via its sid cookie, or empty.
  static std::string session_of(const http::HttpRequest& req);

private:
  struct Recheck {
    Tick due;
    std::string object_id;
  };

  http::HttpResponse login(const http::HttpRequest& req, const BusContext& bus);
  PortalSession* authenticate(const http::HttpRequest& req);
  http::HttpResponse pay(PortalRecord& rec, PortalSession& s, Erp& erp, Gateway& gw,
                         const BusContext& bus);
  http::HttpResponse pay_return(const http::HttpRequest& req, PortalRecord& rec,
                                PortalSession& s, Erp& erp, const BusContext& bus);
  http::HttpResponse status(PortalRecord& rec, Erp& erp, const BusContext& bus);
  http::HttpResponse service(PortalRecord& rec, PortalSession& s, Erp& erp,
                             const BusContext& bus);

  fsm::PaymentState query(Erp& erp, std::string_view id, const BusContext& bus);
  ErpOutcome submit(Erp& erp, fsm::TransitionEvent ev, const BusContext& bus);
  void grant_view(PortalRecord& rec, GrantSource via, Tick now);
  void grant_access(PortalRecord& rec, GrantSource via, Tick now);
  void revoke(PortalRecord& rec, Tick now);

  PortalConfig config_;
  Flaws flaws_;
  std::map<std::string, User, std::less<>> users_;
  evidence::SigningKey token_key_;
  std::mt19937_64 rng_;
  std::map<std::string, PortalSession, std::less<>> sessions_;
  std::map<std::string, PortalRecord, std::less<>> records_;
  std::vector<Recheck> rechecks_;
  std::vector<ErpQuery> queries_;
  std::string current_session_;
};

/// Pseudo-request rendering of an ERP-side event, plus its summary line
/// "<Kind> <object>#<attempt> <Decision> <ResultingState>".
std::string erp_event_wire(const fsm::TransitionEvent& ev);
std::string erp_event_summary(const fsm::AuditRecord& rec);

} // namespace payflow::actors
