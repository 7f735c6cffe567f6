#pragma once

#include "payflow/erp.hpp"
#include "payflow/gateway.hpp"
#include "payflow/http.hpp"
#include "payflow/portal.hpp"
#include "payflow/transcript.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace payflow::actors {

/// Everything needed to build the four actors.
struct WorldSpec {
  std::vector<User> users;
  std::vector<fsm::BusinessObject> objects;
  std::string gateway_id = "gw1";
  GatewayPolicy policy;
  ErpConfig erp;
};

/// Keys, session ids and nonces are all drawn from `seed`, so equal inputs give
/// byte-identical transcripts.
///
/// Each tick runs: gateway deliveries, ERP step (settle, timeout), portal
/// rechecks, at most one client request, then the observer.
class Simulation {
public:
  using Observer = std::function<void(const Simulation&)>;

  Simulation(const WorldSpec& world, PortalConfig config, std::uint64_t seed);

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  Tick now() const { return now_; }

  /// One tick carrying a client request. `actor` names the client in the transcript.
  http::HttpResponse request(const http::HttpRequest& req, std::string_view actor);
  /// One tick with no client traffic.
  void tick();
  /// `n` quiet ticks. Stretches where nothing is scheduled are skipped.
  void advance(Tick n);
  /// Runs quiet ticks until nothing is scheduled, at most `limit` of them.
  void drain(Tick limit = 1000);
  bool idle() const;

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  const Erp& erp() const { return erp_; }
  const Gateway& gateway() const { return gateway_; }
  const Portal& portal() const { return portal_; }
  Portal& portal() { return portal_; }
  const Transcript& transcript() const { return transcript_; }
  const PortalConfig& config() const { return portal_.config(); }
  std::uint64_t seed() const { return seed_; }

private:
  void background();
  void finish_tick();
  std::optional<Tick> next_event() const;

  std::uint64_t seed_;
  Tick now_ = 0;
  Erp erp_;
  Gateway gateway_;
  Portal portal_;
  Transcript transcript_;
  Observer observer_;
};

enum class ClientOp : std::uint8_t { Login, Invoices, Pay, Return, Status, Service, Wait };

std::string_view to_string(ClientOp op);
std::optional<ClientOp> parse_client_op(std::string_view s);

struct ClientStep {
  ClientOp op = ClientOp::Login;
  std::string object;
  Tick ticks = 0; ///< Wait only
  std::vector<http::Mutation> mutate;
};

struct ClientScript {
  std::string name;
  std::string user;
  std::string password;
  std::vector<ClientStep> steps;
};

/// A browser: builds requests for the portal routes and keeps a cookie jar.
class ClientAgent {
public:
  ClientAgent(std::string name, std::string user, std::string password);

  /// Request for `op` with the jar's cookies attached. Wait has no request.
  http::HttpRequest build(ClientOp op, std::string_view object = {}) const;
  /// Sends as-is, then absorbs Set-Cookie headers.
  http::HttpResponse send(Simulation& sim, const http::HttpRequest& req);
  /// build + mutations + send. Duplicate mutations send twice in consecutive ticks.
  std::vector<http::HttpResponse> perform(Simulation& sim, const ClientStep& step);

  const std::string& name() const { return name_; }
  const std::string& user() const { return user_; }
  const http::Session& session() const { return session_; }
  http::Session& session() { return session_; }

private:
  std::string name_;
  std::string user_;
  std::string password_;
  http::Session session_;
};

/// Runs the scripts, interleaving clients one step per tick in listed order.
/// Returns the records appended during the run.
std::vector<TranscriptRecord> run_clients(Simulation& sim, const std::vector<ClientScript>& scripts);
std::vector<TranscriptRecord> client_run(Simulation& sim, const ClientScript& script);

} // namespace payflow::actors
