#include "payflow/simulation.hpp"

#include <algorithm>

namespace payflow::actors {

namespace {

constexpr std::uint64_t kGatewayKeySalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kTokenKeySalt = 0xc2b2ae3d27d4eb4fULL;
constexpr std::uint64_t kNonceSalt = 0x165667b19e3779f9ULL;
constexpr std::uint64_t kSessionSalt = 0x27d4eb2f165667c5ULL;

evidence::SigningKey gateway_key(std::uint64_t seed) {
  return evidence::SigningKey::derive("gw-erp", seed ^ kGatewayKeySalt,
                                      evidence::KeyPurpose::GatewayToErp);
}

Erp make_erp(const WorldSpec& world, std::uint64_t seed) {
  Erp erp(gateway_key(seed), world.erp);
  for (const auto& obj : world.objects) erp.add_object(obj, 0);
  return erp;
}

Portal make_portal(const WorldSpec& world, PortalConfig config, std::uint64_t seed) {
  Portal portal(config, world.users,
                evidence::SigningKey::derive("portal-token", seed ^ kTokenKeySalt,
                                             evidence::KeyPurpose::PortalClientToken),
                seed ^ kSessionSalt);
  for (const auto& obj : world.objects) portal.add_record(obj.object_id, obj.owner_user_id);
  return portal;
}

} // namespace

Simulation::Simulation(const WorldSpec& world, PortalConfig config, std::uint64_t seed)
    : seed_(seed), erp_(make_erp(world, seed)),
      gateway_(world.gateway_id, gateway_key(seed), world.policy, seed ^ kNonceSalt),
      portal_(make_portal(world, config, seed)) {}

void Simulation::background() {
  for (auto& ev : gateway_.due(now_)) {
    const auto out = erp_.erp_apply(ev);
    transcript_.append({now_, Direction::GatewayToErp, gateway_.id(), "", erp_event_wire(ev),
                        erp_event_summary(out.record)});
  }
  for (const auto& out : erp_.step(now_)) {
    transcript_.append({now_, Direction::ErpInternal, "erp", "",
                        erp_event_wire(out.record.event), erp_event_summary(out.record)});
  }
  portal_.step(erp_, BusContext{now_, &transcript_});
}

void Simulation::finish_tick() {
  if (observer_) observer_(*this);
  ++now_;
}

http::HttpResponse Simulation::request(const http::HttpRequest& req, std::string_view actor) {
  background();
  std::string session = Portal::session_of(req);
  transcript_.append({now_, Direction::ClientToPortal, std::string(actor), session,
                      http::serialize_request(req),
                      std::string(http::to_string(req.method)) + " " + req.target()});
  auto resp = portal_.portal_handle(req, erp_, gateway_, BusContext{now_, &transcript_});
  if (session.empty()) {
    for (std::string_view v : resp.headers.get_all("Set-Cookie")) {
      if (auto c = http::parse_set_cookie(v); c && c->first == "sid") session = c->second;
    }
  }
  transcript_.append({now_, Direction::PortalToClient, "portal", session,
                      http::serialize_response(resp),
                      std::to_string(int(resp.status)) + " " +
                          std::string(http::reason_phrase(resp.status))});
  finish_tick();
  return resp;
}

void Simulation::tick() {
  background();
  finish_tick();
}

std::optional<Tick> Simulation::next_event() const {
  std::optional<Tick> best;
  for (auto t : {gateway_.next_due(), erp_.next_deadline(), portal_.next_recheck()}) {
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

bool Simulation::idle() const { return !next_event().has_value(); }

void Simulation::advance(Tick n) {
  const Tick target = now_ + n;
  while (now_ < target) {
    const auto next = next_event();
    if (!next || *next > now_) {
      const Tick jump = next ? std::min(*next, target) : target;
      if (jump > now_) {
        now_ = jump;
        continue;
      }
    }
    tick();
  }
}

void Simulation::drain(Tick limit) {
  const Tick end = now_ + limit;
  while (now_ < end) {
    const auto next = next_event();
    if (!next) return;
    if (*next > now_) now_ = std::min(*next, end);
    if (now_ >= end) return;
    tick();
  }
}

std::string_view to_string(ClientOp op) {
  switch (op) {
  case ClientOp::Login: return "login";
  case ClientOp::Invoices: return "invoices";
  case ClientOp::Pay: return "pay";
  case ClientOp::Return: return "return";
  case ClientOp::Status: return "status";
  case ClientOp::Service: return "service";
  case ClientOp::Wait: return "wait";
  }
  return "?";
}

std::optional<ClientOp> parse_client_op(std::string_view s) {
  for (auto op : {ClientOp::Login, ClientOp::Invoices, ClientOp::Pay, ClientOp::Return,
                  ClientOp::Status, ClientOp::Service, ClientOp::Wait}) {
    if (to_string(op) == s) return op;
  }
  return std::nullopt;
}

ClientAgent::ClientAgent(std::string name, std::string user, std::string password)
    : name_(std::move(name)), user_(std::move(user)), password_(std::move(password)) {
  session_.owner_user_id = user_;
}

http::HttpRequest ClientAgent::build(ClientOp op, std::string_view object) const {
  http::HttpRequest req;
  const std::string id(object);
  switch (op) {
  case ClientOp::Login:
    req.method = http::Method::Post;
    req.path = "/login";
    req.headers.add("Content-Type", "application/x-www-form-urlencoded");
    req.body = http::encode_form({{"user", user_}, {"password", password_}});
    break;
  case ClientOp::Invoices: req.path = "/invoices"; break;
  case ClientOp::Pay:
    req.method = http::Method::Post;
    req.path = "/pay/" + id;
    break;
  case ClientOp::Return:
    req.path = "/pay/return";
    req.query.emplace_back("obj", id);
    break;
  case ClientOp::Status: req.path = "/status/" + id; break;
  case ClientOp::Service: req.path = "/service/" + id; break;
  case ClientOp::Wait: throw Error("wait steps carry no request");
  }
  session_.attach(req);
  return req;
}

http::HttpResponse ClientAgent::send(Simulation& sim, const http::HttpRequest& req) {
  auto resp = sim.request(req, name_);
  session_.absorb(resp);
  return resp;
}

std::vector<http::HttpResponse> ClientAgent::perform(Simulation& sim, const ClientStep& step) {
  if (step.op == ClientOp::Wait) {
    sim.advance(step.ticks);
    return {};
  }
  auto req = build(step.op, step.object);
  std::size_t copies = 1;
  for (const auto& m : step.mutate) {
    if (m.kind == http::Mutation::Kind::Duplicate) {
      ++copies;
    } else {
      req = http::apply_mutation(req, m);
    }
  }
  std::vector<http::HttpResponse> out;
  for (std::size_t i = 0; i < copies; ++i) out.push_back(send(sim, req));
  return out;
}

std::vector<TranscriptRecord> run_clients(Simulation& sim,
                                          const std::vector<ClientScript>& scripts) {
  struct Cursor {
    ClientAgent agent;
    const ClientScript* script;
    std::size_t next = 0;
    Tick ready_at = 0;
  };
  std::vector<Cursor> cursors;
  cursors.reserve(scripts.size());
  for (const auto& s : scripts) {
    cursors.push_back({ClientAgent(s.name, s.user, s.password), &s, 0, sim.now()});
  }
  const std::size_t first_record = sim.transcript().size();
  std::size_t turn = 0;
  while (true) {
    bool remaining = false;
    std::optional<std::size_t> pick;
    for (std::size_t k = 0; k < cursors.size(); ++k) {
      const std::size_t i = (turn + k) % cursors.size();
      const Cursor& c = cursors[i];
      if (c.next >= c.script->steps.size()) continue;
      remaining = true;
      if (c.ready_at <= sim.now()) {
        pick = i;
        break;
      }
    }
    if (!remaining) break;
    if (!pick) {
      Tick wake = ~Tick{0};
      for (const auto& c : cursors) {
        if (c.next < c.script->steps.size()) wake = std::min(wake, c.ready_at);
      }
      sim.advance(wake - sim.now());
      continue;
    }
    Cursor& c = cursors[*pick];
    const ClientStep& step = c.script->steps[c.next++];
    if (step.op == ClientOp::Wait) {
      c.ready_at = sim.now() + step.ticks;
    } else {
      c.agent.perform(sim, step);
    }
    turn = *pick + 1;
  }
  Tick last_wake = sim.now();
  for (const auto& c : cursors) last_wake = std::max(last_wake, c.ready_at);
  sim.advance(last_wake - sim.now());
  const auto& all = sim.transcript().records();
  return {all.begin() + std::ptrdiff_t(first_record), all.end()};
}

std::vector<TranscriptRecord> client_run(Simulation& sim, const ClientScript& script) {
  return run_clients(sim, {script});
}

} // namespace payflow::actors
