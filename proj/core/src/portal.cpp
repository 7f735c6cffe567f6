#include "payflow/portal.hpp"

#include "payflow/codec.hpp"

#include <algorithm>

namespace payflow::actors {

using http::HttpRequest;
using http::HttpResponse;
using http::Status;
using fsm::PaymentState;

std::string_view to_string(Variant v) {
  return v == Variant::Hardened ? "hardened" : "vulnerable";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "hardened") return Variant::Hardened;
  if (s == "vulnerable") return Variant::Vulnerable;
  return std::nullopt;
}

std::string_view to_string(Flaw f) {
  switch (f) {
  case Flaw::F1: return "F1";
  case Flaw::F2: return "F2";
  case Flaw::F3: return "F3";
  case Flaw::F4: return "F4";
  case Flaw::F4b: return "F4b";
  }
  return "?";
}

std::optional<Flaw> parse_flaw(std::string_view s) {
  for (Flaw f : kAllFlaws) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::string Flaws::to_string() const {
  std::string out;
  for (Flaw f : kAllFlaws) {
    if (!has(f)) continue;
    if (!out.empty()) out += ',';
    out += actors::to_string(f);
  }
  return out.empty() ? "none" : out;
}

std::optional<Flaws> Flaws::parse(std::string_view s) {
  Flaws out;
  if (s == "none") return out;
  while (true) {
    const auto comma = s.find(',');
    const auto name = s.substr(0, comma);
    const auto f = parse_flaw(name);
    if (!f) return std::nullopt;
    out = out.with(*f);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string_view to_string(PortalView v) {
  switch (v) {
  case PortalView::Unpaid: return "Unpaid";
  case PortalView::PaymentInFlight: return "PaymentInFlight";
  case PortalView::PaidView: return "PaidView";
  }
  return "?";
}

std::optional<PortalView> parse_view(std::string_view s) {
  for (auto v : {PortalView::Unpaid, PortalView::PaymentInFlight, PortalView::PaidView}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

namespace {

constexpr std::array<GrantSource, 7> kAllSources{
    GrantSource::None,           GrantSource::Erp,
    GrantSource::ClientSignal,   GrantSource::SessionFlags,
    GrantSource::ClientArtifact, GrantSource::UnverifiedRecord,
    GrantSource::DeferredCheck};

HttpResponse respond(Status status, const std::vector<http::Field>& body = {}) {
  HttpResponse r;
  r.status = status;
  if (!body.empty()) {
    r.headers.add("Content-Type", "application/x-www-form-urlencoded");
    r.body = http::encode_form(body);
  }
  return r;
}

bool pending(PaymentState s) {
  return s == PaymentState::PaymentInitiated || s == PaymentState::AuthorizationPending ||
         s == PaymentState::Authorized;
}

// "/status/M1" with prefix "/status/" -> "M1"
std::optional<std::string_view> object_segment(std::string_view path, std::string_view prefix) {
  if (!path.starts_with(prefix)) return std::nullopt;
  const auto id = path.substr(prefix.size());
  if (id.empty() || id.find('/') != std::string_view::npos) return std::nullopt;
  return id;
}

} // namespace

std::string_view to_string(GrantSource g) {
  switch (g) {
  case GrantSource::None: return "none";
  case GrantSource::Erp: return "erp";
  case GrantSource::ClientSignal: return "client-signal";
  case GrantSource::SessionFlags: return "session-flags";
  case GrantSource::ClientArtifact: return "client-artifact";
  case GrantSource::UnverifiedRecord: return "unverified-record";
  case GrantSource::DeferredCheck: return "deferred-check";
  }
  return "?";
}

std::optional<GrantSource> parse_grant_source(std::string_view s) {
  for (auto g : kAllSources) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

std::optional<Flaw> flaw_of(GrantSource g) {
  switch (g) {
  case GrantSource::ClientSignal: return Flaw::F1;
  case GrantSource::SessionFlags: return Flaw::F2;
  case GrantSource::ClientArtifact: return Flaw::F3;
  case GrantSource::UnverifiedRecord: return Flaw::F4;
  case GrantSource::DeferredCheck: return Flaw::F4b;
  default: return std::nullopt;
  }
}

std::string erp_event_wire(const fsm::TransitionEvent& ev) {
  HttpRequest req;
  req.method = http::Method::Post;
  switch (ev.issuer.kind) {
  case fsm::ActorKind::Gateway: req.path = "/erp/callback"; break;
  case fsm::ActorKind::Erp: req.path = "/erp/internal"; break;
  default: req.path = "/erp/events"; break;
  }
  std::vector<http::Field> body{{"kind", std::string(fsm::to_string(ev.kind))},
                                {"object", ev.object_id},
                                {"attempt", std::to_string(ev.attempt_id)},
                                {"issuer", std::string(fsm::to_string(ev.issuer.kind))},
                                {"issuer_id", ev.issuer.id}};
  if (ev.evidence) body.emplace_back("evidence", codec::base64_encode(*ev.evidence));
  req.headers.add("Content-Type", "application/x-www-form-urlencoded");
  req.body = http::encode_form(body);
  return http::serialize_request(req);
}

std::string erp_event_summary(const fsm::AuditRecord& rec) {
  std::string s(fsm::to_string(rec.event.kind));
  s += ' ';
  s += rec.object_id;
  s += '#';
  s += std::to_string(rec.event.attempt_id);
  s += ' ';
  s += fsm::to_string(rec.decision);
  s += ' ';
  s += fsm::to_string(rec.resulting_state);
  return s;
}

Portal::Portal(PortalConfig config, std::vector<User> users, evidence::SigningKey token_key,
               std::uint64_t session_seed)
    : config_(config), flaws_(config.effective()), token_key_(std::move(token_key)),
      rng_(session_seed) {
  if (token_key_.purpose() != evidence::KeyPurpose::PortalClientToken) {
    throw evidence::KeyPurposeError("the portal mints client tokens with a PortalClientToken key");
  }
  config_.flaws = flaws_;
  for (auto& u : users) {
    const std::string id = u.id;
    users_.emplace(id, std::move(u));
  }
}

void Portal::add_record(std::string object_id, std::string owner_user_id) {
  const std::string id = object_id;
  PortalRecord rec;
  rec.object_id = std::move(object_id);
  rec.owner_user_id = std::move(owner_user_id);
  records_.insert_or_assign(id, std::move(rec));
}

PortalRecord* Portal::record(std::string_view id) {
  const auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

const PortalSession* Portal::session(std::string_view session_id) const {
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::string Portal::session_of(const HttpRequest& req) {
  return http::cookie(req, "sid").value_or("");
}

std::optional<Tick> Portal::next_recheck() const {
  std::optional<Tick> best;
  for (const auto& r : rechecks_) {
    if (!best || r.due < *best) best = r.due;
  }
  return best;
}

PaymentState Portal::query(Erp& erp, std::string_view id, const BusContext& bus) {
  const PaymentState s = erp.erp_status(id);
  queries_.push_back({bus.now, std::string(id), s});
  if (bus.transcript) {
    HttpRequest q;
    q.path = "/erp/status/" + std::string(id);
    bus.transcript->append({bus.now, Direction::PortalToErp, "portal", current_session_,
                            http::serialize_request(q),
                            "status " + std::string(id) + " " + std::string(fsm::to_string(s))});
  }
  return s;
}

ErpOutcome Portal::submit(Erp& erp, fsm::TransitionEvent ev, const BusContext& bus) {
  ev.logical_time = bus.now;
  auto out = erp.erp_apply(ev);
  if (bus.transcript) {
    bus.transcript->append({bus.now, Direction::PortalToErp, "portal", current_session_,
                            erp_event_wire(ev), erp_event_summary(out.record)});
  }
  return out;
}

void Portal::grant_view(PortalRecord& rec, GrantSource via, Tick now) {
  if (!rec.claims_paid()) {
    rec.granted_via = via;
    rec.grant_tick = now;
  }
  rec.view = PortalView::PaidView;
  rec.last_update = now;
}

void Portal::grant_access(PortalRecord& rec, GrantSource via, Tick now) {
  if (!rec.claims_paid()) {
    rec.granted_via = via;
    rec.grant_tick = now;
  }
  rec.access_granted = true;
  rec.last_update = now;
}

void Portal::revoke(PortalRecord& rec, Tick now) {
  rec.view = PortalView::Unpaid;
  rec.access_granted = false;
  rec.granted_via = GrantSource::None;
  rec.grant_tick.reset();
  rec.last_update = now;
}

HttpResponse Portal::login(const HttpRequest& req, const BusContext& bus) {
  const auto user = http::form_value(req.body, "user");
  const auto password = http::form_value(req.body, "password");
  if (!user || !password) return respond(Status::BadRequest);
  const auto it = users_.find(*user);
  if (it == users_.end() || it->second.password != *password) {
    return respond(Status::Unauthorized);
  }
  std::string sid;
  do {
    std::array<std::uint8_t, 16> raw{};
    for (std::size_t i = 0; i < raw.size(); i += 8) {
      const std::uint64_t v = rng_();
      for (std::size_t b = 0; b < 8; ++b) raw[i + b] = std::uint8_t(v >> (8 * b));
    }
    sid = codec::hex_encode(raw);
  } while (sessions_.count(sid) != 0);
  const auto token = evidence::mint_client_token(token_key_, *user, sid, bus.now);
  sessions_.emplace(sid, PortalSession{sid, *user});
  auto resp = respond(Status::Ok, {{"user", *user}});
  resp.headers.add("Set-Cookie", "sid=" + sid + "; Path=/; HttpOnly");
  resp.headers.add("Set-Cookie", "pt=" + evidence::encode_client_token(token) + "; Path=/");
  return resp;
}

PortalSession* Portal::authenticate(const HttpRequest& req) {
  const auto sid = http::cookie(req, "sid");
  if (!sid) return nullptr;
  const auto it = sessions_.find(*sid);
  if (it == sessions_.end()) return nullptr;
  if (config_.variant == Variant::Hardened) {
    const auto pt = http::cookie(req, "pt");
    if (!pt) return nullptr;
    const auto token = evidence::decode_client_token(*pt);
    if (!token) return nullptr;
    if (evidence::verify_client_token(token_key_, *token) != evidence::TokenVerdict::Verified) {
      return nullptr;
    }
    if (token->user_id != it->second.user_id || token->session_id != *sid) return nullptr;
  }
  return &it->second;
}

HttpResponse Portal::portal_handle(const HttpRequest& req, Erp& erp, Gateway& gateway,
                                   const BusContext& bus) {
  current_session_ = session_of(req);
  const bool get = req.method == http::Method::Get;
  const bool post = req.method == http::Method::Post;

  if (post && req.path == "/login") return login(req, bus);

  enum class Route { Invoices, Pay, Return, Status, Service };
  Route route;
  std::optional<std::string_view> id;
  if (get && req.path == "/invoices") {
    route = Route::Invoices;
  } else if (get && req.path == "/pay/return") {
    route = Route::Return;
  } else if (post && (id = object_segment(req.path, "/pay/"))) {
    route = Route::Pay;
  } else if (get && (id = object_segment(req.path, "/status/"))) {
    route = Route::Status;
  } else if (get && (id = object_segment(req.path, "/service/"))) {
    route = Route::Service;
  } else {
    return respond(Status::NotFound);
  }

  PortalSession* s = authenticate(req);
  if (s == nullptr) return respond(Status::Unauthorized);

  if (route == Route::Invoices) {
    std::vector<http::Field> body;
    for (const auto& [oid, rec] : records_) {
      if (rec.owner_user_id == s->user_id) body.emplace_back("obj", oid);
    }
    return respond(Status::Ok, body);
  }

  if (route == Route::Return) {
    id = req.query_value("obj");
    if (!id) return respond(Status::BadRequest);
  }
  PortalRecord* rec = record(*id);
  if (rec == nullptr || !erp.contains(*id)) return respond(Status::NotFound);
  if (rec->owner_user_id != s->user_id) return respond(Status::Forbidden);

  switch (route) {
  case Route::Pay: return pay(*rec, *s, erp, gateway, bus);
  case Route::Return: return pay_return(req, *rec, *s, erp, bus);
  case Route::Status: return status(*rec, erp, bus);
  case Route::Service: return service(*rec, *s, erp, bus);
  default: return respond(Status::NotFound);
  }
}

HttpResponse Portal::pay(PortalRecord& rec, PortalSession& s, Erp& erp, Gateway& gw,
                         const BusContext& bus) {
  const bool hardened = config_.variant == Variant::Hardened;
  s.started = true;
  PaymentState state = query(erp, rec.object_id, bus);
  if (state == PaymentState::Failed) {
    erp.open_retry(rec.object_id, bus.now);
    if (bus.transcript) {
      HttpRequest r;
      r.method = http::Method::Post;
      r.path = "/erp/retry";
      r.headers.add("Content-Type", "application/x-www-form-urlencoded");
      const auto attempt = erp.object(rec.object_id).attempt_id;
      r.body = http::encode_form({{"object", rec.object_id},
                                  {"attempt", std::to_string(attempt)}});
      bus.transcript->append({bus.now, Direction::PortalToErp, "portal", current_session_,
                              http::serialize_request(r),
                              "retry " + rec.object_id + "#" + std::to_string(attempt)});
    }
    state = PaymentState::Created;
  }
  if (hardened && state != PaymentState::Created) {
    return respond(Status::Conflict,
                   {{"obj", rec.object_id}, {"erp", std::string(fsm::to_string(state))}});
  }

  const auto& obj = erp.object(rec.object_id);
  const fsm::Actor portal{fsm::ActorKind::Portal, "portal"};
  const auto attempt = obj.attempt_id;
  const auto a = submit(erp, {fsm::EventKind::InitiatePayment, rec.object_id, attempt, portal,
                              std::nullopt, bus.now}, bus);
  const auto b = submit(erp, {fsm::EventKind::ForwardToGateway, rec.object_id, attempt, portal,
                              std::nullopt, bus.now}, bus);
  if (hardened && (!a.record.applied() || !b.record.applied())) {
    return respond(Status::Conflict, {{"obj", rec.object_id}});
  }
  gw.gateway_authorize({rec.object_id, attempt, obj.amount, obj.currency, bus.now}, erp);

  if (hardened || rec.view != PortalView::PaidView) {
    rec.view = PortalView::PaymentInFlight;
    rec.access_granted = false;
    rec.granted_via = GrantSource::None;
    rec.grant_tick.reset();
  }
  rec.last_update = bus.now;

  auto resp = respond(Status::Found);
  resp.headers.add("Location", "/pay/return?obj=" + http::percent_encode(rec.object_id));
  if (flaws_.has(Flaw::F3)) resp.headers.add("Set-Cookie", "pf=1; Path=/");
  return resp;
}

HttpResponse Portal::pay_return(const HttpRequest& req, PortalRecord& rec, PortalSession& s,
                                Erp& erp, const BusContext& bus) {
  for (const auto& [name, value] : req.query) {
    if (name != "receipt") continue;
    const auto bytes = codec::base64_decode(value);
    if (!bytes) continue;
    fsm::EventKind kind = fsm::EventKind::AuthorizeOk;
    if (const auto ev = evidence::decode_evidence(*bytes);
        ev && ev->outcome == evidence::Outcome::Captured) {
      kind = fsm::EventKind::Capture;
    }
    submit(erp, {kind, rec.object_id, erp.object(rec.object_id).attempt_id,
                 fsm::Actor{fsm::ActorKind::Gateway, "relay"}, *bytes, bus.now}, bus);
  }

  if (s.returned) s.confirmed = true;
  s.returned = true;

  const auto body = [&](PortalView v) {
    return std::vector<http::Field>{{"obj", rec.object_id}, {"view", std::string(to_string(v))}};
  };

  if (config_.variant == Variant::Vulnerable) {
    const bool pf = http::cookie(req, "pf") == "1";
    const auto header = req.headers.get("X-Payment-Status");
    const bool header_complete = header && http::iequals(*header, "complete");
    std::optional<GrantSource> via;
    if (flaws_.has(Flaw::F1) && (header_complete || pf)) {
      via = GrantSource::ClientSignal;
    } else if (flaws_.has(Flaw::F3) && pf) {
      via = GrantSource::ClientArtifact;
    } else if (flaws_.has(Flaw::F2) && s.started && s.returned && s.confirmed) {
      via = GrantSource::SessionFlags;
    } else if (flaws_.has(Flaw::F4b) && rec.view == PortalView::PaymentInFlight) {
      via = GrantSource::DeferredCheck;
      const bool scheduled = std::any_of(rechecks_.begin(), rechecks_.end(),
                                         [&](const Recheck& r) { return r.object_id == rec.object_id; });
      if (!scheduled) rechecks_.push_back({bus.now + config_.recheck_delay, rec.object_id});
    }
    if (via) {
      grant_view(rec, *via, bus.now);
      grant_access(rec, *via, bus.now);
      return respond(Status::Ok, body(rec.view));
    }
  }

  const PaymentState state = query(erp, rec.object_id, bus);
  if (fsm::is_paid(state)) {
    grant_view(rec, GrantSource::Erp, bus.now);
    return respond(Status::Ok, body(rec.view));
  }
  if (pending(state)) {
    if (!rec.claims_paid() || config_.variant == Variant::Hardened) {
      rec.view = PortalView::PaymentInFlight;
    }
    rec.last_update = bus.now;
    return respond(Status::Ok, body(rec.view));
  }
  revoke(rec, bus.now);
  if (config_.variant == Variant::Hardened) {
    auto fields = body(rec.view);
    fields.emplace_back("erp", std::string(fsm::to_string(state)));
    return respond(Status::Conflict, fields);
  }
  return respond(Status::Ok, body(rec.view));
}

HttpResponse Portal::status(PortalRecord& rec, Erp& erp, const BusContext& bus) {
  const PaymentState state = query(erp, rec.object_id, bus);
  std::vector<http::Field> body{{"obj", rec.object_id},
                                {"erp", std::string(fsm::to_string(state))},
                                {"view", std::string(to_string(rec.view))}};
  for (const auto& e : erp.accepted_evidence(rec.object_id)) {
    body.emplace_back("receipt", codec::base64_encode(e));
  }
  return respond(Status::Ok, body);
}

HttpResponse Portal::service(PortalRecord& rec, PortalSession& s, Erp& erp,
                             const BusContext& bus) {
  const auto granted = [&] {
    return respond(Status::Ok, {{"obj", rec.object_id}, {"service", "granted"}});
  };
  if (config_.variant == Variant::Vulnerable) {
    if (flaws_.has(Flaw::F2) && s.started && s.returned && s.confirmed) {
      grant_access(rec, GrantSource::SessionFlags, bus.now);
      return granted();
    }
    if (flaws_.has(Flaw::F4) && rec.view != PortalView::Unpaid) {
      grant_access(rec, GrantSource::UnverifiedRecord, bus.now);
      return granted();
    }
  }
  const PaymentState state = query(erp, rec.object_id, bus);
  if (fsm::is_paid(state)) {
    grant_view(rec, GrantSource::Erp, bus.now);
    grant_access(rec, GrantSource::Erp, bus.now);
    return granted();
  }
  return respond(config_.variant == Variant::Hardened ? Status::Conflict : Status::Forbidden,
                 {{"obj", rec.object_id}, {"service", "denied"}});
}

void Portal::step(Erp& erp, const BusContext& bus) {
  if (rechecks_.empty()) return;
  std::vector<Recheck> due;
  std::erase_if(rechecks_, [&](const Recheck& r) {
    if (r.due <= bus.now) {
      due.push_back(r);
      return true;
    }
    return false;
  });
  current_session_.clear();
  for (const auto& r : due) {
    PortalRecord* rec = record(r.object_id);
    if (rec == nullptr || !erp.contains(r.object_id)) continue;
    const PaymentState state = query(erp, r.object_id, bus);
    if (fsm::is_paid(state)) continue;
    if (pending(state)) {
      rechecks_.push_back({bus.now + config_.recheck_delay, r.object_id});
    } else if (rec->granted_via == GrantSource::DeferredCheck) {
      revoke(*rec, bus.now);
    }
  }
}

} // namespace payflow::actors
