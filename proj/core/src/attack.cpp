#include "payflow/attack.hpp"

#include "payflow/codec.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace payflow::attack {

using actors::ClientOp;
using actors::Direction;
using actors::PortalConfig;
using fsm::PaymentState;
using http::HttpRequest;
using http::HttpResponse;
using http::Mutation;
using http::Status;

std::string_view to_string(StrategyId s) {
  switch (s) {
  case StrategyId::S1HeaderTamper: return "S1";
  case StrategyId::S2CookieForge: return "S2";
  case StrategyId::S3ReturnReplay: return "S3";
  case StrategyId::S4SequenceSkip: return "S4";
  case StrategyId::S5ParamSwap: return "S5";
  case StrategyId::S6TokenTamper: return "S6";
  case StrategyId::S7CallbackReplay: return "S7";
  }
  return "?";
}

std::string_view strategy_name(StrategyId s) {
  switch (s) {
  case StrategyId::S1HeaderTamper: return "HeaderTamper";
  case StrategyId::S2CookieForge: return "CookieForge";
  case StrategyId::S3ReturnReplay: return "ReturnReplay";
  case StrategyId::S4SequenceSkip: return "SequenceSkip";
  case StrategyId::S5ParamSwap: return "ParamSwap";
  case StrategyId::S6TokenTamper: return "TokenTamper";
  case StrategyId::S7CallbackReplay: return "CallbackReplay";
  }
  return "?";
}

std::optional<StrategyId> parse_strategy(std::string_view s) {
  for (auto id : kAllStrategies) {
    if (to_string(id) == s || strategy_name(id) == s) return id;
  }
  return std::nullopt;
}

std::string_view to_string(GoalClause c) {
  return c == GoalClause::PortalAheadOfErp ? "PortalAheadOfErp" : "UnbackedErpState";
}

std::optional<GoalClause> parse_goal_clause(std::string_view s) {
  if (s == "PortalAheadOfErp") return GoalClause::PortalAheadOfErp;
  if (s == "UnbackedErpState") return GoalClause::UnbackedErpState;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Goal predicate

namespace {

bool at_least_authorized(PaymentState s) {
  return s == PaymentState::Authorized || fsm::is_paid(s);
}

template <typename Consumed>
bool backed(std::string_view object_id, std::uint32_t attempt, PaymentState state,
            const std::vector<actors::LedgerEntry>& ledger, Consumed&& consumed) {
  const auto has = [&](evidence::Outcome outcome) {
    return std::any_of(ledger.begin(), ledger.end(), [&](const actors::LedgerEntry& e) {
      return e.object_id == object_id && e.attempt_id == attempt && e.outcome == outcome &&
             consumed(e.nonce);
    });
  };
  if (!has(evidence::Outcome::Authorized)) return false;
  return !fsm::is_paid(state) || has(evidence::Outcome::Captured);
}

} // namespace

LedgerView capture(const actors::Portal& portal, const actors::Erp& erp,
                   const actors::Gateway& gateway) {
  LedgerView v;
  for (const auto& [id, r] : portal.records()) {
    v.portal.push_back({id, r.view, r.access_granted});
  }
  for (const auto& o : erp.objects()) v.erp.push_back({o.object_id, o.state, o.attempt_id});
  v.gateway_ledger = gateway.ledger();
  v.consumed_nonces.assign(erp.nonces().consumed().begin(), erp.nonces().consumed().end());
  return v;
}

std::optional<GoalHit> goal_hit(const LedgerView& view) {
  const auto erp_entry = [&](std::string_view id) -> const LedgerView::ErpEntry* {
    for (const auto& e : view.erp) {
      if (e.object_id == id) return &e;
    }
    return nullptr;
  };
  for (const auto& p : view.portal) {
    if (p.view != actors::PortalView::PaidView && !p.access_granted) continue;
    const auto* e = erp_entry(p.object_id);
    if (e == nullptr || !fsm::is_paid(e->state)) {
      return GoalHit{p.object_id, GoalClause::PortalAheadOfErp};
    }
  }
  const std::set<evidence::Nonce> consumed(view.consumed_nonces.begin(),
                                           view.consumed_nonces.end());
  for (const auto& e : view.erp) {
    if (!at_least_authorized(e.state)) continue;
    if (!backed(e.object_id, e.attempt_id, e.state, view.gateway_ledger,
                [&](const evidence::Nonce& n) { return consumed.count(n) != 0; })) {
      return GoalHit{e.object_id, GoalClause::UnbackedErpState};
    }
  }
  return std::nullopt;
}

bool goal_predicate(const LedgerView& view) { return goal_hit(view).has_value(); }

bool erp_integrity_violated(const actors::Erp& erp, const actors::Gateway& gateway) {
  for (const auto& o : erp.objects()) {
    if (!at_least_authorized(o.state)) continue;
    if (!backed(o.object_id, o.attempt_id, o.state, gateway.ledger(),
                [&](const evidence::Nonce& n) { return erp.nonces().contains(n); })) {
      return true;
    }
  }
  return false;
}

std::optional<GoalHit> goal_hit(const actors::Portal& portal, const actors::Erp& erp,
                                const actors::Gateway& gateway) {
  for (const auto& [id, r] : portal.records()) {
    if (!r.claims_paid()) continue;
    if (!erp.contains(id) || !fsm::is_paid(erp.erp_status(id))) {
      return GoalHit{id, GoalClause::PortalAheadOfErp};
    }
  }
  for (const auto& o : erp.objects()) {
    if (!at_least_authorized(o.state)) continue;
    if (!backed(o.object_id, o.attempt_id, o.state, gateway.ledger(),
                [&](const evidence::Nonce& n) { return erp.nonces().contains(n); })) {
      return GoalHit{o.object_id, GoalClause::UnbackedErpState};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Witness re-check

namespace {

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto sp = s.find(' ');
    if (sp != 0) out.push_back(s.substr(0, sp));
    if (sp == std::string_view::npos) break;
    s.remove_prefix(sp + 1);
  }
  return out;
}

bool grants(const actors::TranscriptRecord& r, std::string_view object_id) {
  if (r.direction != Direction::PortalToClient) return false;
  try {
    const auto resp = http::parse_response(r.wire);
    if (http::form_value(resp.body, "obj") != object_id) return false;
    return http::form_value(resp.body, "view") == "PaidView" ||
           http::form_value(resp.body, "service") == "granted";
  } catch (const http::ParseError&) {
    return false;
  }
}

} // namespace

WitnessCheck recheck_witness(const Witness& w) {
  if (w.slice.empty()) return {false, "empty transcript slice"};
  for (std::size_t i = 0; i < w.slice.size(); ++i) {
    if (w.slice[i].tick > w.tick) return {false, "slice runs past the witness tick"};
    if (i > 0 && w.slice[i].tick < w.slice[i - 1].tick) return {false, "slice out of order"};
  }
  const auto hit = goal_hit(w.snapshot);
  if (!hit) return {false, "snapshot does not satisfy the goal"};
  LedgerView only_object = w.snapshot;
  std::erase_if(only_object.portal, [&](const auto& p) { return p.object_id != w.object_id; });
  std::erase_if(only_object.erp, [&](const auto& e) { return e.object_id != w.object_id; });
  const auto object_hit = goal_hit(only_object);
  if (!object_hit || object_hit->clause != w.clause) {
    return {false, "snapshot does not satisfy the goal for " + w.object_id};
  }

  const LedgerView::ErpEntry* snap = nullptr;
  for (const auto& e : w.snapshot.erp) {
    if (e.object_id == w.object_id) snap = &e;
  }

  // Fold the slice's ERP traffic for the object.
  PaymentState state = PaymentState::Created;
  bool granted = false;
  for (const auto& r : w.slice) {
    if (grants(r, w.object_id)) granted = true;
    if (r.direction == Direction::ClientToPortal || r.direction == Direction::PortalToClient) {
      continue;
    }
    HttpRequest req;
    try {
      req = http::parse_request(r.wire);
    } catch (const http::ParseError&) {
      return {false, "unparseable ERP record"};
    }
    if (req.method != http::Method::Post) continue;
    if (http::form_value(req.body, "object") != w.object_id) continue;
    if (req.path == "/erp/retry") {
      if (state != PaymentState::Failed) return {false, "retry recorded outside Failed"};
      state = PaymentState::Created;
      continue;
    }
    const auto parts = words(r.summary);
    if (parts.size() != 4) return {false, "malformed ERP summary '" + r.summary + "'"};
    if (parts[2] != fsm::to_string(fsm::Decision::Allowed)) continue;
    const auto kind = fsm::parse_event_kind(http::form_value(req.body, "kind").value_or(""));
    if (!kind) return {false, "unknown event kind in slice"};
    const auto* rule = fsm::TransitionTable::standard().find(state, *kind);
    if (rule == nullptr) return {false, "slice applies a transition the table forbids"};
    state = rule->to;
    if (parts[3] != fsm::to_string(state)) return {false, "slice summary disagrees with fold"};
  }

  if (w.clause == GoalClause::PortalAheadOfErp) {
    if (!granted) return {false, "no granting response for " + w.object_id + " in slice"};
    if (fsm::is_paid(state)) return {false, "slice shows the ERP paid"};
    if (snap != nullptr && snap->state != state) {
      return {false, "snapshot ERP state differs from the slice fold"};
    }
  } else {
    if (snap == nullptr || snap->state != state || !at_least_authorized(state)) {
      return {false, "slice fold does not reach the unbacked state"};
    }
  }
  return {true, ""};
}

// ---------------------------------------------------------------------------
// World

actors::WorldSpec attack_world(std::uint64_t seed) {
  actors::WorldSpec w;
  w.users = {{std::string(kAttacker), std::string(kAttackerPassword)},
             {"victor", "victor-pw"}};
  w.objects = {fsm::make_object("M1", "mallory", 125000, "EUR"),
               fsm::make_object("M2", "mallory", 100, "EUR"),
               fsm::make_object("V1", "victor", 5000, "EUR")};
  w.gateway_id = "gw1";
  const auto m1 = seed % 2 == 0 ? actors::GatewayOutcome::Decline : actors::GatewayOutcome::Stall;
  w.policy.script["M1"] = std::vector<actors::GatewayOutcome>(16, m1);
  w.policy.script["M2"] = std::vector<actors::GatewayOutcome>(16, actors::GatewayOutcome::Approve);
  w.policy.default_outcome = actors::GatewayOutcome::Approve;
  w.policy.latency = 1 + seed % 4;
  return w;
}

monitor::ScanConfig attack_scan_config() {
  monitor::ScanConfig c;
  c.object_ids = {"M1", "M2", "V1"};
  return c;
}

// ---------------------------------------------------------------------------
// Client channel

ClientChannel::ClientChannel(actors::Simulation& sim, std::string user, std::string password)
    : sim_(sim), agent_(user, user, std::move(password)) {}

http::HttpResponse ClientChannel::login() { return send(build(ClientOp::Login, "")); }

http::HttpRequest ClientChannel::build(ClientOp op, std::string_view object) const {
  return agent_.build(op, object);
}

http::HttpResponse ClientChannel::send(const http::HttpRequest& req) {
  if (stopped()) {
    HttpResponse r;
    r.status = Status::BadRequest;
    return r;
  }
  auto resp = agent_.send(sim_, req);
  exchanges_.emplace_back(req, resp);
  return resp;
}

void ClientChannel::wait(Tick ticks) {
  if (!stopped()) sim_.advance(ticks);
}

Tick ClientChannel::now() const { return sim_.now(); }

bool ClientChannel::stopped() const { return stop_flag_ != nullptr && *stop_flag_; }

// ---------------------------------------------------------------------------
// Strategies

namespace {

constexpr std::array<std::string_view, 7> kHeaderNames{
    "X-Payment-Status", "X-Payment-Result", "X-Paid",           "X-Gateway-Status",
    "X-Order-Status",   "X-Transaction-Status", "X-Payment-State"};
constexpr std::array<std::string_view, 9> kHeaderValues{
    "complete", "success", "paid", "1", "true", "ok", "approved", "captured", "settled"};
constexpr std::array<std::string_view, 7> kCookieNames{
    "pf", "paid", "payment_status", "status", "pstate", "order_paid", "success"};
constexpr std::array<std::string_view, 6> kCookieValues{"1",    "true", "yes",
                                                        "complete", "paid", "ok"};
constexpr std::size_t kTokenFieldTampers = 8;
constexpr std::size_t kSwapForms = 5;
constexpr Tick kSettleWait = 8;

enum Sym : std::uint8_t { kR, kP, kS, kV };

std::vector<std::vector<Sym>> enumerate(std::size_t min_len, std::size_t max_len,
                                        bool (*keep)(const std::vector<Sym>&)) {
  std::vector<std::vector<Sym>> out;
  std::vector<std::vector<Sym>> layer{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<Sym>> next;
    for (const auto& prefix : layer) {
      for (Sym s : {kR, kP, kS, kV}) {
        auto seq = prefix;
        seq.push_back(s);
        next.push_back(std::move(seq));
      }
    }
    layer = std::move(next);
    if (len < min_len) continue;
    for (const auto& seq : layer) {
      if (keep(seq)) out.push_back(seq);
    }
  }
  return out;
}

const std::vector<std::vector<Sym>>& replay_sequences() {
  static const auto seqs = enumerate(2, 5, [](const std::vector<Sym>& s) {
    return s.front() == kR && std::count(s.begin(), s.end(), kR) >= 2;
  });
  return seqs;
}

// S4 walks ops in the order pay, return, status, service.
const std::vector<std::vector<Sym>>& skip_sequences() {
  static const auto seqs = enumerate(1, 5, [](const std::vector<Sym>& s) {
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i] == s[i - 1]) return false;
    }
    return true;
  });
  return seqs;
}

ClientOp skip_op(Sym s) {
  switch (s) {
  case kR: return ClientOp::Pay;
  case kP: return ClientOp::Return;
  case kS: return ClientOp::Status;
  default: return ClientOp::Service;
  }
}

bool claims_paid(const HttpResponse& r) {
  return http::form_value(r.body, "view") == "PaidView" ||
         http::form_value(r.body, "service") == "granted";
}

/// Requests recorded in a clean run: return, pay, status, service for M1.
struct Recon {
  std::array<HttpRequest, 4> requests;
};

Recon recon(const PortalConfig& config, std::uint64_t seed) {
  actors::Simulation sim(attack_world(seed), config, seed);
  actors::ClientAgent agent{std::string(kAttacker), std::string(kAttacker),
                            std::string(kAttackerPassword)};
  agent.send(sim, agent.build(ClientOp::Login));
  Recon r;
  r.requests[kP] = agent.build(ClientOp::Pay, "M1");
  agent.send(sim, r.requests[kP]);
  r.requests[kR] = agent.build(ClientOp::Return, "M1");
  agent.send(sim, r.requests[kR]);
  r.requests[kS] = agent.build(ClientOp::Status, "M1");
  agent.send(sim, r.requests[kS]);
  r.requests[kV] = agent.build(ClientOp::Service, "M1");
  agent.send(sim, r.requests[kV]);
  return r;
}

std::size_t token_length(const PortalConfig& config, std::uint64_t seed) {
  actors::Simulation sim(attack_world(seed), config, seed);
  actors::ClientAgent agent{std::string(kAttacker), std::string(kAttacker),
                            std::string(kAttackerPassword)};
  agent.send(sim, agent.build(ClientOp::Login));
  const auto it = agent.session().cookies.find("pt");
  if (it == agent.session().cookies.end()) return 0;
  const auto raw = codec::base64_decode(it->second);
  return raw ? raw->size() : 0;
}

std::string tamper_token(const std::string& pt, std::size_t index) {
  if (index < kTokenFieldTampers) {
    auto token = evidence::decode_client_token(pt);
    if (!token) return "AAAA";
    switch (index) {
    case 0: token->user_id = "victor"; break;
    case 1:
      if (!token->session_id.empty()) {
        char& c = token->session_id.back();
        c = c == '0' ? '1' : '0';
      }
      break;
    case 2: token->issued_at += 1; break;
    case 3: token->issued_at += 1000; break;
    case 4: token->signature.clear(); break;
    case 5: std::fill(token->signature.begin(), token->signature.end(), 0); break;
    case 6: return "";
    default: return "AAAA";
    }
    return evidence::encode_client_token(*token);
  }
  auto raw = codec::base64_decode(pt).value_or(Bytes{});
  const std::size_t bit = index - kTokenFieldTampers;
  if (bit / 8 < raw.size()) raw[bit / 8] ^= std::uint8_t(1u << (bit % 8));
  return codec::base64_encode(raw);
}

} // namespace

std::size_t parameter_space(StrategyId s, const PortalConfig& config, std::uint64_t seed) {
  switch (s) {
  case StrategyId::S1HeaderTamper: return kHeaderNames.size() * kHeaderValues.size();
  case StrategyId::S2CookieForge: return kCookieNames.size() * kCookieValues.size();
  case StrategyId::S3ReturnReplay: return replay_sequences().size();
  case StrategyId::S4SequenceSkip: return skip_sequences().size();
  case StrategyId::S5ParamSwap: return 2 * 2 * kSwapForms;
  case StrategyId::S6TokenTamper: return kTokenFieldTampers + 8 * token_length(config, seed);
  case StrategyId::S7CallbackReplay: return 2 * 4 * 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Attempt execution

class AttemptRunner {
public:
  AttemptRunner(const PortalConfig& config, std::uint64_t seed)
      : sim_(attack_world(seed), config, seed), reconciler_(1),
        channel_(sim_, std::string(kAttacker), std::string(kAttackerPassword)) {
    channel_.stop_flag_ = &stopped_;
    sim_.set_observer([this](const actors::Simulation& s) { observe(s); });
  }

  AttemptRun run(StrategyId id, std::size_t index, const Recon* recon) {
    execute(id, index, recon);
    AttemptRun out;
    if (hit_) {
      // Let follow-up checks land so the witness can show when the portal
      // first consulted the ERP after granting.
      sim_.advance(2 * sim_.config().recheck_delay + 2);
      out.hit = hit_;
      out.witness = make_witness();
    }
    out.erp_violation = erp_violation_ || !sim_.erp().verify_audit() ||
                        attack::erp_integrity_violated(sim_.erp(), sim_.gateway());
    for (const auto& rec : sim_.erp().audit_log()) {
      if (rec.event.issuer.id == "relay" && rec.applied()) ++out.replays_accepted;
    }
    out.mutated_requests = mutated_;
    out.refused_requests = refused_;
    out.discrepancies = reconciler_.findings();
    out.exchanges = channel_.exchanges();
    out.transcript = sim_.transcript();
    return out;
  }

private:
  void observe(const actors::Simulation& s) {
    reconciler_.observe(s.portal(), s.erp(), s.now());
    if (hit_) return;
    if (auto h = goal_hit(s.portal(), s.erp(), s.gateway())) {
      hit_ = std::move(h);
      hit_tick_ = s.now();
      snapshot_ = capture(s.portal(), s.erp(), s.gateway());
      if (hit_->clause == GoalClause::UnbackedErpState) erp_violation_ = true;
      if (const auto it = s.portal().records().find(hit_->object_id);
          it != s.portal().records().end()) {
        granted_via_ = it->second.granted_via;
        grant_tick_ = it->second.grant_tick;
      }
      stopped_ = true;
    }
  }

  Witness make_witness() const {
    Witness w;
    w.object_id = hit_->object_id;
    w.tick = hit_tick_;
    w.clause = hit_->clause;
    w.snapshot = snapshot_;
    w.slice = sim_.transcript().slice_until(hit_tick_);
    w.granted_via = granted_via_;
    w.grant_tick = grant_tick_;
    const auto& recs = sim_.transcript().records();
    std::optional<std::size_t> grant_index;
    for (std::size_t i = 0; i < recs.size() && recs[i].tick <= hit_tick_; ++i) {
      if (grants(recs[i], w.object_id)) {
        grant_index = i;
        break;
      }
    }
    if (grant_index) {
      const std::string prefix = "status " + w.object_id + " ";
      for (std::size_t i = *grant_index + 1; i < recs.size(); ++i) {
        if (recs[i].direction == Direction::PortalToErp && recs[i].summary.starts_with(prefix)) {
          w.confirmation_tick = recs[i].tick;
          break;
        }
      }
    }
    return w;
  }

  void expect(const HttpResponse& r, std::initializer_list<Status> refused) {
    ++mutated_;
    if (std::find(refused.begin(), refused.end(), r.status) != refused.end()) ++refused_;
  }

  void expect_not_granted(const HttpResponse& r) {
    ++mutated_;
    if (!claims_paid(r)) ++refused_;
  }

  HttpResponse step(ClientOp op, std::string_view object) {
    return channel_.send(channel_.build(op, object));
  }

  void execute(StrategyId id, std::size_t index, const Recon* recon) {
    ClientChannel& c = channel_;
    c.login();
    switch (id) {
    case StrategyId::S1HeaderTamper:
    case StrategyId::S2CookieForge: {
      Mutation m;
      if (id == StrategyId::S1HeaderTamper) {
        m = {Mutation::Kind::SetHeader, std::string(kHeaderNames[index / kHeaderValues.size()]),
             std::string(kHeaderValues[index % kHeaderValues.size()])};
      } else {
        m = {Mutation::Kind::SetCookie, std::string(kCookieNames[index / kCookieValues.size()]),
             std::string(kCookieValues[index % kCookieValues.size()])};
      }
      step(ClientOp::Pay, "M1");
      expect_not_granted(c.send(http::apply_mutation(c.build(ClientOp::Return, "M1"), m)));
      expect_not_granted(c.send(http::apply_mutation(c.build(ClientOp::Service, "M1"), m)));
      break;
    }
    case StrategyId::S3ReturnReplay: {
      for (Sym s : replay_sequences().at(index)) c.send(recon->requests[s]);
      break;
    }
    case StrategyId::S4SequenceSkip: {
      for (Sym s : skip_sequences().at(index)) step(skip_op(s), "M1");
      break;
    }
    case StrategyId::S5ParamSwap: {
      const bool settled_first = index / (2 * kSwapForms) == 1;
      const std::string target = (index % (2 * kSwapForms)) / kSwapForms == 0 ? "M1" : "V1";
      const std::size_t form = index % kSwapForms;
      step(ClientOp::Pay, "M2");
      if (settled_first) c.wait(kSettleWait);
      step(ClientOp::Return, "M2");
      const auto swapped_return = [&] {
        const auto req = http::apply_mutation(c.build(ClientOp::Return, "M2"),
                                              {Mutation::Kind::SetQueryParam, "obj", target});
        expect(c.send(req), {Status::Forbidden, Status::Conflict});
      };
      const auto swapped_service = [&] {
        expect(c.send(c.build(ClientOp::Service, target)), {Status::Forbidden, Status::Conflict});
      };
      switch (form) {
      case 0: swapped_return(); break;
      case 1: swapped_service(); break;
      case 2: swapped_return(); swapped_return(); break;
      case 3: swapped_return(); swapped_service(); break;
      default: swapped_service(); swapped_return(); break;
      }
      break;
    }
    case StrategyId::S6TokenTamper: {
      step(ClientOp::Pay, "M1");
      const std::string pt = c.session().cookies.count("pt") ? c.session().cookies.at("pt") : "";
      const Mutation m{Mutation::Kind::SetCookie, "pt", tamper_token(pt, index)};
      expect(c.send(http::apply_mutation(c.build(ClientOp::Return, "M1"), m)),
             {Status::Unauthorized});
      expect(c.send(http::apply_mutation(c.build(ClientOp::Service, "M1"), m)),
             {Status::Unauthorized});
      break;
    }
    case StrategyId::S7CallbackReplay: {
      const std::string target = index / 8 == 0 ? "M1" : "M2";
      const std::size_t set = index % 4;
      const bool pay_target = (index % 8) / 4 == 1;
      step(ClientOp::Pay, "M2");
      c.wait(kSettleWait);
      const auto status = step(ClientOp::Status, "M2");
      const auto receipts = http::form_values(status.body, "receipt");
      std::vector<std::string> chosen;
      if (!receipts.empty()) {
        const std::string& auth = receipts.front();
        const std::string& cap = receipts.back();
        switch (set) {
        case 0: chosen = {auth}; break;
        case 1: chosen = {cap}; break;
        case 2: chosen = {auth, cap}; break;
        default: chosen = {cap, auth}; break;
        }
      }
      if (pay_target) step(ClientOp::Pay, target);
      auto ret = c.build(ClientOp::Return, target);
      for (const auto& r : chosen) ret.query.emplace_back("receipt", r);
      c.send(ret);
      step(ClientOp::Service, target);
      break;
    }
    }
  }

  actors::Simulation sim_;
  monitor::PeriodicReconciler reconciler_;
  ClientChannel channel_;
  bool stopped_ = false;
  std::optional<GoalHit> hit_;
  Tick hit_tick_ = 0;
  LedgerView snapshot_;
  actors::GrantSource granted_via_ = actors::GrantSource::None;
  std::optional<Tick> grant_tick_;
  bool erp_violation_ = false;
  std::size_t mutated_ = 0;
  std::size_t refused_ = 0;
};

AttemptRun run_attempt(StrategyId s, const PortalConfig& config, std::uint64_t seed,
                       std::size_t index) {
  if (index >= parameter_space(s, config, seed)) throw Error("attempt index out of range");
  std::optional<Recon> r;
  if (s == StrategyId::S3ReturnReplay) r = recon(config, seed);
  AttemptRunner runner(config, seed);
  return runner.run(s, index, r ? &*r : nullptr);
}

AttackResult run_attack(const AttackStrategy& strategy, const PortalConfig& config) {
  AttackResult result;
  result.strategy = strategy.id;
  result.config = config;
  result.config.flaws = config.effective();
  result.seed = strategy.seed;
  result.budget = strategy.budget;
  result.space = parameter_space(strategy.id, config, strategy.seed);

  std::optional<Recon> r;
  if (strategy.id == StrategyId::S3ReturnReplay) r = recon(config, strategy.seed);

  const std::size_t limit = std::min(result.space, strategy.budget);
  for (std::size_t i = 0; i < limit; ++i) {
    AttemptRunner runner(config, strategy.seed);
    auto run = runner.run(strategy.id, i, r ? &*r : nullptr);
    result.attempts = i + 1;
    result.mutated_requests += run.mutated_requests;
    result.refused_requests += run.refused_requests;
    result.replays_accepted += run.replays_accepted;
    if (run.erp_violation) ++result.erp_violations;
    if (run.hit) {
      result.success = true;
      result.witness = std::move(run.witness);
      result.discrepancies = std::move(run.discrepancies);
      result.anomalies = monitor::scan_transcript(run.transcript, attack_scan_config());
      break;
    }
  }
  return result;
}

std::size_t SuiteResult::successes() const {
  return std::size_t(std::count_if(cells.begin(), cells.end(),
                                   [](const AttackResult& r) { return r.success; }));
}

std::size_t SuiteResult::erp_violations() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.erp_violations;
  return n;
}

namespace {

std::vector<AttackResult> sweep(const PortalConfig& config, const std::vector<std::uint64_t>& seeds,
                                std::size_t budget) {
  std::vector<AttackResult> cells;
  for (StrategyId s : kAllStrategies) {
    for (std::uint64_t seed : seeds) cells.push_back(run_attack({s, budget, seed}, config));
  }
  return cells;
}

std::vector<StrategyId> winners(const std::vector<AttackResult>& cells) {
  std::vector<StrategyId> out;
  for (StrategyId s : kAllStrategies) {
    if (std::any_of(cells.begin(), cells.end(),
                    [&](const AttackResult& r) { return r.strategy == s && r.success; })) {
      out.push_back(s);
    }
  }
  return out;
}

} // namespace

SuiteResult run_suite(const PortalConfig& config, const std::vector<std::uint64_t>& seeds,
                      std::size_t budget) {
  SuiteResult suite;
  suite.config = config;
  suite.config.flaws = config.effective();
  suite.seeds = seeds;
  suite.budget = budget;
  suite.cells = sweep(config, seeds, budget);

  const actors::Flaws flaws = config.effective();
  for (actors::Flaw f : actors::kAllFlaws) {
    if (!flaws.has(f)) continue;
    if (flaws == actors::Flaws::only(f)) {
      suite.coverage[f] = winners(suite.cells);
    } else {
      suite.coverage[f] = winners(sweep(PortalConfig::vulnerable(actors::Flaws::only(f)), seeds, budget));
    }
  }
  return suite;
}

} // namespace payflow::attack
