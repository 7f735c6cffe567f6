#include "payflow/scenario.hpp"

#include "json_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace payflow::scenario {

using jsonio::Json;

std::string Diagnostic::to_string() const {
  std::string s = std::to_string(line) + ":" + std::to_string(column) + ": " + message;
  if (!pointer.empty()) s += " (at " + pointer + ")";
  return s;
}

monitor::ScanConfig Scenario::scan_config() const {
  monitor::ScanConfig c;
  if (!vocabulary.empty()) c.vocabulary = vocabulary;
  for (const auto& o : world.objects) c.object_ids.push_back(o.object_id);
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// Parsing with source positions

/// Input iterator that reports how many characters the parser has consumed.
class CountingIterator {
public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator() = default;
  CountingIterator(const char* p, std::size_t* consumed) : p_(p), consumed_(consumed) {}

  reference operator*() const { return *p_; }
  CountingIterator& operator++() {
    ++p_;
    if (consumed_) ++*consumed_;
    return *this;
  }
  CountingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return p_ == o.p_; }

private:
  const char* p_ = nullptr;
  std::size_t* consumed_ = nullptr;
};

struct Position {
  std::size_t line = 1;
  std::size_t column = 1;
};

class LineIndex {
public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') starts_.push_back(i + 1);
    }
  }
  Position at(std::size_t offset) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    const std::size_t line = std::size_t(it - starts_.begin());
    return {line, offset - starts_[line - 1] + 1};
  }

private:
  std::vector<std::size_t> starts_;
};

std::string escape_pointer_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/// Builds the DOM and remembers where each value starts.
class LocatingSax {
public:
  using number_integer_t = Json::number_integer_t;
  using number_unsigned_t = Json::number_unsigned_t;
  using number_float_t = Json::number_float_t;
  using string_t = Json::string_t;
  using binary_t = Json::binary_t;

  LocatingSax(Json& root, const std::size_t* consumed, const LineIndex& lines)
      : dom_(root, false), consumed_(consumed), lines_(lines) {}

  bool null() { return scalar([&] { return dom_.null(); }); }
  bool boolean(bool v) { return scalar([&] { return dom_.boolean(v); }); }
  bool number_integer(number_integer_t v) { return scalar([&] { return dom_.number_integer(v); }); }
  bool number_unsigned(number_unsigned_t v) {
    return scalar([&] { return dom_.number_unsigned(v); });
  }
  bool number_float(number_float_t v, const string_t& s) {
    return scalar([&] { return dom_.number_float(v, s); });
  }
  bool string(string_t& v) { return scalar([&] { return dom_.string(v); }); }
  bool binary(binary_t& v) { return scalar([&] { return dom_.binary(v); }); }

  bool start_object(std::size_t n) {
    open(false);
    return dom_.start_object(n);
  }
  bool key(string_t& k) {
    frames_.back().key = k;
    return dom_.key(k);
  }
  bool end_object() {
    close();
    return dom_.end_object();
  }
  bool start_array(std::size_t n) {
    open(true);
    return dom_.start_array(n);
  }
  bool end_array() {
    close();
    return dom_.end_array();
  }

  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) {
    error_ = ex.what();
    error_at_ = lines_.at(*consumed_ == 0 ? 0 : *consumed_ - 1);
    return false;
  }

  const std::map<std::string, Position>& locations() const { return locations_; }
  const std::optional<std::string>& error() const { return error_; }
  Position error_at() const { return error_at_; }

private:
  struct Frame {
    bool array = false;
    std::size_t index = 0;
    std::string key;
    std::string pointer;
  };

  std::string child_pointer() const {
    if (frames_.empty()) return "";
    const Frame& f = frames_.back();
    return f.pointer + "/" + (f.array ? std::to_string(f.index) : escape_pointer_token(f.key));
  }

  void mark(const std::string& pointer) {
    locations_.emplace(pointer, lines_.at(*consumed_ == 0 ? 0 : *consumed_ - 1));
  }

  void advance_parent() {
    if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
  }

  template <typename F> bool scalar(F&& f) {
    mark(child_pointer());
    advance_parent();
    return f();
  }

  void open(bool array) {
    std::string p = child_pointer();
    mark(p);
    frames_.push_back({array, 0, "", std::move(p)});
  }

  void close() {
    frames_.pop_back();
    advance_parent();
  }

  nlohmann::detail::json_sax_dom_parser<Json> dom_;
  const std::size_t* consumed_;
  const LineIndex& lines_;
  std::vector<Frame> frames_;
  std::map<std::string, Position> locations_;
  std::optional<std::string> error_;
  Position error_at_;
};

// ---------------------------------------------------------------------------
// Validation

class Checker {
public:
  explicit Checker(const std::map<std::string, Position>& locations) : locations_(locations) {}

  void report(const std::string& pointer, std::string message) {
    std::string p = pointer;
    auto it = locations_.find(p);
    while (it == locations_.end() && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      it = locations_.find(p);
    }
    const Position pos = it == locations_.end() ? Position{} : it->second;
    diagnostics.push_back({pos.line, pos.column, pointer.empty() ? "/" : pointer, std::move(message)});
  }

  void allow_keys(const Json& j, const std::string& pointer,
                  std::initializer_list<std::string_view> keys) {
    for (const auto& [k, v] : j.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        report(pointer + "/" + escape_pointer_token(k), "unknown key '" + k + "'");
      }
    }
  }

  std::optional<std::string> string(const Json& j, const std::string& pointer,
                                    std::string_view key, bool required, std::string_view what) {
    const std::string p = pointer + "/" + std::string(key);
    if (!j.contains(key)) {
      if (required) report(pointer, std::string(what) + " is missing '" + std::string(key) + "'");
      return std::nullopt;
    }
    if (!j.at(key).is_string()) {
      report(p, std::string(what) + ": '" + std::string(key) + "' must be a string");
      return std::nullopt;
    }
    return j.at(key).get<std::string>();
  }

  std::optional<std::int64_t> integer(const Json& j, const std::string& pointer,
                                      std::string_view key, bool required, std::string_view what) {
    const std::string p = pointer + "/" + std::string(key);
    if (!j.contains(key)) {
      if (required) report(pointer, std::string(what) + " is missing '" + std::string(key) + "'");
      return std::nullopt;
    }
    const Json& v = j.at(key);
    if (!v.is_number_integer()) {
      report(p, std::string(what) + ": '" + std::string(key) + "' must be an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  const Json* array(const Json& j, const std::string& pointer, std::string_view key,
                    bool required) {
    if (!j.contains(key)) {
      if (required) report(pointer, "missing '" + std::string(key) + "' array");
      return nullptr;
    }
    if (!j.at(key).is_array()) {
      report(pointer + "/" + std::string(key), "'" + std::string(key) + "' must be an array");
      return nullptr;
    }
    return &j.at(key);
  }

  bool object(const Json& j, const std::string& pointer, std::string_view what) {
    if (j.is_object()) return true;
    report(pointer, std::string(what) + " must be an object");
    return false;
  }

  std::vector<Diagnostic> diagnostics;

private:
  const std::map<std::string, Position>& locations_;
};

bool needs_object(actors::ClientOp op) {
  return op == actors::ClientOp::Pay || op == actors::ClientOp::Return ||
         op == actors::ClientOp::Status || op == actors::ClientOp::Service;
}

Scenario build(const Json& root, Checker& c) {
  Scenario s;
  if (!c.object(root, "", "scenario")) return s;
  c.allow_keys(root, "", {"name", "users", "objects", "gateway", "vocabulary", "clients", "expect"});
  s.name = c.string(root, "", "name", false, "scenario").value_or("scenario");

  std::map<std::string, std::string> passwords;
  if (const Json* users = c.array(root, "", "users", true)) {
    for (std::size_t i = 0; i < users->size(); ++i) {
      const std::string p = "/users/" + std::to_string(i);
      const Json& u = users->at(i);
      if (!c.object(u, p, "user")) continue;
      c.allow_keys(u, p, {"id", "password"});
      const auto id = c.string(u, p, "id", true, "user");
      const auto pw = c.string(u, p, "password", true, "user " + id.value_or("?"));
      if (!id) continue;
      if (id->empty()) {
        c.report(p + "/id", "user id is empty");
        continue;
      }
      if (!passwords.emplace(*id, pw.value_or("")).second) {
        c.report(p + "/id", "duplicate user id '" + *id + "'");
        continue;
      }
      s.world.users.push_back({*id, pw.value_or("")});
    }
  }

  std::set<std::string> objects;
  if (const Json* objs = c.array(root, "", "objects", true)) {
    for (std::size_t i = 0; i < objs->size(); ++i) {
      const std::string p = "/objects/" + std::to_string(i);
      const Json& o = objs->at(i);
      if (!c.object(o, p, "object")) continue;
      c.allow_keys(o, p, {"id", "owner", "amount", "currency"});
      const auto id = c.string(o, p, "id", true, "object");
      const std::string label = "object " + id.value_or("?");
      const auto owner = c.string(o, p, "owner", true, label);
      const auto amount = c.integer(o, p, "amount", true, label);
      const auto currency = c.string(o, p, "currency", true, label);
      bool ok = id && owner && amount && currency;
      if (id && id->empty()) {
        c.report(p + "/id", "object id is empty");
        ok = false;
      }
      if (id && !id->empty() && !objects.insert(*id).second) {
        c.report(p + "/id", "duplicate object id '" + *id + "'");
        ok = false;
      }
      if (owner && !passwords.count(*owner)) {
        c.report(p + "/owner", label + ": owner '" + *owner + "' is not a defined user");
        ok = false;
      }
      if (amount && *amount <= 0) {
        c.report(p + "/amount", label + ": amount must be > 0, got " + std::to_string(*amount));
        ok = false;
      }
      if (currency && currency->empty()) {
        c.report(p + "/currency", label + ": currency is empty");
        ok = false;
      }
      if (ok) s.world.objects.push_back(fsm::make_object(*id, *owner, *amount, *currency));
    }
  }

  if (root.contains("gateway")) {
    const Json& g = root.at("gateway");
    if (c.object(g, "/gateway", "gateway")) {
      c.allow_keys(g, "/gateway", {"id", "latency", "default", "script"});
      if (auto id = c.string(g, "/gateway", "id", false, "gateway")) s.world.gateway_id = *id;
      if (auto lat = c.integer(g, "/gateway", "latency", false, "gateway")) {
        if (*lat < 1) c.report("/gateway/latency", "gateway latency must be >= 1");
        else s.world.policy.latency = Tick(*lat);
      }
      if (auto def = c.string(g, "/gateway", "default", false, "gateway")) {
        if (auto o = actors::parse_gateway_outcome(*def)) s.world.policy.default_outcome = *o;
        else c.report("/gateway/default", "unknown gateway outcome '" + *def + "'");
      }
      if (g.contains("script")) {
        const Json& script = g.at("script");
        if (c.object(script, "/gateway/script", "gateway script")) {
          for (const auto& [obj, list] : script.items()) {
            const std::string p = "/gateway/script/" + escape_pointer_token(obj);
            if (!objects.count(obj)) {
              c.report(p, "gateway script names undefined object '" + obj + "'");
              continue;
            }
            if (!list.is_array()) {
              c.report(p, "gateway script for " + obj + " must be an array");
              continue;
            }
            std::vector<actors::GatewayOutcome> outcomes;
            for (std::size_t i = 0; i < list.size(); ++i) {
              const auto* v = list.at(i).is_string() ? list.at(i).get_ptr<const std::string*>() : nullptr;
              const auto o = v ? actors::parse_gateway_outcome(*v) : std::nullopt;
              if (!o) {
                c.report(p + "/" + std::to_string(i), "object " + obj + ": unknown gateway outcome");
                continue;
              }
              outcomes.push_back(*o);
            }
            s.world.policy.script[obj] = std::move(outcomes);
          }
        }
      }
    }
  }

  if (const Json* vocab = c.array(root, "", "vocabulary", false)) {
    for (std::size_t i = 0; i < vocab->size(); ++i) {
      if (vocab->at(i).is_string()) {
        s.vocabulary.push_back(vocab->at(i).get<std::string>());
      } else {
        c.report("/vocabulary/" + std::to_string(i), "vocabulary entries must be strings");
      }
    }
  }

  std::set<std::string> client_names;
  if (const Json* clients = c.array(root, "", "clients", true)) {
    for (std::size_t i = 0; i < clients->size(); ++i) {
      const std::string p = "/clients/" + std::to_string(i);
      const Json& cj = clients->at(i);
      if (!c.object(cj, p, "client")) continue;
      c.allow_keys(cj, p, {"name", "user", "password", "steps"});
      actors::ClientScript script;
      const auto user = c.string(cj, p, "user", true, "client");
      script.name = c.string(cj, p, "name", false, "client").value_or(user.value_or("client"));
      if (!client_names.insert(script.name).second) {
        c.report(p, "duplicate client name '" + script.name + "'");
      }
      if (user) {
        script.user = *user;
        if (!passwords.count(*user)) {
          c.report(p + "/user", "client " + script.name + ": user '" + *user + "' is not defined");
        } else {
          script.password = passwords.at(*user);
        }
      }
      if (auto pw = c.string(cj, p, "password", false, "client")) script.password = *pw;
      if (const Json* steps = c.array(cj, p, "steps", true)) {
        for (std::size_t k = 0; k < steps->size(); ++k) {
          const std::string sp = p + "/steps/" + std::to_string(k);
          const Json& st = steps->at(k);
          if (!c.object(st, sp, "step")) continue;
          c.allow_keys(st, sp, {"op", "object", "ticks", "mutate"});
          actors::ClientStep step;
          const auto op_name = c.string(st, sp, "op", true, "step");
          if (!op_name) continue;
          const auto op = actors::parse_client_op(*op_name);
          if (!op) {
            c.report(sp + "/op", "unknown op '" + *op_name + "'");
            continue;
          }
          step.op = *op;
          if (needs_object(*op)) {
            const auto obj = c.string(st, sp, "object", true, "step " + *op_name);
            if (obj && !objects.count(*obj)) {
              c.report(sp + "/object", "step " + *op_name + " references undefined object '" + *obj + "'");
            }
            step.object = obj.value_or("");
          }
          if (*op == actors::ClientOp::Wait) {
            const auto ticks = c.integer(st, sp, "ticks", true, "wait step");
            if (ticks && *ticks < 0) c.report(sp + "/ticks", "wait ticks must be >= 0");
            else if (ticks) step.ticks = Tick(*ticks);
          }
          if (const Json* muts = c.array(st, sp, "mutate", false)) {
            for (std::size_t m = 0; m < muts->size(); ++m) {
              const std::string mp = sp + "/mutate/" + std::to_string(m);
              const Json& mj = muts->at(m);
              if (!c.object(mj, mp, "mutation")) continue;
              c.allow_keys(mj, mp, {"kind", "name", "value"});
              const auto kind_name = c.string(mj, mp, "kind", true, "mutation");
              if (!kind_name) continue;
              const auto kind = http::parse_mutation_kind(*kind_name);
              if (!kind) {
                c.report(mp + "/kind", "unknown mutation kind '" + *kind_name + "'");
                continue;
              }
              step.mutate.push_back({*kind, c.string(mj, mp, "name", false, "mutation").value_or(""),
                                     c.string(mj, mp, "value", false, "mutation").value_or("")});
            }
          }
          script.steps.push_back(std::move(step));
        }
      }
      s.clients.push_back(std::move(script));
    }
  }

  if (const Json* expect = c.array(root, "", "expect", false)) {
    for (std::size_t i = 0; i < expect->size(); ++i) {
      const std::string p = "/expect/" + std::to_string(i);
      const Json& e = expect->at(i);
      if (!c.object(e, p, "expectation")) continue;
      c.allow_keys(e, p, {"object", "erp", "portal", "access", "variant"});
      Expectation x;
      const auto obj = c.string(e, p, "object", true, "expectation");
      if (obj && !objects.count(*obj)) {
        c.report(p + "/object", "expectation references undefined object '" + *obj + "'");
      }
      x.object_id = obj.value_or("");
      if (auto st = c.string(e, p, "erp", false, "expectation")) {
        x.erp = fsm::parse_state(*st);
        if (!x.erp) c.report(p + "/erp", "unknown ERP state '" + *st + "'");
      }
      if (auto v = c.string(e, p, "portal", false, "expectation")) {
        x.portal = actors::parse_view(*v);
        if (!x.portal) c.report(p + "/portal", "unknown portal view '" + *v + "'");
      }
      if (e.contains("access")) {
        if (e.at("access").is_boolean()) x.access = e.at("access").get<bool>();
        else c.report(p + "/access", "'access' must be a boolean");
      }
      if (auto v = c.string(e, p, "variant", false, "expectation")) {
        x.variant = actors::parse_variant(*v);
        if (!x.variant) c.report(p + "/variant", "unknown variant '" + *v + "'");
      }
      s.expect.push_back(std::move(x));
    }
  }
  return s;
}

} // namespace

ParseResult parse_scenario(std::string_view text) {
  ParseResult result;
  const LineIndex lines(text);
  std::size_t consumed = 0;
  Json root;
  LocatingSax sax(root, &consumed, lines);
  const CountingIterator first(text.data(), &consumed);
  const CountingIterator last(text.data() + text.size(), nullptr);
  const bool parsed = Json::sax_parse(first, last, &sax);
  if (!parsed || sax.error()) {
    const Position at = sax.error_at();
    result.diagnostics.push_back(
        {at.line, at.column, "", "invalid JSON: " + sax.error().value_or("parse failed")});
    return result;
  }
  Checker c(sax.locations());
  Scenario s = build(root, c);
  result.diagnostics = std::move(c.diagnostics);
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) {
                     return std::tie(a.line, a.column) < std::tie(b.line, b.column);
                   });
  if (result.diagnostics.empty()) result.scenario = std::move(s);
  return result;
}

ParseResult load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult r;
    r.diagnostics.push_back({0, 0, "", "cannot read scenario file '" + path.string() + "'"});
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::vector<Diagnostic> validate_scenario(const std::filesystem::path& path) {
  return load_scenario(path).diagnostics;
}

std::string_view happy_path_json() {
  static constexpr std::string_view kText = R"({
  "name": "happy_path",
  "users": [
    {"id": "alice", "password": "alice-pw"}
  ],
  "objects": [
    {"id": "INV-1001", "owner": "alice", "amount": 125000, "currency": "EUR"}
  ],
  "gateway": {"id": "gw1", "latency": 2, "default": "approve"},
  "vocabulary": ["obj", "user", "password", "receipt"],
  "clients": [
    {
      "name": "alice",
      "user": "alice",
      "steps": [
        {"op": "login"},
        {"op": "invoices"},
        {"op": "pay", "object": "INV-1001"},
        {"op": "wait", "ticks": 10},
        {"op": "return", "object": "INV-1001"},
        {"op": "status", "object": "INV-1001"},
        {"op": "service", "object": "INV-1001"}
      ]
    }
  ],
  "expect": [
    {"object": "INV-1001", "erp": "Settled", "portal": "PaidView", "access": true}
  ]
}
)";
  return kText;
}

Scenario happy_path() {
  auto r = parse_scenario(happy_path_json());
  if (!r.ok()) throw Error("built-in happy path scenario is invalid");
  return std::move(*r.scenario);
}

bool ScenarioOutcome::expectations_hold() const {
  const bool expected = std::all_of(expectations.begin(), expectations.end(),
                                    [](const ExpectationResult& r) { return r.ok; });
  const bool authority = config.variant == actors::Variant::Vulnerable || authority_violations.empty();
  return expected && authority && erp_audit_ok;
}

ScenarioOutcome run_scenario(const Scenario& s, const actors::PortalConfig& config,
                             std::uint64_t seed, std::optional<Tick> reconcile_every) {
  ScenarioOutcome out;
  out.name = s.name;
  out.config = config;
  out.config.flaws = config.effective();
  out.seed = seed;

  actors::Simulation sim(s.world, config, seed);
  std::optional<monitor::PeriodicReconciler> periodic;
  if (reconcile_every) periodic.emplace(*reconcile_every);
  sim.set_observer([&](const actors::Simulation& sm) {
    if (periodic) periodic->observe(sm.portal(), sm.erp(), sm.now());
    for (const auto& [id, r] : sm.portal().records()) {
      if (!r.access_granted) continue;
      if (!sm.erp().contains(id) || !fsm::is_paid(sm.erp().erp_status(id))) {
        out.authority_violations.push_back(sm.now());
        break;
      }
    }
  });
  actors::run_clients(sim, s.clients);
  sim.drain();

  out.end_tick = sim.now();
  if (periodic) out.discrepancies = periodic->findings();
  for (auto& d : monitor::reconcile(sim.portal(), sim.erp(), sim.now())) {
    const bool seen = std::any_of(out.discrepancies.begin(), out.discrepancies.end(),
                                  [&](const monitor::Discrepancy& x) {
                                    return x.object_id == d.object_id && x.kind == d.kind;
                                  });
    if (!seen) out.discrepancies.push_back(std::move(d));
  }
  out.anomalies = monitor::scan_transcript(sim.transcript(), s.scan_config());
  out.erp_audit_ok = sim.erp().verify_audit();

  for (const auto& e : s.expect) {
    if (e.variant && *e.variant != config.variant) continue;
    ExpectationResult r{e, true, ""};
    const auto rec = sim.portal().records().find(e.object_id);
    const fsm::PaymentState erp = sim.erp().erp_status(e.object_id);
    const actors::PortalView view =
        rec == sim.portal().records().end() ? actors::PortalView::Unpaid : rec->second.view;
    const bool access = rec != sim.portal().records().end() && rec->second.access_granted;
    r.actual = "erp=" + std::string(fsm::to_string(erp)) + " portal=" +
               std::string(actors::to_string(view)) + " access=" + (access ? "true" : "false");
    if (e.erp && *e.erp != erp) r.ok = false;
    if (e.portal && *e.portal != view) r.ok = false;
    if (e.access && *e.access != access) r.ok = false;
    out.expectations.push_back(std::move(r));
  }
  out.erp_snapshot = sim.erp().snapshot_json();
  out.transcript = sim.transcript();
  return out;
}

} // namespace payflow::scenario
