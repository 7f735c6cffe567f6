#include "payflow/report.hpp"

#include "json_io.hpp"
#include "payflow/codec.hpp"

#include <algorithm>
#include <sstream>

namespace payflow::report {

using jsonio::Json;

namespace {

Json opt_tick(const std::optional<Tick>& t) { return t ? Json(*t) : Json(nullptr); }

Json flaw_list(actors::Flaws f) {
  Json out = Json::array();
  for (auto flaw : actors::kAllFlaws) {
    if (f.has(flaw)) out.push_back(actors::to_string(flaw));
  }
  return out;
}

Json record_json(const actors::TranscriptRecord& r) {
  return Json{{"tick", r.tick},
              {"dir", actors::to_string(r.direction)},
              {"actor", r.actor},
              {"session", r.session},
              {"wire", codec::base64_encode(std::string_view(r.wire))},
              {"summary", r.summary}};
}

actors::TranscriptRecord record_from(const Json& j) {
  actors::TranscriptRecord r;
  r.tick = jsonio::get_uint(j, "tick");
  const auto dir = actors::parse_direction(jsonio::get_string(j, "dir"));
  if (!dir) throw jsonio::FormatError("unknown transcript direction");
  r.direction = *dir;
  r.actor = jsonio::get_string(j, "actor");
  r.session = jsonio::get_string(j, "session");
  const auto wire = codec::base64_decode(jsonio::get_string(j, "wire"));
  if (!wire) throw jsonio::FormatError("transcript wire is not base64");
  r.wire = codec::to_string(*wire);
  r.summary = jsonio::get_string(j, "summary");
  return r;
}

Json discrepancy_json(const monitor::Discrepancy& d) {
  return Json{{"object", d.object_id},
              {"kind", monitor::to_string(d.kind)},
              {"portal_view", d.portal_view ? Json(actors::to_string(*d.portal_view)) : Json(nullptr)},
              {"access_granted", d.access_granted},
              {"erp_state", d.erp_state ? Json(fsm::to_string(*d.erp_state)) : Json(nullptr)},
              {"detected_at", d.detected_at}};
}

Json anomaly_json(const monitor::AnomalyEvent& a) {
  return Json{{"kind", monitor::to_string(a.kind)},
              {"session", a.session_id},
              {"evidence", a.evidence},
              {"tick", a.tick},
              {"object", a.object_id},
              {"detail", a.detail}};
}

template <typename T, typename F> Json list(const std::vector<T>& v, F&& f) {
  Json out = Json::array();
  for (const auto& x : v) out.push_back(f(x));
  return out;
}

Json ledger_json(const attack::LedgerView& v) {
  Json j;
  j["portal"] = list(v.portal, [](const attack::LedgerView::PortalEntry& p) {
    return Json{{"object", p.object_id}, {"view", actors::to_string(p.view)}, {"access", p.access_granted}};
  });
  j["erp"] = list(v.erp, [](const attack::LedgerView::ErpEntry& e) {
    return Json{{"object", e.object_id}, {"state", fsm::to_string(e.state)}, {"attempt", e.attempt_id}};
  });
  j["gateway_ledger"] = list(v.gateway_ledger, [](const actors::LedgerEntry& e) {
    return Json{{"gateway", e.gateway_id},   {"object", e.object_id},
                {"attempt", e.attempt_id},   {"outcome", evidence::to_string(e.outcome)},
                {"nonce", evidence::to_hex(e.nonce)}, {"minted_at", e.minted_at}};
  });
  j["consumed_nonces"] = list(v.consumed_nonces, [](const evidence::Nonce& n) { return evidence::to_hex(n); });
  return j;
}

evidence::Nonce nonce_from(const std::string& hex) {
  const auto n = evidence::nonce_from_hex(hex);
  if (!n) throw jsonio::FormatError("bad nonce '" + hex + "'");
  return *n;
}

attack::LedgerView ledger_from(const Json& j) {
  attack::LedgerView v;
  for (const Json& p : jsonio::member(j, "portal")) {
    const auto view = actors::parse_view(jsonio::get_string(p, "view"));
    if (!view) throw jsonio::FormatError("unknown portal view");
    const Json& access = jsonio::member(p, "access");
    if (!access.is_boolean()) throw jsonio::FormatError("'access' must be a boolean");
    v.portal.push_back({jsonio::get_string(p, "object"), *view, access.get<bool>()});
  }
  for (const Json& e : jsonio::member(j, "erp")) {
    v.erp.push_back({jsonio::get_string(e, "object"), jsonio::state_from(e, "state"),
                     std::uint32_t(jsonio::get_uint(e, "attempt"))});
  }
  for (const Json& e : jsonio::member(j, "gateway_ledger")) {
    const auto outcome = evidence::parse_outcome(jsonio::get_string(e, "outcome"));
    if (!outcome) throw jsonio::FormatError("unknown evidence outcome");
    v.gateway_ledger.push_back({jsonio::get_string(e, "gateway"), jsonio::get_string(e, "object"),
                                std::uint32_t(jsonio::get_uint(e, "attempt")), *outcome,
                                nonce_from(jsonio::get_string(e, "nonce")),
                                jsonio::get_uint(e, "minted_at")});
  }
  for (const Json& n : jsonio::member(j, "consumed_nonces")) {
    if (!n.is_string()) throw jsonio::FormatError("nonce must be a string");
    v.consumed_nonces.push_back(nonce_from(n.get<std::string>()));
  }
  return v;
}

Json witness_json(const attack::Witness& w) {
  Json j;
  j["object"] = w.object_id;
  j["tick"] = w.tick;
  j["clause"] = attack::to_string(w.clause);
  j["granted_via"] = actors::to_string(w.granted_via);
  j["grant_tick"] = opt_tick(w.grant_tick);
  j["confirmation_tick"] = opt_tick(w.confirmation_tick);
  j["snapshot"] = ledger_json(w.snapshot);
  j["slice"] = list(w.slice, record_json);
  return j;
}

std::optional<Tick> opt_tick_from(const Json& j, std::string_view key) {
  const Json& v = jsonio::member(j, key);
  if (v.is_null()) return std::nullopt;
  return jsonio::get_uint(j, key);
}

attack::Witness witness_from(const Json& j) {
  attack::Witness w;
  w.object_id = jsonio::get_string(j, "object");
  w.tick = jsonio::get_uint(j, "tick");
  const auto clause = attack::parse_goal_clause(jsonio::get_string(j, "clause"));
  if (!clause) throw jsonio::FormatError("unknown goal clause");
  w.clause = *clause;
  const auto via = actors::parse_grant_source(jsonio::get_string(j, "granted_via"));
  if (!via) throw jsonio::FormatError("unknown grant source");
  w.granted_via = *via;
  w.grant_tick = opt_tick_from(j, "grant_tick");
  w.confirmation_tick = opt_tick_from(j, "confirmation_tick");
  w.snapshot = ledger_from(jsonio::member(j, "snapshot"));
  for (const Json& r : jsonio::member(j, "slice")) w.slice.push_back(record_from(r));
  return w;
}

Json config_json(const RunOptions& o) {
  Json j;
  j["variant"] = actors::to_string(o.config.variant);
  j["flaws"] = flaw_list(o.config.effective());
  j["recheck_delay"] = o.config.recheck_delay;
  j["seed"] = o.seed;
  j["scenarios"] = o.scenario_paths;
  j["attack_suite"] = o.attack_suite;
  j["suite_seeds"] = o.suite_seeds;
  j["budget"] = o.budget;
  j["reconcile_every"] = opt_tick(o.reconcile_every);
  return j;
}

Json expectation_json(const scenario::ExpectationResult& r) {
  Json expected;
  const auto& e = r.expectation;
  if (e.erp) expected["erp"] = fsm::to_string(*e.erp);
  if (e.portal) expected["portal"] = actors::to_string(*e.portal);
  if (e.access) expected["access"] = *e.access;
  return Json{{"object", e.object_id}, {"expected", expected}, {"actual", r.actual}, {"ok", r.ok}};
}

Json scenario_json(const scenario::ScenarioOutcome& s) {
  Json j;
  j["name"] = s.name;
  j["variant"] = actors::to_string(s.config.variant);
  j["seed"] = s.seed;
  j["end_tick"] = s.end_tick;
  j["ok"] = s.expectations_hold();
  j["expectations"] = list(s.expectations, expectation_json);
  j["authority_violations"] = s.authority_violations;
  j["erp_audit_ok"] = s.erp_audit_ok;
  j["discrepancies"] = list(s.discrepancies, discrepancy_json);
  j["anomalies"] = list(s.anomalies, anomaly_json);
  j["transcript_records"] = s.transcript.size();
  j["transcript_sha256"] = codec::sha256_hex(s.transcript.to_jsonl());
  j["erp_ledger"] = Json::parse(s.erp_snapshot);
  return j;
}

Json cell_json(const attack::AttackResult& r) {
  Json j;
  j["strategy"] = attack::to_string(r.strategy);
  j["name"] = attack::strategy_name(r.strategy);
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["attempts"] = r.attempts;
  j["space"] = r.space;
  j["budget"] = r.budget;
  j["erp_violations"] = r.erp_violations;
  j["mutated_requests"] = r.mutated_requests;
  j["refused_requests"] = r.refused_requests;
  j["replays_accepted"] = r.replays_accepted;
  j["witness"] = r.witness ? witness_json(*r.witness) : Json(nullptr);
  j["discrepancies"] = list(r.discrepancies, discrepancy_json);
  j["anomalies"] = list(r.anomalies, anomaly_json);
  return j;
}

bool detected(const attack::AttackResult& r) {
  if (!r.witness) return false;
  const auto& obj = r.witness->object_id;
  return std::any_of(r.discrepancies.begin(), r.discrepancies.end(),
                     [&](const monitor::Discrepancy& d) { return d.object_id == obj; }) ||
         !r.anomalies.empty();
}

Json attack_json(const attack::SuiteResult& s) {
  Json j;
  j["seeds"] = s.seeds;
  j["budget"] = s.budget;
  j["cells"] = list(s.cells, cell_json);
  Json coverage = Json::object();
  for (const auto& [flaw, strategies] : s.coverage) {
    Json names = Json::array();
    for (auto id : strategies) names.push_back(attack::to_string(id));
    coverage[std::string(actors::to_string(flaw))] = names;
  }
  j["coverage"] = coverage;
  Json defeating = Json::array();
  for (auto id : attack::kAllStrategies) {
    if (std::any_of(s.cells.begin(), s.cells.end(),
                    [&](const attack::AttackResult& c) { return c.strategy == id && c.success; })) {
      defeating.push_back(attack::to_string(id));
    }
  }
  j["defeating_strategies"] = defeating;
  j["successes"] = s.successes();
  j["cells_total"] = s.cells.size();
  return j;
}

Json build_json(const RunReport& r) {
  Json j;
  j["tool"] = "payflow";
  j["report_version"] = 1;
  j["config"] = config_json(r.options);
  j["seed"] = r.options.seed;
  j["scenarios"] = list(r.scenarios, scenario_json);
  j["attack"] = r.suite ? attack_json(*r.suite) : Json(nullptr);

  Json discrepancies = Json::array();
  Json anomalies = Json::array();
  for (const auto& s : r.scenarios) {
    for (const auto& d : s.discrepancies) {
      Json x = discrepancy_json(d);
      x["source"] = "scenario:" + s.name;
      discrepancies.push_back(std::move(x));
    }
    for (const auto& a : s.anomalies) {
      Json x = anomaly_json(a);
      x["source"] = "scenario:" + s.name;
      anomalies.push_back(std::move(x));
    }
  }
  if (r.suite) {
    for (const auto& c : r.suite->cells) {
      const std::string source = "attack:" + std::string(attack::to_string(c.strategy)) +
                                 "/seed=" + std::to_string(c.seed);
      for (const auto& d : c.discrepancies) {
        Json x = discrepancy_json(d);
        x["source"] = source;
        discrepancies.push_back(std::move(x));
      }
      for (const auto& a : c.anomalies) {
        Json x = anomaly_json(a);
        x["source"] = source;
        anomalies.push_back(std::move(x));
      }
    }
  }
  j["discrepancies"] = discrepancies;
  j["anomalies"] = anomalies;

  const auto& inv = r.invariants;
  j["invariants"] = Json{{"authority_violations", inv.authority_violations},
                         {"erp_integrity_violations", inv.erp_integrity_violations},
                         {"erp_audit_ok", inv.erp_audit_ok},
                         {"witnesses", inv.witnesses},
                         {"witnesses_ok", inv.witnesses_ok},
                         {"undetected_successes", inv.undetected_successes}};
  j["exit_code"] = r.exit_code();
  j["failures"] = r.failures();
  return j;
}

} // namespace

std::vector<std::string> RunReport::failures() const {
  std::vector<std::string> out;
  for (const auto& s : scenarios) {
    for (const auto& e : s.expectations) {
      if (!e.ok) out.push_back("scenario " + s.name + ": " + e.expectation.object_id + " ended " + e.actual);
    }
    if (options.config.variant == actors::Variant::Hardened && !s.authority_violations.empty()) {
      out.push_back("scenario " + s.name + ": access granted ahead of the ERP at tick " +
                    std::to_string(s.authority_violations.front()));
    }
    if (!s.erp_audit_ok) out.push_back("scenario " + s.name + ": ERP audit log does not replay");
  }
  if (suite) {
    const std::size_t wins = suite->successes();
    if (options.config.variant == actors::Variant::Hardened && wins > 0) {
      out.push_back("hardened portal defeated in " + std::to_string(wins) + " attack cells");
    }
    if (options.config.variant == actors::Variant::Vulnerable && wins == 0) {
      out.push_back("no strategy defeated the vulnerable portal");
    }
    if (invariants.erp_integrity_violations > 0) {
      out.push_back(std::to_string(invariants.erp_integrity_violations) +
                    " attempts left the ERP without gateway evidence behind its state");
    }
    if (invariants.witnesses_ok != invariants.witnesses) {
      out.push_back("a success witness does not re-check");
    }
  }
  return out;
}

int RunReport::exit_code() const { return failures().empty() ? 0 : 1; }

RunReport run(const RunOptions& options, const std::vector<scenario::Scenario>& scenarios) {
  RunReport r;
  r.options = options;
  for (const auto& s : scenarios) {
    r.scenarios.push_back(scenario::run_scenario(s, options.config, options.seed, options.reconcile_every));
    const auto& out = r.scenarios.back();
    r.invariants.authority_violations += out.authority_violations.size();
    r.invariants.erp_audit_ok = r.invariants.erp_audit_ok && out.erp_audit_ok;
  }
  if (options.attack_suite) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < options.suite_seeds; ++i) seeds.push_back(options.seed + i);
    r.suite = attack::run_suite(options.config, seeds, options.budget);
    r.invariants.erp_integrity_violations = r.suite->erp_violations();
    for (const auto& c : r.suite->cells) {
      if (!c.success) continue;
      if (c.witness) {
        ++r.invariants.witnesses;
        if (attack::recheck_witness(*c.witness).ok) ++r.invariants.witnesses_ok;
      }
      if (!detected(c)) ++r.invariants.undetected_successes;
    }
  }
  return r;
}

std::string to_json(const RunReport& r) { return build_json(r).dump(2) + "\n"; }

std::string findings_json(const RunReport& r) {
  const Json full = build_json(r);
  Json j{{"discrepancies", full["discrepancies"]}, {"anomalies", full["anomalies"]}};
  return j.dump(2) + "\n";
}

std::string to_text(const RunReport& r) {
  std::ostringstream o;
  const auto& c = r.options.config;
  o << "payflow run: variant=" << actors::to_string(c.variant)
    << " flaws=" << c.effective().to_string() << " seed=" << r.options.seed << "\n";
  for (const auto& s : r.scenarios) {
    o << "scenario " << s.name << ": " << (s.expectations_hold() ? "ok" : "FAILED")
      << " (end tick " << s.end_tick << ", " << s.discrepancies.size() << " discrepancies, "
      << s.anomalies.size() << " anomalies)\n";
    for (const auto& e : s.expectations) {
      o << "  " << (e.ok ? "ok  " : "FAIL") << " " << e.expectation.object_id << ": " << e.actual << "\n";
    }
  }
  if (r.suite) {
    const auto& s = *r.suite;
    o << "attack suite: " << s.successes() << "/" << s.cells.size() << " cells succeeded over "
      << s.seeds.size() << " seeds, budget " << s.budget << "\n";
    for (auto id : attack::kAllStrategies) {
      std::size_t wins = 0, n = 0, attempts = 0;
      for (const auto& cell : s.cells) {
        if (cell.strategy != id) continue;
        ++n;
        attempts += cell.attempts;
        if (cell.success) ++wins;
      }
      o << "  " << attack::to_string(id) << " " << attack::strategy_name(id) << ": " << wins << "/"
        << n << " (attempts " << attempts << ")\n";
    }
    for (const auto& [flaw, ids] : s.coverage) {
      o << "  " << actors::to_string(flaw) << " defeated by:";
      if (ids.empty()) o << " (none)";
      for (auto id : ids) o << " " << attack::to_string(id);
      o << "\n";
    }
  }
  const auto& inv = r.invariants;
  o << "invariants: authority_violations=" << inv.authority_violations
    << " erp_integrity_violations=" << inv.erp_integrity_violations
    << " erp_audit_ok=" << (inv.erp_audit_ok ? "true" : "false") << " witnesses_ok="
    << inv.witnesses_ok << "/" << inv.witnesses << "\n";
  for (const auto& f : r.failures()) o << "failure: " << f << "\n";
  o << "exit " << r.exit_code() << "\n";
  return o.str();
}

std::string witness_to_json(const attack::Witness& w) { return witness_json(w).dump(); }

attack::Witness witness_from_json(std::string_view json) {
  try {
    return witness_from(Json::parse(json));
  } catch (const Json::exception& e) {
    throw jsonio::FormatError(std::string("witness: ") + e.what());
  }
}

VerifyResult verify_report(std::string_view json) {
  VerifyResult v;
  Json root;
  try {
    root = Json::parse(json);
  } catch (const Json::exception& e) {
    v.readable = false;
    v.failures.push_back(std::string("report is not JSON: ") + e.what());
    return v;
  }
  if (!root.is_object() || !root.contains("attack")) {
    v.readable = false;
    v.failures.push_back("report has no attack section");
    return v;
  }
  const Json& attack = root["attack"];
  if (attack.is_null()) return v;
  if (!attack.contains("cells") || !attack["cells"].is_array()) {
    v.failures.push_back("attack section has no cells");
    return v;
  }
  for (std::size_t i = 0; i < attack["cells"].size(); ++i) {
    const Json& cell = attack["cells"][i];
    const std::string label = "cell " + std::to_string(i) + " (" +
                              cell.value("strategy", std::string("?")) + ", seed " +
                              std::to_string(cell.value("seed", 0)) + ")";
    if (!cell.value("success", false)) {
      if (cell.contains("witness") && !cell["witness"].is_null()) {
        v.failures.push_back(label + ": witness on a failed cell");
      }
      continue;
    }
    ++v.successes;
    if (!cell.contains("witness") || cell["witness"].is_null()) {
      v.failures.push_back(label + ": success without witness");
      continue;
    }
    try {
      const auto w = witness_from(cell["witness"]);
      const auto check = attack::recheck_witness(w);
      if (check.ok) {
        ++v.verified;
      } else {
        v.failures.push_back(label + ": " + check.reason);
      }
    } catch (const std::exception& e) {
      v.failures.push_back(label + ": malformed witness: " + e.what());
    }
  }
  return v;
}

} // namespace payflow::report
