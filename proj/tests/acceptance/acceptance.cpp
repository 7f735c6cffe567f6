// Prints one PASS/FAIL line per acceptance criterion; exits 0 only if all pass.
#include "cli.hpp"
#include "declared_table.hpp"

#include "payflow/attack.hpp"
#include "payflow/codec.hpp"
#include "payflow/erp.hpp"
#include "payflow/evidence.hpp"
#include "payflow/monitor.hpp"
#include "payflow/report.hpp"
#include "payflow/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace {

using namespace payflow;
using actors::Flaw;
using actors::Flaws;
using actors::PortalConfig;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Suite runs shared between criteria 2, 3, 4 and 6.
struct SuiteCache {
  std::vector<std::uint64_t> seeds;
  std::optional<attack::SuiteResult> hardened;
  std::map<Flaw, attack::SuiteResult> single;
  std::optional<attack::SuiteResult> all;
};

SuiteCache& cache() {
  static SuiteCache c;
  if (c.seeds.empty()) {
    for (std::uint64_t s = 42; s < 62; ++s) c.seeds.push_back(s);
  }
  return c;
}

std::vector<const attack::SuiteResult*> cached_suites() {
  std::vector<const attack::SuiteResult*> out;
  auto& c = cache();
  if (c.hardened) out.push_back(&*c.hardened);
  for (auto& [f, s] : c.single) out.push_back(&s);
  if (c.all) out.push_back(&*c.all);
  return out;
}

Verdict fsm_closure() {
  const auto start = Clock::now();
  const fsm::EvidenceVerifier accept = [](std::span<const std::uint8_t>, const fsm::EvidenceExpectation&) {
    return true;
  };
  std::size_t tuples = 0, mismatches = 0, allowed = 0;
  for (auto s : fsm::kAllStates) {
    for (auto k : fsm::kAllEventKinds) {
      for (auto a : fsm::kAllActorKinds) {
        for (bool ev : {false, true}) {
          ++tuples;
          auto obj = fsm::make_object("B", "u", 1, "EUR");
          obj.state = s;
          fsm::TransitionEvent e{k, "B", 1, {a, "x"}, std::nullopt, 0};
          if (ev) e.evidence = Bytes{1};
          const auto got = fsm::validate_event(obj, e, accept);
          mismatches += got != testing::expected_decision(s, k, a, ev);
          allowed += got == fsm::Decision::Allowed;
        }
      }
    }
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  return {tuples == 512 && mismatches == 0 && allowed == testing::declared_rows().size() && ms < 1000,
          std::to_string(tuples) + " tuples, " + std::to_string(allowed) + " allowed, " +
              std::to_string(mismatches) + " mismatches"};
}

Verdict hardened_resistance() {
  auto& c = cache();
  const auto start = Clock::now();
  c.hardened = attack::run_suite(PortalConfig::hardened(), c.seeds, 500);
  const auto secs = std::chrono::duration<double>(Clock::now() - start).count();
  const auto wins = c.hardened->successes();
  return {c.hardened->cells.size() == 140 && wins == 0 && secs < 60,
          std::to_string(wins) + "/" + std::to_string(c.hardened->cells.size()) + " cells succeeded"};
}

Verdict vulnerability_demonstration() {
  auto& c = cache();
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (Flaw f : actors::kAllFlaws) {
    report::RunOptions o;
    o.config = PortalConfig::vulnerable(Flaws::only(f));
    o.seed = c.seeds.front();
    o.attack_suite = true;
    o.suite_seeds = c.seeds.size();
    o.scenario_paths = {"builtin:happy_path"};
    const auto rep = report::run(o, {scenario::happy_path()});
    const auto json = report::to_json(rep);
    const auto v = report::verify_report(json);
    std::set<std::string> beaten_by;
    for (const auto& cell : rep.suite->cells) {
      if (cell.success) beaten_by.insert(std::string(attack::to_string(cell.strategy)));
    }
    const bool flaw_ok = !beaten_by.empty() && v.readable && v.ok() && v.verified == v.successes &&
                         v.successes == rep.suite->successes();
    ok &= flaw_ok;
    detail += std::string(actors::to_string(f)) + ":";
    for (const auto& s : beaten_by) detail += s;
    detail += "(" + std::to_string(v.verified) + "/" + std::to_string(v.successes) + " verified) ";
    c.single.emplace(f, *rep.suite);
  }
  const auto secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!detail.empty()) detail.pop_back();
  return {ok && secs < 60, detail};
}

Verdict erp_integrity() {
  auto& c = cache();
  c.all = attack::run_suite(PortalConfig::vulnerable(), c.seeds, 500);
  std::size_t cells = 0, violations = 0, replays = 0;
  for (const auto* s : cached_suites()) {
    cells += s->cells.size();
    violations += s->erp_violations();
    for (const auto& cell : s->cells) replays += cell.replays_accepted;
  }
  return {cells > 0 && violations == 0 && replays == 0,
          std::to_string(violations) + " violations, " + std::to_string(replays) +
              " replays accepted over " + std::to_string(cells) + " cells"};
}

Verdict forgery_resistance() {
  const auto key = evidence::SigningKey::derive("acceptance-gw", 17, evidence::KeyPurpose::GatewayToErp);
  evidence::NonceGenerator gen(23);
  const evidence::EvidencePayload p{"gw1", "INV-1", 1, 125000, "EUR", evidence::Outcome::Authorized, 4};
  const evidence::Expected exp{p.object_id, p.attempt_id, p.amount, p.currency, p.outcome};
  const auto wire = evidence::encode_evidence(evidence::sign_evidence(key, p, gen));
  std::mt19937_64 rng(31337);
  std::size_t accepted = 0;
  for (int i = 0; i < 10000; ++i) {
    Bytes m = wire;
    const std::size_t flips = 1 + rng() % 8;
    std::set<std::size_t> bits;
    while (bits.size() < flips) bits.insert(rng() % (m.size() * 8));
    for (auto b : bits) m[b / 8] ^= std::uint8_t(1u << (b % 8));
    const auto d = evidence::decode_evidence(m);
    evidence::NonceStore fresh;
    if (d && evidence::verify_evidence(key, *d, exp, fresh) == evidence::Verdict::Verified) ++accepted;
  }
  std::size_t replays = 0, replays_rejected = 0;
  evidence::NonceStore store;
  for (int i = 0; i < 1000; ++i) {
    const auto ev = evidence::sign_evidence(key, p, gen);
    if (evidence::verify_evidence(key, ev, exp, store) != evidence::Verdict::Verified) return {false, "fresh evidence refused"};
    ++replays;
    replays_rejected += evidence::verify_evidence(key, ev, exp, store) == evidence::Verdict::NonceReused;
  }
  return {accepted == 0 && replays == replays_rejected,
          std::to_string(accepted) + "/10000 mutations accepted, " + std::to_string(replays_rejected) + "/" +
              std::to_string(replays) + " replays rejected"};
}

Verdict reconciliation() {
  bool exact = true;
  for (std::size_t k : {1u, 3u, 10u}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      actors::WorldSpec w;
      w.users = {{"u", "pw"}};
      for (int i = 0; i < 16; ++i) w.objects.push_back(fsm::make_object("O" + std::to_string(10 + i), "u", 5, "EUR"));
      actors::Simulation sim(w, PortalConfig::hardened(), seed);
      std::vector<std::string> ids;
      for (const auto& o : w.objects) ids.push_back(o.object_id);
      std::mt19937 rng(std::uint32_t(seed + 101 * k));
      std::shuffle(ids.begin(), ids.end(), rng);
      const std::set<std::string> injected(ids.begin(), ids.begin() + std::ptrdiff_t(k));
      for (const auto& id : injected) sim.portal().record(id)->view = actors::PortalView::PaidView;
      std::set<std::string> found;
      for (const auto& d : monitor::reconcile(sim.portal(), sim.erp(), sim.now())) found.insert(d.object_id);
      exact &= found == injected;
    }
  }
  std::size_t happy_findings = 0;
  for (const auto& cfg : {PortalConfig::hardened(), PortalConfig::vulnerable()}) {
    const auto out = scenario::run_scenario(scenario::happy_path(), cfg, 42, Tick{1});
    happy_findings += out.discrepancies.size() + out.anomalies.size();
  }
  std::size_t wins = 0, silent = 0;
  for (const auto* s : cached_suites()) {
    for (const auto& cell : s->cells) {
      if (!cell.success) continue;
      ++wins;
      silent += cell.discrepancies.empty() && cell.anomalies.empty();
    }
  }
  return {exact && happy_findings == 0 && wins > 0 && silent == 0,
          std::string(exact ? "k=1,3,10 exact" : "k injection mismatch") + ", happy path " +
              std::to_string(happy_findings) + " findings, " + std::to_string(silent) + "/" +
              std::to_string(wins) + " wins without a finding"};
}

Verdict determinism() {
  const std::vector<std::string> args{"run", "--variant", "vulnerable", "--attack-suite", "--seed", "42"};
  std::string digests[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    std::ostringstream out, err;
    codes[i] = cli::run_cli(args, out, err);
    digests[i] = codec::sha256_hex(out.str());
  }
  return {codes[0] == 0 && codes[1] == 0 && digests[0] == digests[1],
          "sha256 " + digests[0].substr(0, 16) + (digests[0] == digests[1] ? " == " : " != ") +
              digests[1].substr(0, 16)};
}

Verdict happy_path() {
  bool ok = true;
  std::string detail;
  for (const auto& cfg : {PortalConfig::vulnerable(), PortalConfig::hardened()}) {
    const auto out = scenario::run_scenario(scenario::happy_path(), cfg, 42);
    std::string actual;
    for (const auto& e : out.expectations) actual += e.actual;
    const bool settled = actual.find("erp=Settled") != std::string::npos &&
                         actual.find("portal=PaidView") != std::string::npos;
    ok &= settled && out.expectations_hold() && out.erp_audit_ok;
    detail += std::string(actors::to_string(cfg.variant)) + ": " + actual + "; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"fsm-closure", fsm_closure},
      {"hardened-resistance", hardened_resistance},
      {"vulnerability-demonstration", vulnerability_demonstration},
      {"erp-integrity", erp_integrity},
      {"evidence-forgery-resistance", forgery_resistance},
      {"reconciliation", reconciliation},
      {"determinism", determinism},
      {"happy-path", happy_path},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    std::printf("%s %d %-28s %6lld ms  %s\n", v.pass ? "PASS" : "FAIL", ++n, name.c_str(),
                static_cast<long long>(ms), v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
