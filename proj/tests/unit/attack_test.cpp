#include "payflow/attack.hpp"
#include "payflow/codec.hpp"

#include <gtest/gtest.h>

#include <set>

namespace {

using namespace payflow;
using namespace payflow::actors;
using namespace payflow::attack;

// The attacker handle must not expose any privileged object.
template <class T>
concept ExposesPrivilege = requires(T& t) { t.erp(); } || requires(T& t) { t.gateway(); } ||
                           requires(T& t) { t.key(); } || requires(T& t) { t.portal(); } ||
                           requires(T& t) { t.simulation(); } || requires(T& t) { t.sim(); };
static_assert(!ExposesPrivilege<ClientChannel>);
static_assert(!ExposesPrivilege<const ClientChannel>);

LedgerView view_with(PortalView v, bool access, fsm::PaymentState s) {
  LedgerView lv;
  lv.portal.push_back({"M1", v, access});
  lv.erp.push_back({"M1", s, 1});
  // Back every evidence-gated state with consumed gateway evidence.
  const auto backing = [&](evidence::Outcome o, std::uint8_t tag) {
    evidence::Nonce n{};
    n[0] = tag;
    lv.gateway_ledger.push_back({"gw1", "M1", 1, o, n, 0});
    lv.consumed_nonces.push_back(n);
  };
  if (s == fsm::PaymentState::Authorized || fsm::is_paid(s)) backing(evidence::Outcome::Authorized, 1);
  if (fsm::is_paid(s)) backing(evidence::Outcome::Captured, 2);
  return lv;
}

TEST(Goal, PredicateExamples) {
  EXPECT_FALSE(goal_predicate(view_with(PortalView::Unpaid, false, fsm::PaymentState::Created)));
  EXPECT_TRUE(goal_predicate(view_with(PortalView::PaidView, false, fsm::PaymentState::Failed)));
  EXPECT_TRUE(goal_predicate(view_with(PortalView::Unpaid, true, fsm::PaymentState::AuthorizationPending)));
  EXPECT_TRUE(goal_predicate(view_with(PortalView::PaidView, true, fsm::PaymentState::Authorized)));
  EXPECT_FALSE(goal_predicate(view_with(PortalView::PaidView, true, fsm::PaymentState::Captured)));
  EXPECT_FALSE(goal_predicate(view_with(PortalView::PaidView, true, fsm::PaymentState::Settled)));
  EXPECT_FALSE(goal_predicate(view_with(PortalView::PaymentInFlight, false, fsm::PaymentState::Failed)));
  const auto hit = goal_hit(view_with(PortalView::PaidView, false, fsm::PaymentState::Failed));
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->clause, GoalClause::PortalAheadOfErp);
}

TEST(Goal, UnbackedErpStateCounts) {
  auto lv = view_with(PortalView::Unpaid, false, fsm::PaymentState::Authorized);
  EXPECT_FALSE(goal_hit(lv));
  lv.consumed_nonces.clear();
  const auto hit = goal_hit(lv);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->clause, GoalClause::UnbackedErpState);
}

TEST(Strategies, NamesRoundTrip) {
  for (auto s : kAllStrategies) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  }
  EXPECT_FALSE(parse_strategy("S8"));
}

TEST(Strategies, ParameterSpacesMatchTheirEnumerations) {
  const auto cfg = PortalConfig::hardened();
  EXPECT_EQ(parameter_space(StrategyId::S1HeaderTamper, cfg, 0), 63u);
  EXPECT_EQ(parameter_space(StrategyId::S2CookieForge, cfg, 0), 42u);
  EXPECT_EQ(parameter_space(StrategyId::S5ParamSwap, cfg, 0), 20u);
  EXPECT_EQ(parameter_space(StrategyId::S7CallbackReplay, cfg, 0), 16u);
  for (auto s : kAllStrategies) EXPECT_GT(parameter_space(s, cfg, 1), 0u) << to_string(s);
}

TEST(Attack, HeaderTamperBeatsF1) {
  const auto r = run_attack({StrategyId::S1HeaderTamper, 500, 42}, PortalConfig::vulnerable(Flaws::only(Flaw::F1)));
  ASSERT_TRUE(r.success);
  ASSERT_TRUE(r.witness);
  EXPECT_EQ(r.witness->granted_via, GrantSource::ClientSignal);
  EXPECT_LE(r.attempts, r.space);
  EXPECT_TRUE(recheck_witness(*r.witness).ok) << recheck_witness(*r.witness).reason;
}

TEST(Attack, ReturnReplayBeatsF2) {
  const auto r = run_attack({StrategyId::S3ReturnReplay, 500, 42}, PortalConfig::vulnerable(Flaws::only(Flaw::F2)));
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.witness->granted_via, GrantSource::SessionFlags);
}

TEST(Attack, DeferredCheckGrantsBeforeConfirmation) {
  for (std::uint64_t seed : {42u, 43u, 44u, 45u}) {
    bool any = false;
    for (auto s : kAllStrategies) {
      const auto r = run_attack({s, 500, seed}, PortalConfig::vulnerable(Flaws::only(Flaw::F4b)));
      if (!r.success) continue;
      any = true;
      ASSERT_TRUE(r.witness->grant_tick);
      if (r.witness->granted_via != GrantSource::DeferredCheck) continue;
      ASSERT_TRUE(r.witness->confirmation_tick) << to_string(s);
      EXPECT_LT(*r.witness->grant_tick, *r.witness->confirmation_tick);
    }
    EXPECT_TRUE(any) << seed;
  }
}

TEST(Attack, HardenedRefusesEveryTokenTamper) {
  const auto r = run_attack({StrategyId::S6TokenTamper, 500, 42}, PortalConfig::hardened());
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.attempts, std::min(r.space, r.budget));
  EXPECT_GT(r.mutated_requests, 0u);
  EXPECT_EQ(r.refused_requests, r.mutated_requests);
}

TEST(Attack, HardenedRefusesEveryParamSwap) {
  const auto r = run_attack({StrategyId::S5ParamSwap, 500, 42}, PortalConfig::hardened());
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.attempts, r.space);
  EXPECT_GT(r.mutated_requests, 0u);
  EXPECT_EQ(r.refused_requests, r.mutated_requests);
}

TEST(Attack, BudgetCapsAttempts) {
  const auto r = run_attack({StrategyId::S4SequenceSkip, 7, 1}, PortalConfig::hardened());
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.attempts, 7u);
}

TEST(Attack, HardenedSuiteHasNoSuccessesAndNoErpViolations) {
  const auto suite = run_suite(PortalConfig::hardened(), {42, 43, 44});
  EXPECT_EQ(suite.cells.size(), 21u);
  EXPECT_EQ(suite.successes(), 0u);
  EXPECT_EQ(suite.erp_violations(), 0u);
  for (const auto& c : suite.cells) EXPECT_EQ(c.replays_accepted, 0u);
}

TEST(Attack, VulnerableSuiteKeepsTheErpHonest) {
  const auto suite = run_suite(PortalConfig::vulnerable(), {42, 43});
  EXPECT_EQ(suite.successes(), suite.cells.size());
  EXPECT_EQ(suite.erp_violations(), 0u);
  for (const auto& c : suite.cells) {
    ASSERT_TRUE(c.witness);
    EXPECT_EQ(c.witness->clause, GoalClause::PortalAheadOfErp);
  }
}

TEST(Attack, HardeningIsMonotoneOverAllFlawSubsets) {
  const std::vector<std::uint64_t> seeds{42, 43};
  std::map<std::uint8_t, std::set<std::pair<int, std::uint64_t>>> wins;
  for (std::uint8_t bits = 0; bits < 32; ++bits) {
    const auto cfg = PortalConfig::vulnerable(Flaws::from_bits(bits));
    for (auto s : kAllStrategies) {
      for (auto seed : seeds) {
        const auto r = run_attack({s, 500, seed}, cfg);
        if (r.success) wins[bits].insert({int(s), seed});
        EXPECT_EQ(r.erp_violations, 0u);
      }
    }
  }
  EXPECT_TRUE(wins[0].empty());
  for (std::uint8_t a = 0; a < 32; ++a) {
    for (std::uint8_t b = 0; b < 32; ++b) {
      if (!Flaws::from_bits(a).subset_of(Flaws::from_bits(b))) continue;
      for (const auto& w : wins[a]) {
        EXPECT_TRUE(wins[b].count(w)) << "subset " << int(a) << " of " << int(b);
      }
    }
  }
}

TEST(Attack, ClientOnlyReplaysReceiptsItWasShown) {
  for (const auto& cfg : {PortalConfig::vulnerable(), PortalConfig::hardened()}) {
    std::size_t relayed = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const auto run = run_attempt(StrategyId::S7CallbackReplay, cfg, 42, i);
      std::set<std::string> shown;
      for (const auto& [req, resp] : run.exchanges) {
        for (const auto& [k, v] : req.query) {
          if (k != "receipt") continue;
          EXPECT_TRUE(shown.count(v)) << "attempt " << i;
          ++relayed;
        }
        for (const auto& v : http::form_values(resp.body, "receipt")) shown.insert(v);
      }
      EXPECT_EQ(run.replays_accepted, 0u);
      if (cfg.variant == Variant::Hardened) EXPECT_FALSE(run.hit);
    }
    EXPECT_GT(relayed, 0u);
  }
}

TEST(Witness, RecheckAcceptsGenuineAndRejectsTampered) {
  const auto r = run_attack({StrategyId::S2CookieForge, 500, 42}, PortalConfig::vulnerable(Flaws::only(Flaw::F1)));
  ASSERT_TRUE(r.success);
  const auto& w = *r.witness;
  ASSERT_TRUE(recheck_witness(w).ok);

  auto paid = w;
  for (auto& e : paid.snapshot.erp) {
    if (e.object_id == w.object_id) e.state = fsm::PaymentState::Settled;
  }
  EXPECT_FALSE(recheck_witness(paid).ok);

  auto no_grant = w;
  std::erase_if(no_grant.slice, [](const TranscriptRecord& rec) {
    return rec.direction == Direction::PortalToClient;
  });
  EXPECT_FALSE(recheck_witness(no_grant).ok);

  auto late = w;
  late.tick = 0;
  EXPECT_FALSE(recheck_witness(late).ok);

  auto other = w;
  other.object_id = "V1";
  EXPECT_FALSE(recheck_witness(other).ok);

  auto unpaid_portal = w;
  for (auto& p : unpaid_portal.snapshot.portal) {
    p.view = PortalView::Unpaid;
    p.access_granted = false;
  }
  EXPECT_FALSE(recheck_witness(unpaid_portal).ok);
}

TEST(Witness, EveryVulnerableWinRechecks) {
  const auto suite = run_suite(PortalConfig::vulnerable(), {42, 43, 44});
  for (const auto& c : suite.cells) {
    if (!c.success) continue;
    const auto check = recheck_witness(*c.witness);
    EXPECT_TRUE(check.ok) << to_string(c.strategy) << " seed " << c.seed << ": " << check.reason;
  }
}

TEST(Attack, RunsAreDeterministic) {
  const auto a = run_attack({StrategyId::S4SequenceSkip, 500, 42}, PortalConfig::vulnerable());
  const auto b = run_attack({StrategyId::S4SequenceSkip, 500, 42}, PortalConfig::vulnerable());
  EXPECT_EQ(a.attempts, b.attempts);
  EXPECT_EQ(a.success, b.success);
  ASSERT_TRUE(a.witness && b.witness);
  EXPECT_EQ(a.witness->slice, b.witness->slice);
  EXPECT_EQ(a.witness->snapshot, b.witness->snapshot);
}

} // namespace
