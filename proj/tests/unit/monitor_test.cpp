#include "payflow/attack.hpp"
#include "payflow/monitor.hpp"
#include "payflow/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

namespace {

using namespace payflow;
using namespace payflow::actors;
using monitor::AnomalyKind;
using monitor::DiscrepancyKind;

WorldSpec wide_world(std::size_t n) {
  WorldSpec w;
  w.users = {{"alice", "alice-pw"}};
  for (std::size_t i = 0; i < n; ++i) {
    w.objects.push_back(fsm::make_object("OBJ-" + std::to_string(100 + i), "alice", 100, "EUR"));
  }
  return w;
}

std::size_t count_kind(const std::vector<monitor::AnomalyEvent>& a, AnomalyKind k) {
  return std::size_t(std::count_if(a.begin(), a.end(), [&](const auto& e) { return e.kind == k; }));
}

TEST(Classify, Examples) {
  PortalRecord rec{"B1", "alice"};
  auto obj = fsm::make_object("B1", "alice", 10, "EUR");
  EXPECT_FALSE(monitor::classify(&rec, &obj));
  rec.view = PortalView::PaidView;
  EXPECT_EQ(monitor::classify(&rec, &obj), DiscrepancyKind::PortalAheadOfErp);
  rec.view = PortalView::Unpaid;
  rec.access_granted = true;
  EXPECT_EQ(monitor::classify(&rec, &obj), DiscrepancyKind::PortalAheadOfErp);
  rec.access_granted = false;
  obj.state = fsm::PaymentState::Settled;
  EXPECT_EQ(monitor::classify(&rec, &obj), DiscrepancyKind::ErpAheadOfPortal);
  rec.view = PortalView::PaymentInFlight;
  obj.state = fsm::PaymentState::AuthorizationPending;
  EXPECT_FALSE(monitor::classify(&rec, &obj));
  EXPECT_EQ(monitor::classify(nullptr, &obj), DiscrepancyKind::MissingInPortal);
  EXPECT_EQ(monitor::classify(&rec, nullptr), DiscrepancyKind::MissingInErp);
}

TEST(Reconcile, MissingEntriesOnEitherSide) {
  std::vector<PortalRecord> portal{{"A", "u"}, {"B", "u"}};
  std::vector<fsm::BusinessObject> erp{fsm::make_object("B", "u", 1, "EUR"),
                                       fsm::make_object("C", "u", 1, "EUR")};
  const auto d = monitor::reconcile(portal, erp, 7);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].object_id, "A");
  EXPECT_EQ(d[0].kind, DiscrepancyKind::MissingInErp);
  EXPECT_EQ(d[1].object_id, "C");
  EXPECT_EQ(d[1].kind, DiscrepancyKind::MissingInPortal);
  EXPECT_EQ(d[1].detected_at, 7u);
}

TEST(Reconcile, ConsistentWorldHasNoFindings) {
  Simulation sim(wide_world(12), PortalConfig::hardened(), 3);
  EXPECT_TRUE(monitor::reconcile(sim.portal(), sim.erp(), sim.now()).empty());
  const auto happy = scenario::run_scenario(scenario::happy_path(), PortalConfig::hardened(), 1);
  EXPECT_TRUE(happy.discrepancies.empty());
  EXPECT_TRUE(happy.anomalies.empty());
}

TEST(Reconcile, InjectedDivergencesAreFoundExactly) {
  for (std::size_t k : {1u, 3u, 10u}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Simulation sim(wide_world(12), PortalConfig::hardened(), seed);
      std::vector<std::string> ids;
      for (const auto& [id, rec] : sim.portal().records()) ids.push_back(id);
      std::mt19937 rng(std::uint32_t(seed * 31 + k));
      std::shuffle(ids.begin(), ids.end(), rng);
      std::set<std::string> injected(ids.begin(), ids.begin() + std::ptrdiff_t(k));
      for (const auto& id : injected) {
        auto* rec = sim.portal().record(id);
        ASSERT_NE(rec, nullptr);
        if (rng() % 2) rec->view = PortalView::PaidView;
        else rec->access_granted = true;
      }
      const auto found = monitor::reconcile(sim.portal(), sim.erp(), sim.now());
      std::set<std::string> got;
      for (const auto& d : found) {
        EXPECT_EQ(d.kind, DiscrepancyKind::PortalAheadOfErp);
        got.insert(d.object_id);
      }
      EXPECT_EQ(found.size(), k);
      EXPECT_EQ(got, injected) << "k=" << k << " seed=" << seed;
    }
  }
}

TEST(Reconcile, IsIdempotentAndPeriodicKeepsFirstSighting) {
  Simulation sim(wide_world(3), PortalConfig::hardened(), 1);
  sim.portal().record("OBJ-101")->view = PortalView::PaidView;
  const auto a = monitor::reconcile(sim.portal(), sim.erp(), 5);
  EXPECT_EQ(a, monitor::reconcile(sim.portal(), sim.erp(), 5));
  monitor::PeriodicReconciler p(2);
  for (Tick t = 0; t < 10; ++t) p.observe(sim.portal(), sim.erp(), t);
  ASSERT_EQ(p.findings().size(), 1u);
  EXPECT_EQ(p.findings()[0].detected_at, 0u);
  EXPECT_EQ(p.runs(), 5u);
}

TEST(Scan, HappyPathHasNoAnomalies) {
  const auto out = scenario::run_scenario(scenario::happy_path(), PortalConfig::vulnerable(), 9);
  EXPECT_TRUE(monitor::scan_transcript(out.transcript).empty());
}

TEST(Scan, ThreeAbandonedStartsRaiseOnePartialFlowRepeat) {
  const auto parsed = scenario::load_scenario(std::string(PAYFLOW_SOURCE_DIR) + "/scenarios/abandoned.json");
  ASSERT_TRUE(parsed.ok());
  const auto out = scenario::run_scenario(*parsed.scenario, PortalConfig::hardened(), 1);
  EXPECT_EQ(count_kind(out.anomalies, AnomalyKind::PartialFlowRepeat), 1u);
  EXPECT_EQ(out.anomalies.size(), 1u);
  for (const auto& a : out.anomalies) EXPECT_FALSE(a.evidence.empty());
}

TEST(Scan, ReturnReplayTranscriptShowsDuplicateAndOutOfOrder) {
  const auto cfg = PortalConfig::vulnerable(Flaws::only(Flaw::F2));
  const auto result = attack::run_attack({attack::StrategyId::S3ReturnReplay, 500, 42}, cfg);
  ASSERT_TRUE(result.success);
  EXPECT_GE(count_kind(result.anomalies, AnomalyKind::DuplicateRequest), 1u);
  EXPECT_GE(count_kind(result.anomalies, AnomalyKind::OutOfOrderEndpoint), 1u);
}

TEST(Scan, UnexpectedParameterIsFlagged) {
  Simulation sim(wide_world(1), PortalConfig::hardened(), 1);
  ClientAgent a{"alice", "alice", "alice-pw"};
  a.send(sim, a.build(ClientOp::Login));
  a.send(sim, http::apply_mutation(a.build(ClientOp::Status, "OBJ-100"),
                                   {http::Mutation::Kind::SetQueryParam, "debug", "1"}));
  const auto found = monitor::scan_transcript(sim.transcript());
  ASSERT_EQ(count_kind(found, AnomalyKind::UnexpectedParam), 1u);
}

TEST(Scan, BackwardsTicksAreRejected) {
  Simulation sim(wide_world(1), PortalConfig::hardened(), 1);
  ClientAgent a{"alice", "alice", "alice-pw"};
  a.send(sim, a.build(ClientOp::Login));
  a.send(sim, a.build(ClientOp::Invoices));
  auto records = sim.transcript().records();
  std::reverse(records.begin(), records.end());
  EXPECT_THROW(monitor::scan_transcript(records), monitor::TranscriptOrderError);
}

TEST(Scan, EverySuccessfulAttackLeavesAFinding) {
  const auto suite = attack::run_suite(PortalConfig::vulnerable(), {42, 43});
  for (const auto& cell : suite.cells) {
    if (!cell.success) continue;
    EXPECT_FALSE(cell.discrepancies.empty() && cell.anomalies.empty())
        << attack::to_string(cell.strategy) << " seed " << cell.seed;
  }
}

} // namespace
