#include "payflow/fsm.hpp"

#include "declared_table.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <set>
#include <tuple>

namespace {

using namespace payflow;
using namespace payflow::fsm;
using S = PaymentState;
using K = EventKind;
using A = ActorKind;

using payflow::testing::declared;
using payflow::testing::expected_decision;
const auto& kDeclared = payflow::testing::declared_rows();

BusinessObject object_in(S state) {
  auto o = make_object("B1", "alice", 1000, "EUR");
  o.state = state;
  return o;
}

TransitionEvent event(K kind, A issuer, bool with_evidence) {
  TransitionEvent e;
  e.kind = kind;
  e.object_id = "B1";
  e.issuer = Actor{issuer, "x"};
  if (with_evidence) e.evidence = Bytes{1, 2, 3};
  return e;
}

const EvidenceVerifier kAcceptAll = [](std::span<const std::uint8_t>, const EvidenceExpectation&) {
  return true;
};
const EvidenceVerifier kRejectAll = [](std::span<const std::uint8_t>, const EvidenceExpectation&) {
  return false;
};

TEST(FsmClosure, BruteForceAll512TuplesMatchDeclaredTable) {
  const auto start = std::chrono::steady_clock::now();
  std::size_t allowed = 0;
  std::size_t tuples = 0;
  for (S s : kAllStates) {
    for (K k : kAllEventKinds) {
      for (A a : kAllActorKinds) {
        for (bool ev : {false, true}) {
          ++tuples;
          const Decision expect = expected_decision(s, k, a, ev);
          const Decision got = validate_event(object_in(s), event(k, a, ev), kAcceptAll);
          EXPECT_EQ(got, expect) << to_string(s) << " " << to_string(k) << " " << to_string(a)
                                 << " evidence=" << ev;
          if (got == Decision::Allowed) ++allowed;
        }
      }
    }
  }
  EXPECT_EQ(tuples, 512u);
  EXPECT_EQ(allowed, kDeclared.size());
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(1));
}

TEST(FsmClosure, StandardTableEqualsDeclaredRows) {
  const auto rules = TransitionTable::standard().rules();
  ASSERT_EQ(rules.size(), kDeclared.size());
  for (const auto& r : kDeclared) {
    const auto* rule = TransitionTable::standard().find(r.from, r.kind);
    ASSERT_NE(rule, nullptr);
    EXPECT_EQ(rule->issuer, r.issuer);
    EXPECT_EQ(rule->evidence_required, r.evidence);
    EXPECT_EQ(rule->to, r.to);
  }
}

TEST(FsmClosure, InvalidEvidenceRejectedWhenVerifierSaysNo) {
  EXPECT_EQ(validate_event(object_in(S::AuthorizationPending), event(K::AuthorizeOk, A::Gateway, true),
                           kRejectAll),
            Decision::RejectedInvalidEvidence);
  EXPECT_EQ(validate_event(object_in(S::Authorized), event(K::Capture, A::Gateway, true), kRejectAll),
            Decision::RejectedInvalidEvidence);
}

TEST(AllowedTransitions, Examples) {
  EXPECT_TRUE(allowed_transitions(S::Settled).empty());
  EXPECT_EQ(allowed_transitions(S::Created),
            (std::vector<AllowedTransition>{{K::InitiatePayment, A::Portal, false},
                                            {K::Cancel, A::Portal, false}}));
  EXPECT_EQ(allowed_transitions(S::AuthorizationPending),
            (std::vector<AllowedTransition>{{K::AuthorizeOk, A::Gateway, true},
                                            {K::AuthorizeFail, A::Gateway, false},
                                            {K::Timeout, A::Erp, false}}));
  for (S s : kAllStates) {
    std::size_t n = 0;
    for (const auto& r : kDeclared) n += r.from == s;
    EXPECT_EQ(allowed_transitions(s).size(), n) << to_string(s);
    if (is_terminal(s)) EXPECT_TRUE(allowed_transitions(s).empty());
  }
}

TEST(ValidateEvent, Examples) {
  EXPECT_EQ(validate_event(object_in(S::PaymentInitiated), event(K::Settle, A::Client, false), kAcceptAll),
            Decision::RejectedIllegalTransition);
  // Settle from Captured exists, so a client issuing it is the wrong actor.
  EXPECT_EQ(validate_event(object_in(S::Captured), event(K::Settle, A::Client, false), kAcceptAll),
            Decision::RejectedWrongActor);
  for (K k : kAllEventKinds) {
    EXPECT_EQ(validate_event(object_in(S::Settled), event(k, A::Erp, false), kAcceptAll),
              Decision::RejectedIllegalTransition);
  }
  EXPECT_EQ(validate_event(object_in(S::AuthorizationPending), event(K::AuthorizeOk, A::Gateway, false),
                           kAcceptAll),
            Decision::RejectedMissingEvidence);
}

TEST(ValidateEvent, ObjectMismatchIsACallerError) {
  auto e = event(K::InitiatePayment, A::Portal, false);
  e.object_id = "B2";
  EXPECT_THROW(validate_event(object_in(S::Created), e, kAcceptAll), ObjectMismatch);
  EXPECT_THROW(apply_transition(object_in(S::Created), e, kAcceptAll), ObjectMismatch);
}

TEST(ValidateEvent, StaleAttemptIsIllegal) {
  auto o = object_in(S::AuthorizationPending);
  o.attempt_id = 2;
  auto e = event(K::AuthorizeOk, A::Gateway, true);
  e.attempt_id = 1;
  EXPECT_EQ(validate_event(o, e, kAcceptAll), Decision::RejectedIllegalTransition);
}

TEST(ValidateEvent, ClientNeverAllowed) {
  for (S s : kAllStates) {
    for (K k : kAllEventKinds) {
      for (bool ev : {false, true}) {
        EXPECT_NE(validate_event(object_in(s), event(k, A::Client, ev), kAcceptAll), Decision::Allowed);
      }
    }
  }
}

TEST(ApplyTransition, Examples) {
  auto r = apply_transition(object_in(S::Created), event(K::InitiatePayment, A::Portal, false), kAcceptAll);
  EXPECT_EQ(r.object.state, S::PaymentInitiated);
  EXPECT_EQ(r.record.decision, Decision::Allowed);
  EXPECT_EQ(r.record.resulting_state, S::PaymentInitiated);

  r = apply_transition(object_in(S::Captured), event(K::Settle, A::Erp, false), kAcceptAll);
  EXPECT_EQ(r.object.state, S::Settled);

  r = apply_transition(object_in(S::Authorized), event(K::AuthorizeOk, A::Gateway, true), kAcceptAll);
  EXPECT_EQ(r.record.decision, Decision::RejectedIllegalTransition);
  EXPECT_EQ(r.object.state, S::Authorized);
  EXPECT_EQ(r.record.resulting_state, S::Authorized);
}

TEST(ApplyTransition, TerminalAbsorption) {
  for (S s : {S::Settled, S::Failed, S::Canceled}) {
    for (K k : kAllEventKinds) {
      for (A a : kAllActorKinds) {
        for (bool ev : {false, true}) {
          const auto r = apply_transition(object_in(s), event(k, a, ev), kAcceptAll);
          EXPECT_EQ(r.object.state, s);
        }
      }
    }
  }
}

TEST(TransitionTable, RejectsAmbiguousOrTerminalRules) {
  EXPECT_THROW(TransitionTable({{S::Created, K::Cancel, A::Portal, false, S::Canceled},
                                {S::Created, K::Cancel, A::Erp, false, S::Failed}}),
               Error);
  EXPECT_THROW(TransitionTable({{S::Settled, K::Cancel, A::Portal, false, S::Canceled}}), Error);
}

// Every sequence of up to six events that lacks accepted evidence, explored
// as a breadth-first search over reachable states (the state is all that
// validation depends on for one attempt).
TEST(EvidenceGate, NoEvidenceFreeSequenceReachesAuthorizedOrBeyond) {
  std::set<S> frontier{S::Created};
  std::set<S> seen = frontier;
  for (int depth = 0; depth < 6; ++depth) {
    std::set<S> next;
    for (S s : frontier) {
      for (K k : kAllEventKinds) {
        for (A a : kAllActorKinds) {
          for (bool ev : {false, true}) {
            const auto r = apply_transition(object_in(s), event(k, a, ev), kRejectAll);
            next.insert(r.object.state);
          }
        }
      }
    }
    frontier = next;
    seen.insert(next.begin(), next.end());
  }
  EXPECT_FALSE(seen.count(S::Authorized));
  EXPECT_FALSE(seen.count(S::Captured));
  EXPECT_FALSE(seen.count(S::Settled));
  // Sanity: the search did move.
  EXPECT_TRUE(seen.count(S::AuthorizationPending));
  EXPECT_TRUE(seen.count(S::Failed));
}

TEST(ReplayAudit, Examples) {
  const auto initial = make_object("B1", "alice", 1000, "EUR");
  EXPECT_EQ(replay_audit({}, initial), S::Created);

  BusinessObject obj = initial;
  std::vector<AuditRecord> log;
  Tick t = 0;
  for (auto [k, a, ev] : std::vector<std::tuple<K, A, bool>>{{K::InitiatePayment, A::Portal, false},
                                                             {K::ForwardToGateway, A::Portal, false},
                                                             {K::AuthorizeOk, A::Gateway, true},
                                                             {K::Capture, A::Gateway, true},
                                                             {K::Settle, A::Erp, false}}) {
    auto e = event(k, a, ev);
    e.logical_time = ++t;
    auto r = apply_transition(obj, e, kAcceptAll);
    obj = r.object;
    log.push_back(r.record);
  }
  EXPECT_EQ(obj.state, S::Settled);
  EXPECT_EQ(replay_audit(log, initial), S::Settled);

  auto forged = log;
  forged.insert(forged.begin() + 1, forged[3]); // Capture applied from PaymentInitiated
  forged[1].logical_time = 1;
  EXPECT_THROW(replay_audit(forged, initial), AuditCorruption);

  auto unsorted = log;
  std::swap(unsorted[0], unsorted[1]);
  EXPECT_THROW(replay_audit(unsorted, initial), AuditCorruption);
}

TEST(ReplayAudit, ThousandSeededSequencesReplayToStoredState) {
  for (std::uint32_t seed = 0; seed < 1000; ++seed) {
    std::mt19937 rng(seed);
    BusinessObject obj = make_object("B1", "alice", 1000, "EUR");
    std::vector<AuditRecord> log;
    const EvidenceVerifier coin = [&](std::span<const std::uint8_t>, const EvidenceExpectation&) {
      return rng() % 2 == 0;
    };
    const int steps = 5 + int(rng() % 40);
    for (int i = 0; i < steps; ++i) {
      if (obj.state == S::Failed && rng() % 3 == 0) {
        obj = open_retry(obj);
        continue;
      }
      TransitionEvent e;
      e.kind = kAllEventKinds[rng() % 8];
      e.issuer = Actor{kAllActorKinds[rng() % 4], "a"};
      e.object_id = "B1";
      e.attempt_id = rng() % 5 == 0 ? obj.attempt_id + 1 : obj.attempt_id;
      if (rng() % 2) e.evidence = Bytes{std::uint8_t(rng())};
      e.logical_time = Tick(i);
      auto r = apply_transition(obj, e, coin);
      obj = r.object;
      log.push_back(r.record);
    }
    ASSERT_EQ(replay_audit(log, obj), obj.state) << "seed " << seed;
  }
}

TEST(OpenRetry, BumpsAttemptOnlyFromFailed) {
  auto o = object_in(S::Failed);
  const auto r = open_retry(o);
  EXPECT_EQ(r.state, S::Created);
  EXPECT_EQ(r.attempt_id, o.attempt_id + 1);
  EXPECT_THROW(open_retry(object_in(S::Settled)), Error);
}

TEST(MakeObject, AmountMustBePositive) {
  EXPECT_THROW(make_object("B1", "alice", 0, "EUR"), Error);
  EXPECT_THROW(make_object("B1", "alice", -5, "EUR"), Error);
}

} // namespace
