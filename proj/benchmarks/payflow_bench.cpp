#include "payflow/attack.hpp"
#include "payflow/evidence.hpp"
#include "payflow/fsm.hpp"
#include "payflow/http.hpp"
#include "payflow/scenario.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace payflow;

void BM_ValidateAllTuples(benchmark::State& state) {
  const fsm::EvidenceVerifier accept = [](std::span<const std::uint8_t>, const fsm::EvidenceExpectation&) {
    return true;
  };
  auto obj = fsm::make_object("B", "u", 1, "EUR");
  for (auto _ : state) {
    int allowed = 0;
    for (auto s : fsm::kAllStates) {
      obj.state = s;
      for (auto k : fsm::kAllEventKinds) {
        for (auto a : fsm::kAllActorKinds) {
          fsm::TransitionEvent e{k, "B", 1, {a, "x"}, std::nullopt, 0};
          allowed += fsm::validate_event(obj, e, accept) == fsm::Decision::Allowed;
        }
      }
    }
    benchmark::DoNotOptimize(allowed);
  }
}
BENCHMARK(BM_ValidateAllTuples);

void BM_SignEvidence(benchmark::State& state) {
  const auto key = evidence::SigningKey::derive("gw", 1, evidence::KeyPurpose::GatewayToErp);
  evidence::NonceGenerator gen(2);
  const evidence::EvidencePayload p{"gw1", "INV-1", 1, 125000, "EUR", evidence::Outcome::Authorized, 3};
  for (auto _ : state) benchmark::DoNotOptimize(evidence::sign_evidence(key, p, gen));
}
BENCHMARK(BM_SignEvidence);

void BM_VerifyEvidence(benchmark::State& state) {
  const auto key = evidence::SigningKey::derive("gw", 1, evidence::KeyPurpose::GatewayToErp);
  evidence::NonceGenerator gen(2);
  const evidence::EvidencePayload p{"gw1", "INV-1", 1, 125000, "EUR", evidence::Outcome::Authorized, 3};
  const evidence::Expected exp{p.object_id, p.attempt_id, p.amount, p.currency, p.outcome};
  const auto ev = evidence::sign_evidence(key, p, gen);
  for (auto _ : state) {
    evidence::NonceStore store;
    benchmark::DoNotOptimize(evidence::verify_evidence(key, ev, exp, store));
  }
}
BENCHMARK(BM_VerifyEvidence);

void BM_ParseRequest(benchmark::State& state) {
  http::HttpRequest r;
  r.method = http::Method::Post;
  r.path = "/pay/INV-1001";
  r.headers.add("Host", "portal");
  r.headers.add("Cookie", "sid=0123456789abcdef; pt=dG9rZW4tdGV4dA==");
  r.headers.add("Content-Type", "application/x-www-form-urlencoded");
  r.body = "obj=INV-1001";
  const auto wire = http::serialize_request(r);
  for (auto _ : state) benchmark::DoNotOptimize(http::parse_request(wire));
  state.SetBytesProcessed(std::int64_t(state.iterations()) * std::int64_t(wire.size()));
}
BENCHMARK(BM_ParseRequest);

void BM_HappyPathScenario(benchmark::State& state) {
  const auto s = scenario::happy_path();
  for (auto _ : state) {
    benchmark::DoNotOptimize(scenario::run_scenario(s, actors::PortalConfig::hardened(), 42));
  }
}
BENCHMARK(BM_HappyPathScenario);

void BM_AttackAttempt(benchmark::State& state) {
  const auto strategy = attack::kAllStrategies[std::size_t(state.range(0))];
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(attack::run_attempt(strategy, actors::PortalConfig::hardened(), 42, i++ % 16));
  }
}
BENCHMARK(BM_AttackAttempt)->DenseRange(0, 6);

} // namespace

BENCHMARK_MAIN();
