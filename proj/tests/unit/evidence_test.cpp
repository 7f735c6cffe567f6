#include "payflow/codec.hpp"
#include "payflow/erp.hpp"
#include "payflow/evidence.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace {

using namespace payflow;
using namespace payflow::evidence;

SigningKey gateway_key() { return SigningKey::derive("gw-key", 7, KeyPurpose::GatewayToErp); }

EvidencePayload payload() {
  return EvidencePayload{"gw", "INV-1", 1, 125000, "EUR", Outcome::Authorized, 5};
}

Expected expected_for(const EvidencePayload& p) {
  return Expected{p.object_id, p.attempt_id, p.amount, p.currency, p.outcome};
}

TEST(Codec, Base64AndHexKnownVectors) {
  EXPECT_EQ(codec::base64_encode(std::string_view("foobar")), "Zm9vYmFy");
  EXPECT_EQ(codec::base64_encode(std::string_view("fo")), "Zm8=");
  EXPECT_EQ(codec::base64_decode("Zm9vYg=="), codec::to_bytes("foob"));
  EXPECT_FALSE(codec::base64_decode("Zm9vYg="));
  EXPECT_FALSE(codec::base64_decode("Zm=vYg=="));
  EXPECT_EQ(codec::hex_encode(codec::to_bytes("\x01\xab")), "01ab");
  EXPECT_FALSE(codec::hex_decode("0g"));
  EXPECT_EQ(codec::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SigningKey, PurposeSeparatesKeysWithTheSameSecret) {
  Bytes secret(32, 0x0b);
  SigningKey a("k", secret, KeyPurpose::GatewayToErp);
  SigningKey b("k", secret, KeyPurpose::PortalClientToken);
  const auto msg = codec::to_bytes("Hi There");
  EXPECT_EQ(a.mac(msg).size(), kMacSize);
  EXPECT_NE(a.mac(msg), b.mac(msg));
  EXPECT_TRUE(a.check(msg, a.mac(msg)));
  EXPECT_FALSE(b.check(msg, a.mac(msg)));
  EXPECT_THROW(SigningKey("k", Bytes(31, 1), KeyPurpose::GatewayToErp), Error);
}

TEST(Evidence, SignThenVerify) {
  const auto key = gateway_key();
  NonceGenerator gen(1);
  NonceStore store;
  const auto ev = sign_evidence(key, payload(), gen);
  EXPECT_EQ(verify_evidence(key, ev, expected_for(payload()), store), Verdict::Verified);
  EXPECT_EQ(store.size(), 1u);
}

TEST(Evidence, ReplayedNonceRejected) {
  const auto key = gateway_key();
  NonceGenerator gen(1);
  NonceStore store;
  const auto ev = sign_evidence(key, payload(), gen);
  ASSERT_EQ(verify_evidence(key, ev, expected_for(payload()), store), Verdict::Verified);
  EXPECT_EQ(verify_evidence(key, ev, expected_for(payload()), store), Verdict::NonceReused);
}

TEST(Evidence, FieldMismatches) {
  const auto key = gateway_key();
  NonceGenerator gen(1);
  NonceStore store;
  const auto ev = sign_evidence(key, payload(), gen);
  auto exp = expected_for(payload());
  exp.amount = 1;
  EXPECT_EQ(verify_evidence(key, ev, exp, store), Verdict::FieldMismatch);
  exp = expected_for(payload());
  exp.object_id = "INV-2";
  EXPECT_EQ(verify_evidence(key, ev, exp, store), Verdict::FieldMismatch);
  exp = expected_for(payload());
  exp.attempt_id = 2;
  EXPECT_EQ(verify_evidence(key, ev, exp, store), Verdict::FieldMismatch);
  exp = expected_for(payload());
  exp.outcome = Outcome::Captured;
  EXPECT_EQ(verify_evidence(key, ev, exp, store), Verdict::FieldMismatch);
  EXPECT_EQ(store.size(), 0u);
}

TEST(Evidence, ForeignKeyGivesBadSignature) {
  NonceGenerator gen(1);
  NonceStore store;
  const auto ev = sign_evidence(gateway_key(), payload(), gen);
  const auto other = SigningKey::derive("gw-key", 8, KeyPurpose::GatewayToErp);
  EXPECT_EQ(verify_evidence(other, ev, expected_for(payload()), store), Verdict::BadSignature);
}

TEST(Evidence, WrongPurposeKeyThrows) {
  NonceGenerator gen(1);
  NonceStore store;
  const auto portal = SigningKey::derive("p", 7, KeyPurpose::PortalClientToken);
  EXPECT_THROW(sign_evidence(portal, payload(), gen), KeyPurposeError);
  const auto ev = sign_evidence(gateway_key(), payload(), gen);
  EXPECT_THROW(verify_evidence(portal, ev, expected_for(payload()), store), KeyPurposeError);
  EXPECT_THROW(mint_client_token(gateway_key(), "u", "s", 0), KeyPurposeError);
}

TEST(Evidence, WireRoundTrip) {
  NonceGenerator gen(3);
  const auto ev = sign_evidence(gateway_key(), payload(), gen);
  const auto wire = encode_evidence(ev);
  EXPECT_EQ(decode_evidence(wire), ev);
  Bytes truncated(wire.begin(), wire.end() - 1);
  EXPECT_FALSE(decode_evidence(truncated));
  Bytes extended = wire;
  extended.push_back(0);
  EXPECT_FALSE(decode_evidence(extended));
}

TEST(Evidence, TenThousandUniqueNonces) {
  NonceGenerator gen(99);
  std::set<Nonce> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(gen.next());
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(nonce_from_hex(to_hex(*seen.begin())), *seen.begin());
}

TEST(Evidence, TenThousandBitFlipMutationsNeverVerify) {
  const auto key = gateway_key();
  NonceGenerator gen(5);
  const auto ev = sign_evidence(key, payload(), gen);
  const auto wire = encode_evidence(ev);
  std::mt19937 rng(2024);
  int accepted = 0;
  int decoded = 0;
  for (int i = 0; i < 10000; ++i) {
    Bytes m = wire;
    const int flips = 1 + int(rng() % 4);
    std::set<std::size_t> bits;
    while (int(bits.size()) < flips) bits.insert(rng() % (m.size() * 8));
    for (auto b : bits) m[b / 8] ^= std::uint8_t(1u << (b % 8));
    const auto d = decode_evidence(m);
    if (!d) continue;
    ++decoded;
    NonceStore fresh;
    if (verify_evidence(key, *d, expected_for(payload()), fresh) == Verdict::Verified) ++accepted;
  }
  EXPECT_EQ(accepted, 0);
  EXPECT_GT(decoded, 0);
}

TEST(Evidence, ErpRejectsMutatedEvidenceAndAcceptsOriginalOnce) {
  const auto key = gateway_key();
  actors::Erp erp(key);
  erp.add_object(fsm::make_object("INV-1", "alice", 125000, "EUR"));
  const fsm::Actor portal{fsm::ActorKind::Portal, "portal"};
  const fsm::Actor gw{fsm::ActorKind::Gateway, "gw"};
  erp.erp_apply({fsm::EventKind::InitiatePayment, "INV-1", 1, portal, std::nullopt, 1});
  erp.erp_apply({fsm::EventKind::ForwardToGateway, "INV-1", 1, portal, std::nullopt, 2});
  ASSERT_EQ(erp.erp_status("INV-1"), fsm::PaymentState::AuthorizationPending);

  NonceGenerator gen(5);
  const auto wire = encode_evidence(sign_evidence(key, payload(), gen));
  std::mt19937 rng(7);
  for (int i = 0; i < 10000; ++i) {
    Bytes m = wire;
    const auto bit = rng() % (m.size() * 8);
    m[bit / 8] ^= std::uint8_t(1u << (bit % 8));
    const auto out = erp.erp_apply({fsm::EventKind::AuthorizeOk, "INV-1", 1, gw, m, 3});
    ASSERT_NE(out.decision, fsm::Decision::Allowed);
  }
  EXPECT_EQ(erp.erp_status("INV-1"), fsm::PaymentState::AuthorizationPending);
  EXPECT_EQ(erp.erp_apply({fsm::EventKind::AuthorizeOk, "INV-1", 1, gw, wire, 4}).decision,
            fsm::Decision::Allowed);
  EXPECT_EQ(erp.erp_status("INV-1"), fsm::PaymentState::Authorized);
  EXPECT_TRUE(erp.verify_audit());
}

TEST(ClientToken, SchemaCarriesNoPaymentState) {
  for (auto name : ClientToken::field_names) {
    for (auto banned : {"paid", "status", "state", "amount", "authorized", "settled", "captured"}) {
      EXPECT_EQ(std::string(name).find(banned), std::string::npos) << name;
    }
  }
  EXPECT_EQ(ClientToken::field_names.size(), 4u);
}

TEST(ClientToken, MintVerifyAndTamper) {
  const auto key = SigningKey::derive("portal", 1, KeyPurpose::PortalClientToken);
  const auto t = mint_client_token(key, "alice", "s-1", 10);
  EXPECT_EQ(verify_client_token(key, t), TokenVerdict::Verified);
  const auto text = encode_client_token(t);
  EXPECT_EQ(decode_client_token(text), t);
  auto forged = t;
  forged.user_id = "mallory";
  EXPECT_EQ(verify_client_token(key, forged), TokenVerdict::BadSignature);
  EXPECT_FALSE(decode_client_token("not base64!"));
}

} // namespace
