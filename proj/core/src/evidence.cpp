#include "payflow/evidence.hpp"

#include "payflow/codec.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace payflow::evidence {

namespace {

class Writer {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void blob(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }
  Bytes take() { return std::move(out_); }

private:
  Bytes out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool u8(std::uint8_t& v) {
    if (!need(1)) return false;
    v = in_[pos_++];
    return true;
  }
  bool u32(std::uint32_t& v) {
    if (!need(4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return true;
  }
  bool u64(std::uint64_t& v) {
    if (!need(8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return true;
  }
  bool str(std::string& s) {
    std::uint32_t n = 0;
    if (!u32(n) || !need(n)) return false;
    s.assign(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
             in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return true;
  }
  bool blob(Bytes& b) {
    std::uint32_t n = 0;
    if (!u32(n) || !need(n)) return false;
    b.assign(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
             in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return true;
  }
  template <std::size_t N> bool fixed(std::array<std::uint8_t, N>& a) {
    if (!need(N)) return false;
    for (auto& x : a) x = in_[pos_++];
    return true;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  bool need(std::size_t n) const { return in_.size() - pos_ >= n; }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void require(const SigningKey& key, KeyPurpose purpose, std::string_view op) {
  if (key.purpose() != purpose) {
    throw KeyPurposeError(std::string(op) + " needs a " + std::string(to_string(purpose)) +
                          " key, got " + std::string(to_string(key.purpose())) + " key '" +
                          key.key_id() + "'");
  }
}

Bytes token_canonical(const ClientToken& t) {
  Writer w;
  w.str(t.user_id);
  w.str(t.session_id);
  w.u64(t.issued_at);
  return w.take();
}

} // namespace

std::string_view to_string(KeyPurpose p) {
  return p == KeyPurpose::GatewayToErp ? "GatewayToErp" : "PortalClientToken";
}

SigningKey::SigningKey(std::string key_id, Bytes secret, KeyPurpose purpose)
    : key_id_(std::move(key_id)), secret_(std::move(secret)), purpose_(purpose) {
  if (secret_.size() < kMinSecretSize) {
    throw Error("signing key '" + key_id_ + "' needs at least " +
                std::to_string(kMinSecretSize) + " secret bytes");
  }
}

SigningKey SigningKey::derive(std::string key_id, std::uint64_t seed, KeyPurpose purpose) {
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(seed),
                                      static_cast<std::uint32_t>(seed >> 32),
                                      static_cast<std::uint32_t>(purpose)};
  for (char c : key_id) material.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(material.begin(), material.end());
  std::mt19937_64 rng(seq);
  Bytes secret(kMinSecretSize);
  for (std::size_t i = 0; i < secret.size(); i += 8) {
    const std::uint64_t v = rng();
    for (std::size_t k = 0; k < 8; ++k) secret[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return SigningKey(std::move(key_id), std::move(secret), purpose);
}

Bytes SigningKey::mac(std::span<const std::uint8_t> message) const {
  Bytes input;
  input.reserve(message.size() + 1);
  input.push_back(static_cast<std::uint8_t>(purpose_));
  input.insert(input.end(), message.begin(), message.end());
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  HMAC(EVP_sha256(), secret_.data(), static_cast<int>(secret_.size()), input.data(),
       input.size(), out.data(), &len);
  out.resize(len);
  return out;
}

bool SigningKey::check(std::span<const std::uint8_t> message,
                       std::span<const std::uint8_t> tag) const {
  const Bytes expected = mac(message);
  return tag.size() == expected.size() &&
         CRYPTO_memcmp(expected.data(), tag.data(), expected.size()) == 0;
}

std::string to_hex(const Nonce& n) { return codec::hex_encode(n); }

std::optional<Nonce> nonce_from_hex(std::string_view hex) {
  auto bytes = codec::hex_decode(hex);
  if (!bytes || bytes->size() != Nonce{}.size()) return std::nullopt;
  Nonce n{};
  std::copy(bytes->begin(), bytes->end(), n.begin());
  return n;
}

Nonce NonceGenerator::next() {
  while (true) {
    Nonce n{};
    const std::uint64_t hi = rng_();
    const std::uint64_t lo = rng_();
    for (std::size_t k = 0; k < 8; ++k) {
      n[k] = static_cast<std::uint8_t>(hi >> (56 - 8 * k));
      n[8 + k] = static_cast<std::uint8_t>(lo >> (56 - 8 * k));
    }
    if (issued_.insert(n).second) return n;
  }
}

std::string_view to_string(Outcome o) {
  switch (o) {
  case Outcome::Authorized: return "Authorized";
  case Outcome::Captured: return "Captured";
  case Outcome::Declined: return "Declined";
  }
  return "?";
}

std::optional<Outcome> parse_outcome(std::string_view s) {
  for (Outcome o : {Outcome::Authorized, Outcome::Captured, Outcome::Declined}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::string_view to_string(Verdict v) {
  switch (v) {
  case Verdict::Verified: return "Verified";
  case Verdict::BadSignature: return "BadSignature";
  case Verdict::NonceReused: return "NonceReused";
  case Verdict::FieldMismatch: return "FieldMismatch";
  }
  return "?";
}

Bytes canonical_encoding(const GatewayEvidence& ev) {
  Writer w;
  w.str(ev.gateway_id);
  w.str(ev.object_id);
  w.u32(ev.attempt_id);
  w.u64(static_cast<std::uint64_t>(ev.amount));
  w.str(ev.currency);
  w.u8(static_cast<std::uint8_t>(ev.outcome));
  w.raw(ev.nonce);
  w.u64(ev.logical_time);
  return w.take();
}

Bytes encode_evidence(const GatewayEvidence& ev) {
  Writer w;
  w.raw(canonical_encoding(ev));
  w.blob(ev.signature);
  return w.take();
}

std::optional<GatewayEvidence> decode_evidence(std::span<const std::uint8_t> wire) {
  Reader r(wire);
  GatewayEvidence ev;
  std::uint64_t amount = 0;
  std::uint8_t outcome = 0;
  if (!r.str(ev.gateway_id) || !r.str(ev.object_id) || !r.u32(ev.attempt_id) ||
      !r.u64(amount) || !r.str(ev.currency) || !r.u8(outcome) || !r.fixed(ev.nonce) ||
      !r.u64(ev.logical_time) || !r.blob(ev.signature) || !r.done()) {
    return std::nullopt;
  }
  if (outcome < 1 || outcome > 3) return std::nullopt;
  ev.amount = static_cast<std::int64_t>(amount);
  ev.outcome = static_cast<Outcome>(outcome);
  return ev;
}

GatewayEvidence sign_evidence(const SigningKey& key, const EvidencePayload& payload,
                              NonceGenerator& nonces) {
  require(key, KeyPurpose::GatewayToErp, "sign_evidence");
  GatewayEvidence ev{payload.gateway_id, payload.object_id, payload.attempt_id,
                     payload.amount,     payload.currency,  payload.outcome,
                     nonces.next(),      payload.logical_time, {}};
  ev.signature = key.mac(canonical_encoding(ev));
  return ev;
}

Verdict verify_evidence(const SigningKey& key, const GatewayEvidence& ev,
                        const Expected& expected, NonceStore& nonces) {
  require(key, KeyPurpose::GatewayToErp, "verify_evidence");
  if (!key.check(canonical_encoding(ev), ev.signature)) {
    return Verdict::BadSignature;
  }
  if (ev.object_id != expected.object_id || ev.attempt_id != expected.attempt_id ||
      ev.amount != expected.amount || ev.currency != expected.currency ||
      (expected.outcome && ev.outcome != *expected.outcome)) {
    return Verdict::FieldMismatch;
  }
  if (!nonces.consume(ev.nonce)) {
    return Verdict::NonceReused;
  }
  return Verdict::Verified;
}

ClientToken mint_client_token(const SigningKey& key, std::string user_id,
                              std::string session_id, Tick logical_time) {
  require(key, KeyPurpose::PortalClientToken, "mint_client_token");
  ClientToken t{std::move(user_id), std::move(session_id), logical_time, {}};
  t.signature = key.mac(token_canonical(t));
  return t;
}

TokenVerdict verify_client_token(const SigningKey& key, const ClientToken& token) {
  require(key, KeyPurpose::PortalClientToken, "verify_client_token");
  return key.check(token_canonical(token), token.signature) ? TokenVerdict::Verified
                                                            : TokenVerdict::BadSignature;
}

std::string encode_client_token(const ClientToken& token) {
  Writer w;
  w.raw(token_canonical(token));
  w.blob(token.signature);
  return codec::base64_encode(w.take());
}

std::optional<ClientToken> decode_client_token(std::string_view text) {
  const auto bytes = codec::base64_decode(text);
  if (!bytes) return std::nullopt;
  Reader r(*bytes);
  ClientToken t;
  if (!r.str(t.user_id) || !r.str(t.session_id) || !r.u64(t.issued_at) ||
      !r.blob(t.signature) || !r.done()) {
    return std::nullopt;
  }
  return t;
}

} // namespace payflow::evidence
