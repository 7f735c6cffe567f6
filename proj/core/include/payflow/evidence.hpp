#pragma once

#include "payflow/common.hpp"

#include <array>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>

/// Signed proof objects. Gateway evidence is the only thing that can move a
/// payment into Authorized or Captured; client tokens only say who the client
/// is and carry no payment state at all.
namespace payflow::evidence {

enum class KeyPurpose : std::uint8_t { GatewayToErp = 1, PortalClientToken = 2 };

std::string_view to_string(KeyPurpose p);

class KeyPurposeError : public Error {
public:
  using Error::Error;
};

inline constexpr std::size_t kMinSecretSize = 32;
inline constexpr std::size_t kMacSize = 32;

/// HMAC-SHA256 key bound to one purpose. The purpose is mixed into every MAC,
/// so two keys with the same secret but different purposes never verify each
/// other's output.
class SigningKey {
public:
  /// Throws Error when the secret is shorter than kMinSecretSize.
  SigningKey(std::string key_id, Bytes secret, KeyPurpose purpose);

  /// Deterministic key material drawn from a seeded generator.
  static SigningKey derive(std::string key_id, std::uint64_t seed, KeyPurpose purpose);

  const std::string& key_id() const { return key_id_; }
  KeyPurpose purpose() const { return purpose_; }

  Bytes mac(std::span<const std::uint8_t> message) const;
  bool check(std::span<const std::uint8_t> message,
             std::span<const std::uint8_t> tag) const;

private:
  std::string key_id_;
  Bytes secret_;
  KeyPurpose purpose_;
};

using Nonce = std::array<std::uint8_t, 16>;

std::string to_hex(const Nonce& n);
std::optional<Nonce> nonce_from_hex(std::string_view hex);

/// Seeded 128-bit nonce source that never repeats a value it has handed out.
class NonceGenerator {
public:
  explicit NonceGenerator(std::uint64_t seed) : rng_(seed) {}
  Nonce next();

private:
  std::mt19937_64 rng_;
  std::set<Nonce> issued_;
};

enum class Outcome : std::uint8_t { Authorized = 1, Captured = 2, Declined = 3 };

std::string_view to_string(Outcome o);
std::optional<Outcome> parse_outcome(std::string_view s);

struct EvidencePayload {
  std::string gateway_id;
  std::string object_id;
  std::uint32_t attempt_id = 1;
  std::int64_t amount = 0;
  std::string currency;
  Outcome outcome = Outcome::Authorized;
  Tick logical_time = 0;
};

struct GatewayEvidence {
  std::string gateway_id;
  std::string object_id;
  std::uint32_t attempt_id = 1;
  std::int64_t amount = 0;
  std::string currency;
  Outcome outcome = Outcome::Authorized;
  Nonce nonce{};
  Tick logical_time = 0;
  Bytes signature;

  bool operator==(const GatewayEvidence&) const = default;
};

/// Fixed-order, length-prefixed encoding of every field except the signature.
Bytes canonical_encoding(const GatewayEvidence& ev);
/// Wire form: canonical encoding followed by the length-prefixed signature.
Bytes encode_evidence(const GatewayEvidence& ev);
std::optional<GatewayEvidence> decode_evidence(std::span<const std::uint8_t> wire);

/// Throws KeyPurposeError unless key.purpose() is GatewayToErp.
GatewayEvidence sign_evidence(const SigningKey& key, const EvidencePayload& payload,
                              NonceGenerator& nonces);

/// Consumed-nonce set. Only grows.
class NonceStore {
public:
  bool contains(const Nonce& n) const { return consumed_.count(n) != 0; }
  /// Atomic check-and-insert: true when the nonce was fresh.
  bool consume(const Nonce& n) { return consumed_.insert(n).second; }
  std::size_t size() const { return consumed_.size(); }
  const std::set<Nonce>& consumed() const { return consumed_; }

private:
  std::set<Nonce> consumed_;
};

enum class Verdict : std::uint8_t { Verified, BadSignature, NonceReused, FieldMismatch };

std::string_view to_string(Verdict v);

struct Expected {
  std::string object_id;
  std::uint32_t attempt_id = 1;
  std::int64_t amount = 0;
  std::string currency;
  /// Checked only when set.
  std::optional<Outcome> outcome;
};

/// Checks BadSignature, then FieldMismatch, then NonceReused. Verified consumes
/// the nonce. Throws KeyPurposeError for a non-GatewayToErp key.
Verdict verify_evidence(const SigningKey& key, const GatewayEvidence& ev,
                        const Expected& expected, NonceStore& nonces);

struct ClientToken {
  std::string user_id;
  std::string session_id;
  Tick issued_at = 0;
  Bytes signature;

  static constexpr std::array<std::string_view, 4> field_names{
      "user_id", "session_id", "issued_at", "signature"};

  bool operator==(const ClientToken&) const = default;
};

enum class TokenVerdict : std::uint8_t { Verified, BadSignature };

/// Both throw KeyPurposeError unless key.purpose() is PortalClientToken.
ClientToken mint_client_token(const SigningKey& key, std::string user_id,
                              std::string session_id, Tick logical_time);
TokenVerdict verify_client_token(const SigningKey& key, const ClientToken& token);

/// Cookie-safe text form (base64 of the length-prefixed fields and signature).
std::string encode_client_token(const ClientToken& token);
std::optional<ClientToken> decode_client_token(std::string_view text);

} // namespace payflow::evidence
