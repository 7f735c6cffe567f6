#pragma once

#include "payflow/common.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// A deliberately small HTTP/1.1 message model: request line, ordered
/// headers, opaque body. No chunked encoding, no continuation lines.
namespace payflow::http {

enum class Method { Get, Post };

std::string_view to_string(Method m);

using Field = std::pair<std::string, std::string>;

bool iequals(std::string_view a, std::string_view b);

/// Ordered multimap with case-insensitive name matching.
class Headers {
public:
  void add(std::string name, std::string value);
  /// Replaces the first match in place and drops later ones; appends when
  /// absent.
  void set(std::string_view name, std::string value);
  /// Removes every match. Absent names are a no-op.
  void remove(std::string_view name);
  std::optional<std::string_view> get(std::string_view name) const;
  std::vector<std::string_view> get_all(std::string_view name) const;
  bool contains(std::string_view name) const { return get(name).has_value(); }

  /// Moves all matches of `name` to the front, preserving relative order.
  void move_to_front(std::string_view name);
  void reverse();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::vector<Field>& entries() { return entries_; }
  const std::vector<Field>& entries() const { return entries_; }

  bool operator==(const Headers&) const = default;

private:
  std::vector<Field> entries_;
};

struct HttpRequest {
  Method method = Method::Get;
  std::string path = "/";
  std::vector<Field> query;
  Headers headers;
  std::string body;

  std::optional<std::string_view> query_value(std::string_view name) const;
  /// Path plus encoded query string, as it appears on the request line.
  std::string target() const;

  bool operator==(const HttpRequest&) const = default;
};

enum class Status : int {
  Ok = 200,
  Found = 302,
  BadRequest = 400,
  Unauthorized = 401,
  Forbidden = 403,
  NotFound = 404,
  Conflict = 409,
};

std::string_view reason_phrase(Status s);
std::optional<Status> parse_status(int code);

struct HttpResponse {
  Status status = Status::Ok;
  Headers headers;
  std::string body;

  bool operator==(const HttpResponse&) const = default;
};

/// Raised by the parsers; line() is 1-based.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

std::string serialize_request(const HttpRequest& req);
HttpRequest parse_request(std::string_view wire);
std::string serialize_response(const HttpResponse& resp);
HttpResponse parse_response(std::string_view wire);

/// True when serialize_request(req) would parse back to req.
bool is_valid_request(const HttpRequest& req);
bool is_token(std::string_view s);

std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);

/// key=value&... view; keys and values percent-encoded. Empty segments are
/// skipped, a segment without '=' yields an empty value.
std::vector<Field> parse_form(std::string_view body);
std::string encode_form(const std::vector<Field>& fields);
std::optional<std::string> form_value(std::string_view body, std::string_view name);
std::vector<std::string> form_values(std::string_view body, std::string_view name);

/// Cookies as the ordered projection of every Cookie header.
std::vector<Field> request_cookies(const HttpRequest& req);
std::optional<std::string> cookie(const HttpRequest& req, std::string_view name);

/// name/value of a Set-Cookie header, attributes dropped.
std::optional<Field> parse_set_cookie(std::string_view header_value);

/// Client-side session: what a browser holds for one login.
struct Session {
  std::string session_id;
  std::map<std::string, std::string> cookies;
  std::string owner_user_id;

  /// Adds every Set-Cookie of `resp` to the jar; picks up sid.
  void absorb(const HttpResponse& resp);
  /// Replaces the request's Cookie headers with one built from the jar.
  void attach(HttpRequest& req) const;
};

struct Mutation {
  enum class Kind {
    SetHeader,
    RemoveHeader,
    SetCookie,
    SetQueryParam,
    SetBodyField,
    Reorder,   ///< moves header `name` to the front; empty name reverses all headers
    Duplicate, ///< emits the request twice
  };

  Kind kind = Kind::SetHeader;
  std::string name;
  std::string value;

  bool operator==(const Mutation&) const = default;
};

std::string_view to_string(Mutation::Kind k);
std::optional<Mutation::Kind> parse_mutation_kind(std::string_view s);

/// Returns a modified copy; `req` itself is untouched.
HttpRequest apply_mutation(const HttpRequest& req, const Mutation& m);

/// The requests a mutation puts on the wire: two identical copies for
/// Duplicate, one mutated request otherwise.
std::vector<HttpRequest> emit(const HttpRequest& req, const Mutation& m);

} // namespace payflow::http
