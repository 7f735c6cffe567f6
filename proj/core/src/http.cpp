#include "payflow/http.hpp"

#include <algorithm>
#include <array>

namespace payflow::http {

namespace {

constexpr std::string_view kVersion = "HTTP/1.1";
constexpr std::string_view kCrlf = "\r\n";

char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_tchar(unsigned char c) {
  if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
    return true;
  }
  constexpr std::string_view extra = "!#$%&'*+-.^_`|~";
  return extra.find(static_cast<char>(c)) != std::string_view::npos;
}

bool is_ows(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ows(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ows(s.back())) s.remove_suffix(1);
  return s;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size() && extra > 0) {
      return false;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        return false;
      }
    }
    i += extra + 1;
  }
  return true;
}

bool valid_header_value(std::string_view v) {
  if (!v.empty() && (is_ows(v.front()) || is_ows(v.back()))) {
    return false;
  }
  return std::none_of(v.begin(), v.end(), [](char c) {
    return c == '\r' || c == '\n' || c == '\0';
  });
}

bool valid_path(std::string_view p) {
  if (p.empty() || p.front() != '/') {
    return false;
  }
  return std::all_of(p.begin(), p.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u > 0x20 && u < 0x7F && c != '?' && c != '#';
  });
}

std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

void parse_header_lines(const std::vector<std::string_view>& lines, Headers& out) {
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const std::string_view line = lines[i];
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(lineno, "header line without colon");
    }
    const std::string_view name = line.substr(0, colon);
    if (!valid_utf8(name)) {
      throw ParseError(lineno, "header name is not valid UTF-8");
    }
    if (!is_token(name)) {
      throw ParseError(lineno, "invalid header name '" + std::string(name) + "'");
    }
    out.add(std::string(name), std::string(trim(line.substr(colon + 1))));
  }
}

void write_headers(std::string& out, const Headers& headers) {
  for (const auto& [name, value] : headers) {
    out.append(name).append(": ").append(value).append(kCrlf);
  }
  out.append(kCrlf);
}

std::string join_cookies(const std::vector<Field>& cookies) {
  std::string out;
  for (const auto& [n, v] : cookies) {
    if (!out.empty()) out.append("; ");
    out.append(n).append("=").append(v);
  }
  return out;
}

std::vector<Field> split_cookie_header(std::string_view value) {
  std::vector<Field> out;
  for (std::string_view part : split(value, ";")) {
    part = trim(part);
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string_view::npos) {
      out.emplace_back(std::string(part), std::string());
    } else {
      out.emplace_back(std::string(trim(part.substr(0, eq))),
                       std::string(trim(part.substr(eq + 1))));
    }
  }
  return out;
}

void set_cookie(HttpRequest& req, const std::string& name, const std::string& value) {
  bool placed = false;
  auto& entries = req.headers.entries();
  for (auto it = entries.begin(); it != entries.end();) {
    if (!iequals(it->first, "Cookie")) {
      ++it;
      continue;
    }
    auto cookies = split_cookie_header(it->second);
    std::vector<Field> kept;
    for (auto& c : cookies) {
      if (c.first == name) {
        if (!placed) {
          kept.emplace_back(name, value);
          placed = true;
        }
      } else {
        kept.push_back(std::move(c));
      }
    }
    if (kept.empty()) {
      it = entries.erase(it);
    } else {
      it->second = join_cookies(kept);
      ++it;
    }
  }
  if (placed) return;
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (iequals(it->first, "Cookie")) {
      it->second.append("; ").append(name).append("=").append(value);
      return;
    }
  }
  req.headers.add("Cookie", name + "=" + value);
}

template <typename Vec>
void set_first(Vec& fields, const std::string& name, const std::string& value) {
  for (auto& f : fields) {
    if (f.first == name) {
      f.second = value;
      return;
    }
  }
  fields.emplace_back(name, value);
}

} // namespace

std::string_view to_string(Method m) { return m == Method::Get ? "GET" : "POST"; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

bool is_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return is_tchar(static_cast<unsigned char>(c));
  });
}

void Headers::add(std::string name, std::string value) {
  entries_.emplace_back(std::move(name), std::move(value));
}

void Headers::set(std::string_view name, std::string value) {
  bool replaced = false;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (iequals(it->first, name)) {
      if (!replaced) {
        it->second = std::move(value);
        replaced = true;
        ++it;
      } else {
        it = entries_.erase(it);
      }
    } else {
      ++it;
    }
  }
  if (!replaced) {
    entries_.emplace_back(std::string(name), std::move(value));
  }
}

void Headers::remove(std::string_view name) {
  std::erase_if(entries_, [&](const Field& f) { return iequals(f.first, name); });
}

std::optional<std::string_view> Headers::get(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (iequals(n, name)) return std::string_view(v);
  }
  return std::nullopt;
}

std::vector<std::string_view> Headers::get_all(std::string_view name) const {
  std::vector<std::string_view> out;
  for (const auto& [n, v] : entries_) {
    if (iequals(n, name)) out.emplace_back(v);
  }
  return out;
}

void Headers::move_to_front(std::string_view name) {
  std::stable_partition(entries_.begin(), entries_.end(),
                        [&](const Field& f) { return iequals(f.first, name); });
}

void Headers::reverse() { std::reverse(entries_.begin(), entries_.end()); }

std::optional<std::string_view> HttpRequest::query_value(std::string_view name) const {
  for (const auto& [k, v] : query) {
    if (k == name) return std::string_view(v);
  }
  return std::nullopt;
}

std::string HttpRequest::target() const {
  std::string out = path;
  if (!query.empty()) {
    out.push_back('?');
    out.append(encode_form(query));
  }
  return out;
}

std::string_view reason_phrase(Status s) {
  switch (s) {
  case Status::Ok: return "OK";
  case Status::Found: return "Found";
  case Status::BadRequest: return "Bad Request";
  case Status::Unauthorized: return "Unauthorized";
  case Status::Forbidden: return "Forbidden";
  case Status::NotFound: return "Not Found";
  case Status::Conflict: return "Conflict";
  }
  return "Unknown";
}

std::optional<Status> parse_status(int code) {
  constexpr std::array<Status, 7> all{Status::Ok,        Status::Found,
                                      Status::BadRequest, Status::Unauthorized,
                                      Status::Forbidden,  Status::NotFound,
                                      Status::Conflict};
  for (Status s : all) {
    if (static_cast<int>(s) == code) return s;
  }
  return std::nullopt;
}

std::string serialize_request(const HttpRequest& req) {
  std::string out;
  out.append(to_string(req.method)).append(" ").append(req.target()).append(" ");
  out.append(kVersion).append(kCrlf);
  write_headers(out, req.headers);
  out.append(req.body);
  return out;
}

HttpRequest parse_request(std::string_view wire) {
  const std::size_t end = wire.find("\r\n\r\n");
  if (end == std::string_view::npos) {
    const auto lines = split(wire, kCrlf);
    throw ParseError(lines.size(), "missing blank line after headers");
  }
  const auto lines = split(wire.substr(0, end), kCrlf);
  HttpRequest req;
  const auto parts = split(lines[0], " ");
  if (parts.size() != 3 || parts[2] != kVersion) {
    throw ParseError(1, "malformed start line");
  }
  if (parts[0] == "GET") {
    req.method = Method::Get;
  } else if (parts[0] == "POST") {
    req.method = Method::Post;
  } else {
    throw ParseError(1, "unsupported method '" + std::string(parts[0]) + "'");
  }
  const std::string_view target = parts[1];
  const std::size_t q = target.find('?');
  req.path = std::string(target.substr(0, q));
  if (!valid_path(req.path)) {
    throw ParseError(1, "malformed request target");
  }
  if (q != std::string_view::npos) {
    req.query = parse_form(target.substr(q + 1));
  }
  parse_header_lines(lines, req.headers);
  req.body = std::string(wire.substr(end + 4));
  return req;
}

std::string serialize_response(const HttpResponse& resp) {
  std::string out;
  out.append(kVersion).append(" ").append(std::to_string(static_cast<int>(resp.status)));
  out.append(" ").append(reason_phrase(resp.status)).append(kCrlf);
  write_headers(out, resp.headers);
  out.append(resp.body);
  return out;
}

HttpResponse parse_response(std::string_view wire) {
  const std::size_t end = wire.find("\r\n\r\n");
  if (end == std::string_view::npos) {
    throw ParseError(split(wire, kCrlf).size(), "missing blank line after headers");
  }
  const auto lines = split(wire.substr(0, end), kCrlf);
  const std::string_view start = lines[0];
  if (start.substr(0, kVersion.size()) != kVersion || start.size() < kVersion.size() + 4) {
    throw ParseError(1, "malformed status line");
  }
  const std::string_view code = start.substr(kVersion.size() + 1, 3);
  int value = 0;
  for (char c : code) {
    if (c < '0' || c > '9') throw ParseError(1, "malformed status code");
    value = value * 10 + (c - '0');
  }
  const auto status = parse_status(value);
  if (!status) {
    throw ParseError(1, "unsupported status code " + std::string(code));
  }
  HttpResponse resp;
  resp.status = *status;
  parse_header_lines(lines, resp.headers);
  resp.body = std::string(wire.substr(end + 4));
  return resp;
}

bool is_valid_request(const HttpRequest& req) {
  if (!valid_path(req.path)) return false;
  return std::all_of(req.headers.begin(), req.headers.end(), [](const Field& f) {
    return is_token(f.first) && valid_header_value(f.second);
  });
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if ((u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
        c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(c);
    } else {
      out.push_back('%');
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 0x0F]);
    }
  }
  return out;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      const int hi = hex_value(s[i + 1]);
      const int lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>((hi << 4) | lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::vector<Field> parse_form(std::string_view body) {
  std::vector<Field> out;
  if (body.empty()) return out;
  for (std::string_view seg : split(body, "&")) {
    if (seg.empty()) continue;
    const std::size_t eq = seg.find('=');
    if (eq == std::string_view::npos) {
      out.emplace_back(percent_decode(seg), std::string());
    } else {
      out.emplace_back(percent_decode(seg.substr(0, eq)), percent_decode(seg.substr(eq + 1)));
    }
  }
  return out;
}

std::string encode_form(const std::vector<Field>& fields) {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out.push_back('&');
    out.append(percent_encode(k)).append("=").append(percent_encode(v));
  }
  return out;
}

std::optional<std::string> form_value(std::string_view body, std::string_view name) {
  for (auto& [k, v] : parse_form(body)) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::vector<std::string> form_values(std::string_view body, std::string_view name) {
  std::vector<std::string> out;
  for (auto& [k, v] : parse_form(body)) {
    if (k == name) out.push_back(std::move(v));
  }
  return out;
}

std::vector<Field> request_cookies(const HttpRequest& req) {
  std::vector<Field> out;
  for (std::string_view v : req.headers.get_all("Cookie")) {
    auto part = split_cookie_header(v);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::optional<std::string> cookie(const HttpRequest& req, std::string_view name) {
  for (auto& [n, v] : request_cookies(req)) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::optional<Field> parse_set_cookie(std::string_view header_value) {
  const std::string_view first = trim(header_value.substr(0, header_value.find(';')));
  const std::size_t eq = first.find('=');
  if (eq == std::string_view::npos || eq == 0) return std::nullopt;
  return Field{std::string(trim(first.substr(0, eq))), std::string(trim(first.substr(eq + 1)))};
}

void Session::absorb(const HttpResponse& resp) {
  for (std::string_view v : resp.headers.get_all("Set-Cookie")) {
    if (auto c = parse_set_cookie(v)) {
      if (c->first == "sid") session_id = c->second;
      cookies[c->first] = c->second;
    }
  }
}

void Session::attach(HttpRequest& req) const {
  req.headers.remove("Cookie");
  if (cookies.empty()) return;
  std::string line;
  for (const auto& [name, value] : cookies) {
    if (!line.empty()) line += "; ";
    line += name;
    line += '=';
    line += value;
  }
  req.headers.add("Cookie", std::move(line));
}

std::string_view to_string(Mutation::Kind k) {
  switch (k) {
  case Mutation::Kind::SetHeader: return "SetHeader";
  case Mutation::Kind::RemoveHeader: return "RemoveHeader";
  case Mutation::Kind::SetCookie: return "SetCookie";
  case Mutation::Kind::SetQueryParam: return "SetQueryParam";
  case Mutation::Kind::SetBodyField: return "SetBodyField";
  case Mutation::Kind::Reorder: return "Reorder";
  case Mutation::Kind::Duplicate: return "Duplicate";
  }
  return "?";
}

std::optional<Mutation::Kind> parse_mutation_kind(std::string_view s) {
  using K = Mutation::Kind;
  for (K k : {K::SetHeader, K::RemoveHeader, K::SetCookie, K::SetQueryParam,
              K::SetBodyField, K::Reorder, K::Duplicate}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

HttpRequest apply_mutation(const HttpRequest& req, const Mutation& m) {
  HttpRequest out = req;
  switch (m.kind) {
  case Mutation::Kind::SetHeader:
    out.headers.set(m.name, m.value);
    break;
  case Mutation::Kind::RemoveHeader:
    out.headers.remove(m.name);
    break;
  case Mutation::Kind::SetCookie:
    set_cookie(out, m.name, m.value);
    break;
  case Mutation::Kind::SetQueryParam:
    set_first(out.query, m.name, m.value);
    break;
  case Mutation::Kind::SetBodyField: {
    auto fields = parse_form(out.body);
    set_first(fields, m.name, m.value);
    out.body = encode_form(fields);
    break;
  }
  case Mutation::Kind::Reorder:
    if (m.name.empty()) {
      out.headers.reverse();
    } else {
      out.headers.move_to_front(m.name);
    }
    break;
  case Mutation::Kind::Duplicate:
    break;
  }
  return out;
}

std::vector<HttpRequest> emit(const HttpRequest& req, const Mutation& m) {
  if (m.kind == Mutation::Kind::Duplicate) {
    return {req, req};
  }
  return {apply_mutation(req, m)};
}

} // namespace payflow::http
