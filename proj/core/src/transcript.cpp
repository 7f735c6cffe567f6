#include "payflow/transcript.hpp"

#include "json_io.hpp"
#include "payflow/codec.hpp"

namespace payflow::actors {

std::string_view to_string(Direction d) {
  switch (d) {
  case Direction::ClientToPortal: return "C->P";
  case Direction::PortalToClient: return "P->C";
  case Direction::GatewayToErp: return "G->E";
  case Direction::PortalToErp: return "P->E";
  case Direction::ErpInternal: return "E";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
  for (auto d : {Direction::ClientToPortal, Direction::PortalToClient, Direction::GatewayToErp,
                 Direction::PortalToErp, Direction::ErpInternal}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::vector<TranscriptRecord> Transcript::slice_until(Tick last) const {
  std::vector<TranscriptRecord> out;
  for (const auto& r : records_) {
    if (r.tick > last) break;
    out.push_back(r);
  }
  return out;
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    jsonio::Json j{{"tick", r.tick},
                   {"dir", to_string(r.direction)},
                   {"actor", r.actor},
                   {"session", r.session},
                   {"wire", codec::base64_encode(r.wire)},
                   {"summary", r.summary}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
  Transcript t;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    try {
      const auto j = jsonio::Json::parse(line);
      TranscriptRecord r;
      r.tick = jsonio::get_uint(j, "tick");
      const auto dir = parse_direction(jsonio::get_string(j, "dir"));
      if (!dir) throw jsonio::FormatError("unknown direction");
      r.direction = *dir;
      r.actor = jsonio::get_string(j, "actor");
      r.session = jsonio::get_string(j, "session");
      const auto wire = codec::base64_decode(jsonio::get_string(j, "wire"));
      if (!wire) throw jsonio::FormatError("wire is not valid base64");
      r.wire = codec::to_string(*wire);
      r.summary = jsonio::get_string(j, "summary");
      t.append(std::move(r));
    } catch (const jsonio::Json::exception& e) {
      throw Error("transcript line " + std::to_string(line_no) + ": " + e.what());
    } catch (const jsonio::FormatError& e) {
      throw Error("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

} // namespace payflow::actors
