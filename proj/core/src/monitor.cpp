#include "payflow/monitor.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace payflow::monitor {

using actors::Direction;
using actors::PortalRecord;
using actors::PortalView;

std::string_view to_string(DiscrepancyKind k) {
  switch (k) {
  case DiscrepancyKind::PortalAheadOfErp: return "PortalAheadOfErp";
  case DiscrepancyKind::ErpAheadOfPortal: return "ErpAheadOfPortal";
  case DiscrepancyKind::MissingInPortal: return "MissingInPortal";
  case DiscrepancyKind::MissingInErp: return "MissingInErp";
  }
  return "?";
}

std::optional<DiscrepancyKind> parse_discrepancy_kind(std::string_view s) {
  for (auto k : {DiscrepancyKind::PortalAheadOfErp, DiscrepancyKind::ErpAheadOfPortal,
                 DiscrepancyKind::MissingInPortal, DiscrepancyKind::MissingInErp}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(AnomalyKind k) {
  switch (k) {
  case AnomalyKind::PartialFlowRepeat: return "PartialFlowRepeat";
  case AnomalyKind::UnexpectedParam: return "UnexpectedParam";
  case AnomalyKind::OutOfOrderEndpoint: return "OutOfOrderEndpoint";
  case AnomalyKind::DuplicateRequest: return "DuplicateRequest";
  }
  return "?";
}

std::optional<AnomalyKind> parse_anomaly_kind(std::string_view s) {
  for (auto k : {AnomalyKind::PartialFlowRepeat, AnomalyKind::UnexpectedParam,
                 AnomalyKind::OutOfOrderEndpoint, AnomalyKind::DuplicateRequest}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<DiscrepancyKind> classify(const PortalRecord* portal,
                                        const fsm::BusinessObject* erp) {
  if (portal == nullptr && erp == nullptr) return std::nullopt;
  if (portal == nullptr) return DiscrepancyKind::MissingInPortal;
  if (erp == nullptr) return DiscrepancyKind::MissingInErp;
  const bool portal_paid = portal->claims_paid();
  const bool erp_paid = fsm::is_paid(erp->state);
  if (portal_paid && !erp_paid) return DiscrepancyKind::PortalAheadOfErp;
  if (erp_paid && portal->view == PortalView::Unpaid && !portal->access_granted) {
    return DiscrepancyKind::ErpAheadOfPortal;
  }
  return std::nullopt;
}

std::vector<Discrepancy> reconcile(std::span<const PortalRecord> portal,
                                   std::span<const fsm::BusinessObject> erp, Tick now) {
  std::map<std::string_view, std::pair<const PortalRecord*, const fsm::BusinessObject*>> joined;
  for (const auto& r : portal) joined[r.object_id].first = &r;
  for (const auto& o : erp) joined[o.object_id].second = &o;

  std::vector<Discrepancy> out;
  for (const auto& [id, sides] : joined) {
    const auto kind = classify(sides.first, sides.second);
    if (!kind) continue;
    Discrepancy d;
    d.object_id = std::string(id);
    if (sides.first) {
      d.portal_view = sides.first->view;
      d.access_granted = sides.first->access_granted;
    }
    if (sides.second) d.erp_state = sides.second->state;
    d.kind = *kind;
    d.detected_at = now;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Discrepancy> reconcile(const actors::Portal& portal, const actors::Erp& erp,
                                   Tick now) {
  std::vector<PortalRecord> records;
  records.reserve(portal.records().size());
  for (const auto& [id, r] : portal.records()) records.push_back(r);
  const auto objects = erp.objects();
  return reconcile(records, objects, now);
}

void PeriodicReconciler::observe(const actors::Portal& portal, const actors::Erp& erp,
                                 Tick now) {
  if (now % every_ != 0) return;
  ++runs_;
  for (auto& d : reconcile(portal, erp, now)) {
    if (seen_.emplace(d.object_id, d.kind).second) findings_.push_back(std::move(d));
  }
}

namespace {

struct ClientRequest {
  std::size_t index;
  const actors::TranscriptRecord* record;
  http::HttpRequest request;
};

std::optional<std::string_view> pay_object(const http::HttpRequest& req) {
  if (req.method != http::Method::Post || !req.path.starts_with("/pay/")) return std::nullopt;
  return std::string_view(req.path).substr(5);
}

bool is_return(const http::HttpRequest& req) {
  return req.method == http::Method::Get && req.path == "/pay/return";
}

} // namespace

std::vector<AnomalyEvent> scan_transcript(std::span<const actors::TranscriptRecord> records,
                                          const ScanConfig& config) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].tick < records[i - 1].tick) {
      throw TranscriptOrderError("transcript record " + std::to_string(i) +
                                 " is earlier than its predecessor");
    }
  }

  std::vector<AnomalyEvent> out;
  const auto declared = [&](std::string_view v, const std::vector<std::string>& set) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };

  // Responses that show an object as paid, by session: (index, object).
  std::map<std::string, std::vector<std::pair<std::size_t, std::string>>, std::less<>> paid_responses;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.direction != Direction::PortalToClient) continue;
    http::HttpResponse resp;
    try {
      resp = http::parse_response(r.wire);
    } catch (const http::ParseError&) {
      continue;
    }
    const auto obj = http::form_value(resp.body, "obj");
    if (!obj) continue;
    if (http::form_value(resp.body, "view") == "PaidView" ||
        http::form_value(resp.body, "service") == "granted") {
      paid_responses[r.session].emplace_back(i, *obj);
    }
  }

  std::vector<ClientRequest> requests;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.direction != Direction::ClientToPortal) continue;
    try {
      requests.push_back({i, &r, http::parse_request(r.wire)});
    } catch (const http::ParseError&) {
      out.push_back({AnomalyKind::UnexpectedParam, r.session, {i}, r.tick, "",
                     "unparseable request"});
    }
  }

  // UnexpectedParam
  for (const auto& cr : requests) {
    std::vector<http::Field> params = cr.request.query;
    if (cr.request.method == http::Method::Post) {
      auto form = http::parse_form(cr.request.body);
      params.insert(params.end(), form.begin(), form.end());
    }
    for (const auto& [name, value] : params) {
      std::string detail;
      if (!declared(name, config.vocabulary)) {
        detail = "parameter '" + name + "' outside vocabulary";
      } else if (name == "obj" && !config.object_ids.empty() &&
                 !declared(value, config.object_ids)) {
        detail = "obj '" + value + "' is not a declared object";
      }
      if (!detail.empty()) {
        out.push_back({AnomalyKind::UnexpectedParam, cr.record->session, {cr.index},
                       cr.record->tick, name == "obj" ? value : "", detail});
        break;
      }
    }
  }

  // OutOfOrderEndpoint and PartialFlowRepeat, per session.
  std::map<std::string, std::vector<const ClientRequest*>, std::less<>> by_session;
  for (const auto& cr : requests) by_session[cr.record->session].push_back(&cr);
  for (const auto& [session, list] : by_session) {
    std::set<std::string, std::less<>> paid_for;
    std::set<std::string, std::less<>> flagged;
    for (const ClientRequest* cr : list) {
      if (auto obj = pay_object(cr->request)) {
        paid_for.emplace(*obj);
      } else if (is_return(cr->request)) {
        const std::string obj(cr->request.query_value("obj").value_or(""));
        if (!paid_for.count(obj) && flagged.insert(obj).second) {
          out.push_back({AnomalyKind::OutOfOrderEndpoint, session, {cr->index},
                         cr->record->tick, obj, "return before payment start"});
        }
      }
    }

    std::vector<const ClientRequest*> incomplete;
    const auto& paid = paid_responses[session];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const ClientRequest* cr = list[k];
      const auto obj = pay_object(cr->request);
      if (!obj) continue;
      // Only starts the portal accepted (answered with a redirect).
      const std::size_t resp_index = cr->index + 1;
      bool accepted = false;
      for (std::size_t j = resp_index; j < records.size(); ++j) {
        if (records[j].direction == Direction::PortalToClient) {
          accepted = records[j].summary.starts_with("302");
          break;
        }
      }
      if (!accepted) continue;
      const bool completed = std::any_of(paid.begin(), paid.end(), [&](const auto& p) {
        return p.first > cr->index && p.second == *obj;
      });
      if (!completed) incomplete.push_back(cr);
    }
    if (incomplete.size() >= config.partial_flow_threshold && config.partial_flow_threshold > 0) {
      AnomalyEvent ev{AnomalyKind::PartialFlowRepeat, session, {}, 0, "",
                      std::to_string(incomplete.size()) + " payment starts without completion"};
      for (const auto* cr : incomplete) ev.evidence.push_back(cr->index);
      ev.tick = incomplete[config.partial_flow_threshold - 1]->record->tick;
      ev.object_id = std::string(*pay_object(incomplete.front()->request));
      out.push_back(std::move(ev));
    }
  }

  // DuplicateRequest
  std::unordered_map<std::string_view, const ClientRequest*> last_seen;
  for (const auto& cr : requests) {
    const std::string_view wire = cr.record->wire;
    const auto it = last_seen.find(wire);
    if (it != last_seen.end() && cr.record->tick - it->second->record->tick <= config.duplicate_window) {
      std::string obj(cr.request.query_value("obj").value_or(""));
      if (obj.empty()) {
        for (std::string_view prefix : {"/pay/", "/status/", "/service/"}) {
          if (cr.request.path.starts_with(prefix) && cr.request.path != "/pay/return") {
            obj = cr.request.path.substr(prefix.size());
          }
        }
      }
      out.push_back({AnomalyKind::DuplicateRequest, cr.record->session,
                     {it->second->index, cr.index}, cr.record->tick, obj,
                     "byte-identical request repeated after " +
                         std::to_string(cr.record->tick - it->second->record->tick) + " ticks"});
    }
    last_seen[wire] = &cr;
  }

  std::stable_sort(out.begin(), out.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    return std::tie(a.tick, a.evidence.front()) < std::tie(b.tick, b.evidence.front());
  });
  return out;
}

std::vector<AnomalyEvent> scan_transcript(const actors::Transcript& transcript,
                                          const ScanConfig& config) {
  return scan_transcript(std::span<const actors::TranscriptRecord>(transcript.records()), config);
}

} // namespace payflow::monitor
