#include "oransec/telemetry.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "oransec/error.hpp"

namespace oransec::telemetry {

std::string_view to_string(Layer layer) noexcept { return layer == Layer::RRC ? "RRC" : "NAS"; }
std::string_view to_string(Direction d) noexcept { return d == Direction::UL ? "UL" : "DL"; }

std::optional<Layer> parse_layer(std::string_view s) noexcept {
  if (s == "RRC") return Layer::RRC;
  if (s == "NAS") return Layer::NAS;
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view s) noexcept {
  if (s == "UL") return Direction::UL;
  if (s == "DL") return Direction::DL;
  return std::nullopt;
}

std::string_view to_string(EventSource s) noexcept {
  switch (s) {
    case EventSource::xapp: return "xapp";
    case EventSource::rapp: return "rapp";
    case EventSource::monitor: return "monitor";
    case EventSource::operator_: return "operator";
  }
  return "monitor";
}

std::string_view to_string(Severity s) noexcept {
  switch (s) {
    case Severity::low: return "low";
    case Severity::medium: return "medium";
    case Severity::high: return "high";
  }
  return "low";
}

std::optional<EventSource> parse_event_source(std::string_view s) noexcept {
  if (s == "xapp") return EventSource::xapp;
  if (s == "rapp") return EventSource::rapp;
  if (s == "monitor") return EventSource::monitor;
  if (s == "operator") return EventSource::operator_;
  return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view s) noexcept {
  if (s == "low") return Severity::low;
  if (s == "medium") return Severity::medium;
  if (s == "high") return Severity::high;
  return std::nullopt;
}

namespace {

[[noreturn]] void bad(std::string_view field, std::string_view what) {
  throw Error(ErrorCode::SchemaViolation, std::string(field) + ": " + std::string(what));
}

std::string string_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) bad(key, "missing or not a string");
  auto v = it->get<std::string>();
  if (v.empty()) bad(key, "must be non-empty");
  return v;
}

}  // namespace

TelemetryRecord parse_record(const Json& j) {
  if (!j.is_object()) bad("record", "not an object");
  TelemetryRecord r;
  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) bad("ts", "missing or not an integer");
  r.ts = ts->get<TimestampUs>();
  if (r.ts < 0) bad("ts", "must be non-negative");

  auto layer = parse_layer(string_field(j, "layer"));
  if (!layer) bad("layer", "not one of RRC, NAS");
  r.layer = *layer;
  auto dir = parse_direction(string_field(j, "direction"));
  if (!dir) bad("direction", "not one of UL, DL");
  r.direction = *dir;
  r.ue_id = string_field(j, "ue_id");
  r.message_name = string_field(j, "message_name");

  if (auto f = j.find("fields"); f != j.end() && !f->is_null()) {
    if (!f->is_object()) bad("fields", "not an object");
    for (auto it = f->begin(); it != f->end(); ++it) {
      if (!it->is_string()) bad("fields." + it.key(), "values must be strings");
      r.fields.emplace(it.key(), it->get<std::string>());
    }
  }
  if (auto h = j.find("raw_hex"); h != j.end() && !h->is_null()) {
    if (!h->is_string()) bad("raw_hex", "not a string");
    auto hex = h->get<std::string>();
    if (hex.size() % 2 != 0 || !is_hex_string(hex)) bad("raw_hex", "odd length or non-hex");
    r.raw_hex = std::move(hex);
  }
  return r;
}

Json to_json(const TelemetryRecord& r) {
  Json j{{"ts", r.ts},
         {"layer", to_string(r.layer)},
         {"direction", to_string(r.direction)},
         {"ue_id", r.ue_id},
         {"message_name", r.message_name},
         {"fields", r.fields}};
  if (r.raw_hex) j["raw_hex"] = *r.raw_hex;
  return j;
}

Json to_json(const IngestSummary& s) {
  return Json{{"trace_id", s.trace_id}, {"count", s.count}, {"rejected_count", s.rejected_count},
              {"first_ts", s.first_ts}, {"last_ts", s.last_ts}};
}

EventInput parse_event_input(const Json& j) {
  if (!j.is_object()) bad("event", "not an object");
  EventInput in;
  if (auto s = j.find("source"); s != j.end()) {
    if (!s->is_string()) bad("source", "not a string");
    auto src = parse_event_source(s->get<std::string>());
    if (!src) bad("source", "not one of xapp, rapp, monitor, operator");
    in.source = *src;
  }
  in.description = string_field(j, "description");
  if (auto s = j.find("severity_hint"); s != j.end() && !s->is_null()) {
    auto sev = s->is_string() ? parse_severity(s->get<std::string>()) : std::nullopt;
    if (!sev) bad("severity_hint", "not one of low, medium, high");
    in.severity_hint = sev;
  }
  if (auto t = j.find("telemetry_ref"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) bad("telemetry_ref", "not a string");
    in.telemetry_ref = t->get<std::string>();
  }
  if (auto u = j.find("affected_ue_ids"); u != j.end() && !u->is_null()) {
    if (!u->is_array()) bad("affected_ue_ids", "not an array");
    for (const auto& id : *u) {
      if (!id.is_string()) bad("affected_ue_ids", "entries must be strings");
      in.affected_ue_ids.push_back(id.get<std::string>());
    }
  }
  return in;
}

Json to_json(const ThreatEvent& e) {
  Json j{{"event_id", e.event_id},
         {"received_at", e.received_at},
         {"source", to_string(e.source)},
         {"description", e.description},
         {"affected_ue_ids", e.affected_ue_ids}};
  j["severity_hint"] = e.severity_hint ? Json(to_string(*e.severity_hint)) : Json(nullptr);
  j["telemetry_ref"] = e.telemetry_ref ? Json(*e.telemetry_ref) : Json(nullptr);
  return j;
}

ThreatEvent event_from_json(const Json& j) {
  EventInput in = parse_event_input(j);
  ThreatEvent e;
  e.event_id = j.at("event_id").get<std::string>();
  e.received_at = j.at("received_at").get<TimestampUs>();
  e.source = in.source;
  e.description = std::move(in.description);
  e.severity_hint = in.severity_hint;
  e.telemetry_ref = std::move(in.telemetry_ref);
  e.affected_ue_ids = std::move(in.affected_ue_ids);
  return e;
}

Json to_json(const UEDescription& ue) {
  return Json{{"ue_id", ue.ue_id},
              {"rrc_state", ue.rrc_state},
              {"security_context",
               {{"ciphering_alg", ue.security_context.ciphering_alg},
                {"integrity_alg", ue.security_context.integrity_alg},
                {"activated", ue.security_context.activated}}},
              {"last_seen_ts", ue.last_seen_ts}};
}

namespace {

std::string normalize_alg(std::string_view raw, std::string_view prefix) {
  std::string v = to_lower_ascii(raw);
  if (v.size() == 4 && v.substr(0, 3) == prefix && v[3] >= '0' && v[3] <= '3') return v;
  return "unknown";
}

}  // namespace

std::string normalize_ciphering_alg(std::string_view raw) { return normalize_alg(raw, "nea"); }
std::string normalize_integrity_alg(std::string_view raw) { return normalize_alg(raw, "nia"); }

std::map<std::string, UEDescription> derive_ue_states(const std::vector<TelemetryRecord>& ordered) {
  struct Pending {
    std::string cipher;
    std::string integrity;
  };
  std::map<std::string, UEDescription> states;
  std::map<std::string, Pending> pending;

  for (const auto& r : ordered) {
    auto& ue = states[r.ue_id];
    ue.ue_id = r.ue_id;
    ue.last_seen_ts = std::max(ue.last_seen_ts, r.ts);
    if (r.layer != Layer::RRC) continue;

    const auto& m = r.message_name;
    if (m == "SecurityModeCommand") {
      auto field = [&](const char* key) {
        auto it = r.fields.find(key);
        return it == r.fields.end() ? std::string() : it->second;
      };
      pending[r.ue_id] = {normalize_ciphering_alg(field("cipherAlgorithm")),
                          normalize_integrity_alg(field("integrityProtAlgorithm"))};
    } else if (m == "SecurityModeComplete") {
      if (auto it = pending.find(r.ue_id); it != pending.end()) {
        ue.security_context = {it->second.cipher, it->second.integrity, true};
        pending.erase(it);
      }
    }

    if (m == "RRCRelease") {
      ue.rrc_state = r.fields.count("suspendConfig") ? "RRC_INACTIVE" : "RRC_IDLE";
    } else if (m == "RRCSetup" || m == "RRCSetupComplete" || m == "RRCResume" ||
               m == "RRCReestablishment" || m == "SecurityModeComplete" ||
               m == "RRCReconfiguration" || m == "RRCReconfigurationComplete") {
      ue.rrc_state = "RRC_CONNECTED";
    }
  }
  return states;
}

bool TrafficFilter::matches(const TelemetryRecord& r) const {
  if (layer && r.layer != *layer) return false;
  if (direction && r.direction != *direction) return false;
  if (ue_id && r.ue_id != *ue_id) return false;
  return true;
}

TelemetryStore::TelemetryStore(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {}

IngestSummary TelemetryStore::ingest_trace(const std::string& trace_id, std::istream& lines) {
  if (has_trace(trace_id)) {
    throw Error(ErrorCode::DuplicateTraceId, "trace already ingested: " + trace_id);
  }
  std::vector<TelemetryRecord> records;
  std::size_t rejected = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_record(Json::parse(line)));
    } catch (const Json::exception& e) {
      ++rejected;
      spdlog::warn("trace {} line {}: {}", trace_id, line_no, e.what());
    } catch (const Error& e) {
      ++rejected;
      spdlog::warn("trace {} line {}: {}", trace_id, line_no, e.what());
    }
  }
  if (records.empty()) {
    throw Error(ErrorCode::AllRecordsRejected,
                "no valid records in trace " + trace_id + " (" + std::to_string(rejected) +
                    " rejected)");
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) { return a.ts < b.ts; });

  IngestSummary summary{trace_id, records.size(), rejected, records.front().ts, records.back().ts};

  std::unique_lock lock(mu_);
  if (traces_.count(trace_id)) {
    throw Error(ErrorCode::DuplicateTraceId, "trace already ingested: " + trace_id);
  }
  traces_.emplace(trace_id, std::move(records));
  trace_order_.push_back(trace_id);
  rebuild_ue_states_locked();
  return summary;
}

IngestSummary TelemetryStore::ingest_trace_file(const std::string& trace_id,
                                                const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  return ingest_trace(trace_id, in);
}

void TelemetryStore::rebuild_ue_states_locked() {
  std::vector<TelemetryRecord> all;
  for (const auto& id : trace_order_) {
    const auto& recs = traces_.at(id);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) { return a.ts < b.ts; });
  ue_states_ = derive_ue_states(all);
}

std::vector<TelemetryRecord> TelemetryStore::get_traffic(const std::string& trace_id,
                                                         TimestampUs ts_from, TimestampUs ts_to,
                                                         const TrafficFilter& filter) const {
  if (ts_from > ts_to) {
    throw Error(ErrorCode::InvalidWindow, "window start " + std::to_string(ts_from) +
                                              " is after end " + std::to_string(ts_to));
  }
  std::shared_lock lock(mu_);
  auto it = traces_.find(trace_id);
  if (it == traces_.end()) throw Error(ErrorCode::UnknownTraceId, "unknown trace " + trace_id);
  const auto& recs = it->second;
  auto lo = std::lower_bound(recs.begin(), recs.end(), ts_from,
                             [](const TelemetryRecord& r, TimestampUs t) { return r.ts < t; });
  std::vector<TelemetryRecord> out;
  for (auto r = lo; r != recs.end() && r->ts <= ts_to; ++r) {
    if (filter.matches(*r)) out.push_back(*r);
  }
  return out;
}

bool TelemetryStore::has_trace(const std::string& trace_id) const {
  std::shared_lock lock(mu_);
  return traces_.count(trace_id) != 0;
}

std::vector<std::string> TelemetryStore::trace_ids() const {
  std::shared_lock lock(mu_);
  return trace_order_;
}

std::pair<TimestampUs, TimestampUs> TelemetryStore::trace_span(const std::string& trace_id) const {
  std::shared_lock lock(mu_);
  auto it = traces_.find(trace_id);
  if (it == traces_.end()) throw Error(ErrorCode::UnknownTraceId, "unknown trace " + trace_id);
  return {it->second.front().ts, it->second.back().ts};
}

ThreatEvent TelemetryStore::add_event(const EventInput& input) {
  if (input.description.empty()) {
    throw Error(ErrorCode::SchemaViolation, "description: must be non-empty");
  }
  std::unique_lock lock(mu_);
  std::ostringstream id;
  id << "EVT-" << std::setw(6) << std::setfill('0') << next_event_seq_++;
  ThreatEvent e{id.str(),          clock_->now_us(),          input.source,
                input.description, input.severity_hint,       input.telemetry_ref,
                input.affected_ue_ids};
  events_.push_back(e);
  return e;
}

void TelemetryStore::restore_event(const ThreatEvent& event) {
  std::unique_lock lock(mu_);
  for (const auto& e : events_) {
    if (e.event_id == event.event_id) {
      throw Error(ErrorCode::InvalidRequest, "duplicate event id " + event.event_id);
    }
  }
  events_.push_back(event);
}

std::vector<ThreatEvent> TelemetryStore::get_network_events(TimestampUs since) const {
  std::shared_lock lock(mu_);
  std::vector<ThreatEvent> out;
  for (const auto& e : events_) {
    if (e.received_at >= since) out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const ThreatEvent& a, const ThreatEvent& b) {
    return a.received_at < b.received_at;
  });
  return out;
}

std::optional<ThreatEvent> TelemetryStore::find_event(const std::string& event_id) const {
  std::shared_lock lock(mu_);
  for (const auto& e : events_) {
    if (e.event_id == event_id) return e;
  }
  return std::nullopt;
}

UEDescription TelemetryStore::get_ue_description(const std::string& ue_id) const {
  std::shared_lock lock(mu_);
  auto it = ue_states_.find(ue_id);
  if (it == ue_states_.end()) throw Error(ErrorCode::UnknownUeId, "unknown UE " + ue_id);
  return it->second;
}

std::vector<std::string> TelemetryStore::ue_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : ue_states_) out.push_back(id);
  return out;
}

void TelemetryStore::reset() {
  std::unique_lock lock(mu_);
  trace_order_.clear();
  traces_.clear();
  events_.clear();
  ue_states_.clear();
  next_event_seq_ = 1;
}

Json TelemetryStore::to_json() const {
  std::shared_lock lock(mu_);
  Json traces = Json::array();
  for (const auto& id : trace_order_) {
    Json recs = Json::array();
    for (const auto& r : traces_.at(id)) recs.push_back(telemetry::to_json(r));
    traces.push_back(Json{{"trace_id", id}, {"records", recs}});
  }
  Json events = Json::array();
  for (const auto& e : events_) events.push_back(telemetry::to_json(e));
  return Json{{"traces", traces}, {"events", events}, {"next_event_seq", next_event_seq_}};
}

void TelemetryStore::restore(const Json& j) {
  std::unique_lock lock(mu_);
  trace_order_.clear();
  traces_.clear();
  events_.clear();
  for (const auto& t : j.at("traces")) {
    std::vector<TelemetryRecord> recs;
    for (const auto& r : t.at("records")) recs.push_back(parse_record(r));
    const auto id = t.at("trace_id").get<std::string>();
    traces_.emplace(id, std::move(recs));
    trace_order_.push_back(id);
  }
  for (const auto& e : j.at("events")) events_.push_back(event_from_json(e));
  next_event_seq_ = j.at("next_event_seq").get<std::size_t>();
  rebuild_ue_states_locked();
}

}  // namespace oransec::telemetry
