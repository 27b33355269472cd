#pragma once

#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "oransec/util.hpp"

namespace oransec::telemetry {

enum class Layer { RRC, NAS };
enum class Direction { UL, DL };

std::string_view to_string(Layer layer) noexcept;
std::string_view to_string(Direction direction) noexcept;
std::optional<Layer> parse_layer(std::string_view s) noexcept;
std::optional<Direction> parse_direction(std::string_view s) noexcept;

struct TelemetryRecord {
  TimestampUs ts = 0;
  Layer layer = Layer::RRC;
  Direction direction = Direction::UL;
  std::string ue_id;
  std::string message_name;
  std::map<std::string, std::string> fields;
  std::optional<std::string> raw_hex;
};

// Throws Error{SchemaViolation} describing the first offending field.
TelemetryRecord parse_record(const Json& j);
Json to_json(const TelemetryRecord& record);

struct IngestSummary {
  std::string trace_id;
  std::size_t count = 0;
  std::size_t rejected_count = 0;
  TimestampUs first_ts = 0;
  TimestampUs last_ts = 0;
};

Json to_json(const IngestSummary& summary);

enum class EventSource { xapp, rapp, monitor, operator_ };
enum class Severity { low, medium, high };

std::string_view to_string(EventSource s) noexcept;
std::string_view to_string(Severity s) noexcept;
std::optional<EventSource> parse_event_source(std::string_view s) noexcept;
std::optional<Severity> parse_severity(std::string_view s) noexcept;

// Ingress shape of an event before the store assigns identity.
struct EventInput {
  EventSource source = EventSource::monitor;
  std::string description;
  std::optional<Severity> severity_hint;
  std::optional<std::string> telemetry_ref;
  std::vector<std::string> affected_ue_ids;
};

struct ThreatEvent {
  std::string event_id;
  TimestampUs received_at = 0;
  EventSource source = EventSource::monitor;
  std::string description;
  std::optional<Severity> severity_hint;
  std::optional<std::string> telemetry_ref;
  std::vector<std::string> affected_ue_ids;
};

EventInput parse_event_input(const Json& j);
Json to_json(const ThreatEvent& event);
ThreatEvent event_from_json(const Json& j);

struct SecurityContext {
  std::string ciphering_alg = "unknown";
  std::string integrity_alg = "unknown";
  bool activated = false;
};

struct UEDescription {
  std::string ue_id;
  std::string rrc_state = "RRC_IDLE";
  SecurityContext security_context;
  TimestampUs last_seen_ts = 0;
};

Json to_json(const UEDescription& ue);

// Maps a raw algorithm string onto {nea0..nea3}/{nia0..nia3}, else "unknown".
std::string normalize_ciphering_alg(std::string_view raw);
std::string normalize_integrity_alg(std::string_view raw);

// Derives UE state from a time-ordered record sequence. A SecurityModeComplete
// that follows a SecurityModeCommand activates the algorithms carried by that
// command.
std::map<std::string, UEDescription> derive_ue_states(const std::vector<TelemetryRecord>& ordered);

struct TrafficFilter {
  std::optional<Layer> layer;
  std::optional<Direction> direction;
  std::optional<std::string> ue_id;

  bool matches(const TelemetryRecord& r) const;
};

// Thread-safe store. Traces commit atomically; readers never see a partial
// trace. Queries are pure functions of the committed content.
class TelemetryStore {
 public:
  explicit TelemetryStore(std::shared_ptr<Clock> clock = system_clock());

  IngestSummary ingest_trace(const std::string& trace_id, std::istream& lines);
  IngestSummary ingest_trace_file(const std::string& trace_id, const std::filesystem::path& path);

  std::vector<TelemetryRecord> get_traffic(const std::string& trace_id, TimestampUs ts_from,
                                           TimestampUs ts_to,
                                           const TrafficFilter& filter = {}) const;
  bool has_trace(const std::string& trace_id) const;
  std::vector<std::string> trace_ids() const;
  std::pair<TimestampUs, TimestampUs> trace_span(const std::string& trace_id) const;

  ThreatEvent add_event(const EventInput& input);
  // Re-inserts an event with its identity intact (state restore).
  void restore_event(const ThreatEvent& event);
  std::vector<ThreatEvent> get_network_events(TimestampUs since) const;
  std::optional<ThreatEvent> find_event(const std::string& event_id) const;

  UEDescription get_ue_description(const std::string& ue_id) const;
  std::vector<std::string> ue_ids() const;

  void reset();

  Json to_json() const;
  void restore(const Json& j);

 private:
  void rebuild_ue_states_locked();

  std::shared_ptr<Clock> clock_;
  mutable std::shared_mutex mu_;
  std::vector<std::string> trace_order_;
  std::map<std::string, std::vector<TelemetryRecord>> traces_;
  std::vector<ThreatEvent> events_;
  std::map<std::string, UEDescription> ue_states_;
  std::size_t next_event_seq_ = 1;
};

}  // namespace oransec::telemetry
