#include <gtest/gtest.h>

#include <sstream>

#include "oransec/error.hpp"
#include "oransec/telemetry.hpp"
#include "support.hpp"

using namespace oransec;
using namespace oransec::telemetry;

namespace {

std::string line(TimestampUs ts, const std::string& msg, const std::string& ue = "ue-1", const std::string& dir = "UL",
                 const Json& fields = Json::object(), const std::string& layer = "RRC") {
  Json j{{"ts", ts}, {"layer", layer}, {"direction", dir}, {"ue_id", ue}, {"message_name", msg}};
  if (!fields.empty()) j["fields"] = fields;
  return j.dump() + "\n";
}

IngestSummary ingest(TelemetryStore& store, const std::string& id, const std::string& text) {
  std::istringstream in(text);
  return store.ingest_trace(id, in);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no oransec::Error thrown";
  return ErrorCode::Internal;
}

}  // namespace

TEST(Record, ParsesAndValidates) {
  const auto r = parse_record(Json::parse(line(5, "RRCSetup", "ue-7", "DL", {{"a", "b"}})));
  EXPECT_EQ(r.ts, 5);
  EXPECT_EQ(r.direction, Direction::DL);
  EXPECT_EQ(r.fields.at("a"), "b");
  EXPECT_EQ(code_of([] { parse_record(Json{{"ts", 1}}); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_record(Json::parse(line(1, "X", "u", "SIDEWAYS"))); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_record(Json::parse(line(1, "X", "u", "UL", {}, "PHY"))); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_record(Json::parse(line(-1, "X"))); }), ErrorCode::SchemaViolation);
}

TEST(Ingest, CountsRejectedLinesAndSorts) {
  TelemetryStore store;
  const std::string text = line(30, "C") + "not json\n" + line(10, "A") + "{\"ts\":1}\n\n" + line(20, "B");
  const auto s = ingest(store, "t", text);
  EXPECT_EQ(s.count, 3u);
  EXPECT_EQ(s.rejected_count, 2u);
  EXPECT_EQ(s.first_ts, 10);
  EXPECT_EQ(s.last_ts, 30);
  const auto recs = store.get_traffic("t", 0, 100);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].message_name, "A");
  EXPECT_EQ(recs[2].message_name, "C");
}

TEST(Ingest, Errors) {
  TelemetryStore store;
  EXPECT_EQ(code_of([&] { ingest(store, "bad", "garbage\n{}\n"); }), ErrorCode::AllRecordsRejected);
  EXPECT_FALSE(store.has_trace("bad"));
  ingest(store, "t", line(1, "A"));
  EXPECT_EQ(code_of([&] { ingest(store, "t", line(2, "B")); }), ErrorCode::DuplicateTraceId);
  EXPECT_EQ(code_of([&] { store.ingest_trace_file("x", "/nonexistent.jsonl"); }), ErrorCode::FileUnreadable);
}

TEST(Traffic, WindowAndFilters) {
  TelemetryStore store;
  ingest(store, "t",
         line(1, "A", "ue-1", "UL") + line(2, "B", "ue-2", "DL") + line(3, "C", "ue-1", "DL", {}, "NAS") +
             line(3, "D", "ue-2", "UL"));
  EXPECT_EQ(store.get_traffic("t", 2, 3).size(), 3u);
  TrafficFilter f;
  f.ue_id = "ue-1";
  EXPECT_EQ(store.get_traffic("t", 0, 10, f).size(), 2u);
  f.layer = Layer::NAS;
  EXPECT_EQ(store.get_traffic("t", 0, 10, f).size(), 1u);
  TrafficFilter dl;
  dl.direction = Direction::DL;
  EXPECT_EQ(store.get_traffic("t", 0, 10, dl).size(), 2u);
  EXPECT_TRUE(store.get_traffic("t", 50, 60).empty());
  EXPECT_EQ(code_of([&] { store.get_traffic("t", 5, 4); }), ErrorCode::InvalidWindow);
  EXPECT_EQ(code_of([&] { store.get_traffic("nope", 0, 1); }), ErrorCode::UnknownTraceId);
}

TEST(UeState, SecurityModeCompleteActivatesCommandAlgorithms) {
  TelemetryStore store;
  ingest(store, "t",
         line(1, "RRCSetupRequest") + line(2, "RRCSetup", "ue-1", "DL") +
             line(3, "SecurityModeCommand", "ue-1", "DL",
                  {{"cipherAlgorithm", "nea0"}, {"integrityProtAlgorithm", "NIA0"}}) +
             line(4, "SecurityModeComplete"));
  const auto ue = store.get_ue_description("ue-1");
  EXPECT_EQ(ue.rrc_state, "RRC_CONNECTED");
  EXPECT_TRUE(ue.security_context.activated);
  EXPECT_EQ(ue.security_context.ciphering_alg, "nea0");
  EXPECT_EQ(ue.security_context.integrity_alg, "nia0");
  EXPECT_EQ(ue.last_seen_ts, 4);
}

TEST(UeState, CommandWithoutCompleteDoesNotActivate) {
  TelemetryStore store;
  ingest(store, "t", line(1, "SecurityModeCommand", "ue-1", "DL", {{"cipherAlgorithm", "nea2"}}));
  EXPECT_FALSE(store.get_ue_description("ue-1").security_context.activated);
  EXPECT_EQ(code_of([&] { store.get_ue_description("ue-9"); }), ErrorCode::UnknownUeId);
}

TEST(UeState, ReleaseKeepsSecurityContext) {
  TelemetryStore store;
  ingest(store, "t",
         line(1, "SecurityModeCommand", "ue-1", "DL", {{"cipherAlgorithm", "nea2"}, {"integrityProtAlgorithm", "nia2"}}) +
             line(2, "SecurityModeComplete") + line(3, "RRCRelease", "ue-1", "DL", {{"suspendConfig", "1"}}));
  const auto ue = store.get_ue_description("ue-1");
  EXPECT_EQ(ue.rrc_state, "RRC_INACTIVE");
  EXPECT_EQ(ue.security_context.ciphering_alg, "nea2");
}

TEST(UeState, AlgorithmNormalization) {
  EXPECT_EQ(normalize_ciphering_alg("NEA2"), "nea2");
  EXPECT_EQ(normalize_ciphering_alg("nea9"), "unknown");
  EXPECT_EQ(normalize_integrity_alg("nia3"), "nia3");
  EXPECT_EQ(normalize_integrity_alg(""), "unknown");
}

TEST(Events, AddAndQuery) {
  auto clock = std::make_shared<ManualClock>(100, 10);
  TelemetryStore store(clock);
  EventInput in;
  in.description = "storm";
  const auto e1 = store.add_event(in);
  const auto e2 = store.add_event(in);
  EXPECT_NE(e1.event_id, e2.event_id);
  EXPECT_LT(e1.received_at, e2.received_at);
  EXPECT_EQ(store.get_network_events(0).size(), 2u);
  EXPECT_EQ(store.get_network_events(e2.received_at).size(), 1u);
  in.description = "";
  EXPECT_EQ(code_of([&] { store.add_event(in); }), ErrorCode::SchemaViolation);
}

TEST(Events, InputParsing) {
  const auto in = parse_event_input(
      Json{{"source", "xapp"}, {"description", "d"}, {"severity_hint", "high"}, {"affected_ue_ids", {"u1"}}});
  EXPECT_EQ(in.source, EventSource::xapp);
  EXPECT_EQ(in.severity_hint, Severity::high);
  EXPECT_EQ(code_of([] { parse_event_input(Json{{"description", "d"}, {"source", "radio"}}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_event_input(Json{{"description", "d"}, {"severity_hint", "extreme"}}); }),
            ErrorCode::SchemaViolation);
}

TEST(Store, SnapshotRestoreIsEquivalent) {
  TelemetryStore a;
  a.ingest_trace_file("null-cipher", testsupport::data_dir() / "traces" / "null-cipher.jsonl");
  EventInput in;
  in.description = "x";
  a.add_event(in);
  TelemetryStore b;
  b.restore(a.to_json());
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(b.get_ue_description("ue-001").security_context.ciphering_alg, "nea0");
}

TEST(Store, FixtureTracesIngestCleanly) {
  TelemetryStore store;
  for (const auto& entry : std::filesystem::directory_iterator(testsupport::data_dir() / "traces")) {
    const auto s = store.ingest_trace_file(entry.path().stem().string(), entry.path());
    EXPECT_EQ(s.rejected_count, 0u) << entry.path();
    EXPECT_GT(s.count, 0u);
  }
}
