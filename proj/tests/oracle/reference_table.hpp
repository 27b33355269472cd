#pragma once

// The evaluation table's per-row outcome rates over five runs, encoded as
// synthetic run records.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oransec/evalkit.hpp"

namespace oracle {

struct TableRow {
  const char* scenario_id;
  double top3, top1, ccr;
};

inline const std::vector<TableRow>& reference_rows() {
  static const std::vector<TableRow> rows{
      {"BTS-Attack-1", 1.0, 0.6, 0.8},  {"BTS-Attack-2", 1.0, 1.0, 0.4},          {"BTS-Attack-3", 1.0, 0.6, 0.8},
      {"Blind-DoS-1", 1.0, 1.0, 1.0},   {"Blind-DoS-2", 1.0, 1.0, 1.0},           {"Blind-DoS-3", 1.0, 1.0, 0.6},
      {"Downlink-DoS", 1.0, 0.4, 0.4},  {"Downlink-IMSI", 0.8, 0.0, 0.0},         {"Null-Cipher-Integrity", 0.8, 1.0, 1.0},
      {"Uplink-IMSI", 0.8, 0.4, 0.4},
  };
  return rows;
}

constexpr double kTableMeanTop3 = 0.94, kTableMeanTop1 = 0.72, kTableMeanCcr = 0.64;
constexpr int kTableRuns = 5;

struct Encoded {
  std::vector<oransec::evalkit::Scenario> scenarios;
  std::vector<oransec::evalkit::RunRecord> records;
};

// A Top-1 hit implies a Top-3 hit, so a row whose Top-1 exceeds its Top-3
// cannot be encoded as printed; Top-1 is capped at Top-3.
inline Encoded encode_reference_table() {
  Encoded e;
  const std::set<std::string> tools{"get_traffic", "search_fight"};
  for (const auto& row : reference_rows()) {
    oransec::evalkit::Scenario s;
    s.scenario_id = row.scenario_id;
    s.ground_truth_technique_ids = {"FGT0001"};
    s.expected_tool_set = tools;
    e.scenarios.push_back(s);
    const int hits3 = static_cast<int>(std::lround(row.top3 * kTableRuns));
    const int hits1 = std::min(hits3, static_cast<int>(std::lround(row.top1 * kTableRuns)));
    const int ccr = static_cast<int>(std::lround(row.ccr * kTableRuns));
    for (int i = 0; i < kTableRuns; ++i) {
      oransec::evalkit::RunRecord r;
      r.scenario_id = row.scenario_id;
      r.run_index = i + 1;
      if (i < hits1) {
        r.retrieved_top3 = {"FGT0001", "FGT0002", "FGT0003"};
      } else if (i < hits3) {
        r.retrieved_top3 = {"FGT0002", "FGT0003", "FGT0001"};
      } else {
        r.retrieved_top3 = {"FGT0002", "FGT0003", "FGT0004"};
      }
      if (i < ccr) r.tool_calls_made.assign(tools.begin(), tools.end());
      r.terminal_phase = "mitigated";
      e.records.push_back(r);
    }
  }
  return e;
}

}  // namespace oracle
