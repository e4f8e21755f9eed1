#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace rdd {

// One checked cell of the replication ledger.
struct CheckResult {
  std::string id;
  std::string group; // table1, bandwidth, table2a, table2b, falsification
  std::string description;
  double expected = 0.0;
  double actual = 0.0;
  double tol = 0.0;
  std::string mode;   // abs | rel | exact | flag_false
  std::string source; // provenance of the expected value
  bool pass = false;
};

struct ReplicationInput {
  std::string data_path;     // headstart file, or a directory containing it
  std::string expected_path; // expected-value ledger (JSON)
  std::string out_dir;       // tables, plot data and the ledger land here
  bool write_outputs = true;
};

struct ReplicationOutcome {
  std::vector<CheckResult> checks;
  bool all_pass = false;
  double table1_seconds = 0.0; // wall time of the fixed-bandwidth stage
  std::string ledger_text;
  nlohmann::json ledger_json;
};

/// Reproduces the study tables, figures and falsification estimate from the
/// raw data and scores every cell against the expected-value ledger.
ReplicationOutcome run_replication(const ReplicationInput& input);

} // namespace rdd
