#pragma once

// Session log and summary serialization.
//
// CSV columns: index,presented,responded,correct,response_time_s,
// t_command_ms,t_settle_ms,t_response_ms. `responded` is "none" for a
// timed-out trial. A partial log ends with the line "# incomplete".
//
// The structured form is one JSON document (docs/session_log.schema.json):
// {"complete":bool,"records":[...],"stats":{...}}.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "edgesim/experiment.hpp"

namespace edgesim::experiment {

inline constexpr const char* kLogCsvHeader =
    "index,presented,responded,correct,response_time_s,t_command_ms,t_settle_ms,t_response_ms";

nlohmann::ordered_json to_json(const TrialRecord& record);
nlohmann::ordered_json to_json(const SessionStats& stats);
nlohmann::ordered_json to_json(const SessionLog& log, const SessionStats& stats);

/// Throws FormatError (from frame_io.hpp) naming the offending field.
TrialRecord record_from_json(const nlohmann::json& j);

void write_log_csv(std::ostream& out, const SessionLog& log);
void write_log_csv(const std::filesystem::path& path, const SessionLog& log);

/// Throws FormatError naming the line for malformed or truncated rows.
SessionLog read_log_csv(std::istream& in, const std::string& source = "<stream>");
SessionLog read_log_csv(const std::filesystem::path& path);

void write_log_structured(const std::filesystem::path& path, const SessionLog& log, const SessionStats& stats);
SessionLog read_log_structured(const std::filesystem::path& path);

/// Reads either format, chosen by extension (.json -> structured).
SessionLog read_log(const std::filesystem::path& path);

/// Per-condition accuracy / RT table, one row per condition plus overall.
void print_stats_table(std::ostream& out, const SessionStats& stats);

}  // namespace edgesim::experiment
