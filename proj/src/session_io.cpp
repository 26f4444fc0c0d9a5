#include "edgesim/session_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "edgesim/frame_io.hpp"

namespace edgesim::experiment {

using ojson = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string label(const std::optional<Condition>& c) { return c ? std::string(to_string(*c)) : "none"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(where + ": expected a number, got '" + s + "'");
  }
  return v;
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

ojson to_json(const TrialRecord& r) {
  ojson j;
  j["index"] = r.index;
  j["presented"] = std::string(to_string(r.presented));
  j["responded"] = label(r.responded);
  j["correct"] = r.correct;
  j["response_time_s"] = r.response_time_s;
  j["t_command_ms"] = r.t_command_ms;
  j["t_settle_ms"] = r.t_settle_ms;
  j["t_response_ms"] = r.t_response_ms;
  return j;
}

ojson to_json(const SessionStats& stats) {
  ojson j;
  ojson per = ojson::array();
  for (const auto& cs : stats.per_condition) {
    ojson c;
    c["condition"] = std::string(to_string(cs.condition));
    c["trials"] = cs.trials;
    c["correct"] = cs.correct;
    c["no_response"] = cs.no_response;
    c["accuracy"] = cs.accuracy;
    c["mean_rt_s"] = optional_number(cs.mean_rt_s);
    per.push_back(std::move(c));
  }
  j["per_condition"] = std::move(per);
  j["overall_accuracy"] = stats.overall_accuracy;
  j["overall_mean_rt_s"] = optional_number(stats.overall_mean_rt_s);
  ojson labels = ojson::array();
  for (auto c : stats.labels) labels.push_back(std::string(to_string(c)));
  j["confusion"] = {{"labels", std::move(labels)}, {"matrix", stats.confusion}};
  return j;
}

ojson to_json(const SessionLog& log, const SessionStats& stats) {
  ojson j;
  j["complete"] = log.complete;
  ojson records = ojson::array();
  for (const auto& r : log.records) records.push_back(to_json(r));
  j["records"] = std::move(records);
  j["stats"] = to_json(stats);
  return j;
}

TrialRecord record_from_json(const nlohmann::json& j) {
  auto need = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("record is missing '") + key + "'");
    return *it;
  };
  auto number = [&](const char* key) {
    const auto& v = need(key);
    if (!v.is_number()) throw FormatError(std::string("record field '") + key + "' must be a number");
    return v.get<double>();
  };
  auto cond = [&](const char* key, bool allow_none) -> std::optional<Condition> {
    const auto& v = need(key);
    if (!v.is_string()) throw FormatError(std::string("record field '") + key + "' must be a string");
    const auto s = v.get<std::string>();
    if (allow_none && s == "none") return std::nullopt;
    auto c = parse_condition(s);
    if (!c) throw FormatError(std::string("record field '") + key + "' has unknown condition '" + s + "'");
    return c;
  };
  TrialRecord r;
  const auto& idx = need("index");
  if (!idx.is_number_integer()) throw FormatError("record field 'index' must be an integer");
  r.index = idx.get<int>();
  r.presented = *cond("presented", false);
  r.responded = cond("responded", true);
  const auto& correct = need("correct");
  if (!correct.is_boolean()) throw FormatError("record field 'correct' must be a boolean");
  r.correct = correct.get<bool>();
  r.response_time_s = number("response_time_s");
  r.t_command_ms = number("t_command_ms");
  r.t_settle_ms = number("t_settle_ms");
  r.t_response_ms = number("t_response_ms");
  return r;
}

void write_log_csv(std::ostream& out, const SessionLog& log) {
  out << kLogCsvHeader << '\n';
  for (const auto& r : log.records) {
    out << r.index << ',' << to_string(r.presented) << ',' << label(r.responded) << ','
        << (r.correct ? "true" : "false") << ',' << format_double(r.response_time_s) << ','
        << format_double(r.t_command_ms) << ',' << format_double(r.t_settle_ms) << ','
        << format_double(r.t_response_ms) << '\n';
  }
  if (!log.complete) out << "# incomplete\n";
}

void write_log_csv(const std::filesystem::path& path, const SessionLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write session log " + path.string());
  write_log_csv(out, log);
  out.flush();
  if (!out) throw std::runtime_error("write failed for session log " + path.string());
}

SessionLog read_log_csv(std::istream& in, const std::string& source) {
  SessionLog log;
  log.complete = true;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("incomplete") != std::string::npos) log.complete = false;
      continue;
    }
    if (!header_seen) {
      if (line != kLogCsvHeader) throw FormatError(where + ": expected header '" + std::string(kLogCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 8) {
      throw FormatError(where + ": expected 8 fields, got " + std::to_string(f.size()));
    }
    TrialRecord r;
    int index = 0;
    auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), index);
    if (ec != std::errc{} || ptr != f[0].data() + f[0].size()) throw FormatError(where + ": bad index '" + f[0] + "'");
    r.index = index;
    auto presented = parse_condition(f[1]);
    if (!presented) throw FormatError(where + ": unknown presented condition '" + f[1] + "'");
    r.presented = *presented;
    if (f[2] != "none") {
      auto responded = parse_condition(f[2]);
      if (!responded) throw FormatError(where + ": unknown responded condition '" + f[2] + "'");
      r.responded = responded;
    }
    if (f[3] != "true" && f[3] != "false") throw FormatError(where + ": 'correct' must be true or false");
    r.correct = f[3] == "true";
    r.response_time_s = parse_double(f[4], where);
    r.t_command_ms = parse_double(f[5], where);
    r.t_settle_ms = parse_double(f[6], where);
    r.t_response_ms = parse_double(f[7], where);
    if (r.correct != (r.responded == r.presented)) throw FormatError(where + ": 'correct' disagrees with the labels");
    log.records.push_back(r);
  }
  if (!header_seen) throw FormatError(source + ": empty session log");
  return log;
}

SessionLog read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open session log " + path.string());
  return read_log_csv(in, path.string());
}

void write_log_structured(const std::filesystem::path& path, const SessionLog& log, const SessionStats& stats) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write session summary " + path.string());
  out << to_json(log, stats).dump(2) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed for session summary " + path.string());
}

SessionLog read_log_structured(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open session summary " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError(path.string() + ": not a JSON object");
  SessionLog log;
  auto complete = j.find("complete");
  log.complete = complete != j.end() && complete->is_boolean() && complete->get<bool>();
  auto records = j.find("records");
  if (records == j.end() || !records->is_array()) throw FormatError(path.string() + ": missing 'records' array");
  for (std::size_t i = 0; i < records->size(); ++i) {
    try {
      log.records.push_back(record_from_json((*records)[i]));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
    }
  }
  return log;
}

SessionLog read_log(const std::filesystem::path& path) {
  return path.extension() == ".json" ? read_log_structured(path) : read_log_csv(path);
}

void print_stats_table(std::ostream& out, const SessionStats& stats) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::left << std::setw(10) << "condition" << std::right << std::setw(8) << "trials" << std::setw(10)
      << "accuracy" << std::setw(12) << "mean RT (s)" << '\n';
  out << std::fixed;
  auto rt = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << *v;
    return os.str();
  };
  std::size_t total = 0;
  for (const auto& cs : stats.per_condition) {
    if (cs.trials == 0) continue;
    total += cs.trials;
    out << std::left << std::setw(10) << to_string(cs.condition) << std::right << std::setw(8) << cs.trials
        << std::setw(9) << std::setprecision(0) << cs.accuracy * 100.0 << '%' << std::setw(12) << rt(cs.mean_rt_s)
        << '\n';
  }
  out << std::left << std::setw(10) << "overall" << std::right << std::setw(8) << total << std::setw(9)
      << std::setprecision(0) << stats.overall_accuracy * 100.0 << '%' << std::setw(12) << rt(stats.overall_mean_rt_s)
      << '\n';
  out.flags(flags);
  out.precision(precision);
}

}  // namespace edgesim::experiment
