#include "edgesim/cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgesim/analytics.hpp"
#include "edgesim/client.hpp"
#include "edgesim/config.hpp"
#include "edgesim/event_bridge.hpp"
#include "edgesim/experiment.hpp"
#include "edgesim/frame_io.hpp"
#include "edgesim/server.hpp"
#include "edgesim/session_io.hpp"

namespace edgesim::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Bad flag values detected after parsing; reported like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::atomic<Server*> g_running_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_running_server.load()) s->stop();
}

SimConfig load_sim_config(const std::optional<std::string>& path) {
  if (!path) return SimConfig{};
  return load_config(*path);
}

Endpoint require_endpoint(const std::string& text, const char* flag) {
  auto ep = parse_endpoint(text);
  if (!ep) throw UsageError(std::string(flag) + ": expected host:port, got '" + text + "'");
  return *ep;
}

struct Common {
  std::optional<std::string> config;
  std::string format = "table";
  int verbosity = 0;

  bool structured() const { return format == "structured"; }
};

// --- serve -------------------------------------------------------------------

struct ServeArgs {
  std::optional<std::string> listen;
  double time_scale = 1.0;
  std::optional<std::string> ui_bridge;
};

int cmd_serve(const Common& common, const ServeArgs& args, std::ostream& out, std::ostream& err) {
  const auto listen = require_endpoint(resolve_address(args.listen), "--listen");
  if (!(args.time_scale > 0)) throw UsageError("--time-scale must be positive");
  std::optional<Endpoint> bridge_ep;
  if (args.ui_bridge) bridge_ep = require_endpoint(*args.ui_bridge, "--ui-bridge");

  DeviceSim device(load_sim_config(common.config));
  std::unique_ptr<EventBridge> bridge;
  if (bridge_ep) bridge = std::make_unique<EventBridge>(*bridge_ep);

  ServerOptions opts;
  opts.listen = listen;
  opts.time_scale = args.time_scale;
  if (bridge) {
    opts.observer = [b = bridge.get()](const protocol::Message& m) {
      if (std::holds_alternative<protocol::Frame>(m) || std::holds_alternative<protocol::State>(m)) {
        b->publish(protocol::encode(m));
      }
    };
  }
  std::unique_ptr<Server> server;
  try {
    server = std::make_unique<Server>(std::move(device), std::move(opts));
  } catch (const BindError& e) {
    err << "edgesim serve: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  const Endpoint bound{listen.host, server->port()};
  if (common.structured()) {
    ojson j{{"listening", bound.str()}};
    if (bridge) j["ui_bridge"] = Endpoint{bridge_ep->host, bridge->port()}.str();
    out << j.dump() << std::endl;
  } else {
    out << "listening on " << bound.str() << std::endl;
    if (bridge) out << "ui bridge on " << Endpoint{bridge_ep->host, bridge->port()}.str() << std::endl;
  }

  g_running_server = server.get();
  auto old_int = std::signal(SIGINT, on_signal);
  auto old_term = std::signal(SIGTERM, on_signal);
  server->run();
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  g_running_server = nullptr;
  if (bridge) bridge->stop();
  if (common.verbosity > 0) err << "edgesim serve: shut down\n";
  return kOk;
}

// --- session -----------------------------------------------------------------

struct SessionArgs {
  std::optional<std::string> connect;
  bool simulate = false;
  bool live = false;
  std::string ui_bridge = "127.0.0.1:9902";
  std::string responder = "perfect";
  std::uint64_t seed = 0;
  int repetitions = 5;
  double isi_s = 3.0;
  double latency_s = 1.0;
  double responder_timeout_s = 30.0;
  int sessions = 1;
  std::optional<std::string> log_path;
  std::optional<std::string> summary_path;
};

void write_outputs(const SessionArgs& args, const experiment::SessionLog& log) {
  if (args.log_path) experiment::write_log_csv(fs::path(*args.log_path), log);
  if (args.summary_path && !log.records.empty()) {
    experiment::write_log_structured(*args.summary_path, log, experiment::compute_stats(log.records));
  }
}

void report(const Common& common, const experiment::SessionLog& log, int sessions, std::ostream& out) {
  if (log.records.empty()) {
    out << (common.structured() ? R"({"records":0})" : "no trials recorded") << '\n';
    return;
  }
  const auto stats = experiment::compute_stats(log.records);
  if (common.structured()) {
    ojson j = experiment::to_json(log, stats);
    j.erase("records");
    j["sessions"] = sessions;
    j["trials"] = log.records.size();
    out << j.dump() << '\n';
  } else {
    if (sessions > 1) out << sessions << " sessions, " << log.records.size() << " trials\n";
    experiment::print_stats_table(out, stats);
  }
}

int cmd_session(const Common& common, const SessionArgs& args, std::ostream& out, std::ostream& err) {
  using namespace experiment;
  if (args.live && args.simulate) throw UsageError("--live needs a device server; it cannot be combined with --simulate");
  if (args.sessions < 1) throw UsageError("--sessions must be at least 1");
  if (args.sessions > 1 && !args.simulate) throw UsageError("--sessions > 1 is only available with --simulate");
  std::vector<ConfusionRule> rules;
  try {
    rules = parse_responder_spec(args.responder);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--responder: ") + e.what());
  }

  SessionPlan plan;
  plan.repetitions = args.repetitions;
  plan.isi_s = args.isi_s;
  plan.rng_seed = args.seed;
  plan.responder_timeout_s = args.responder_timeout_s;
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  if (args.simulate) {
    const auto cfg = load_sim_config(common.config);
    SessionLog all;
    all.complete = true;
    for (int k = 0; k < args.sessions; ++k) {
      SimulatedLink link{DeviceSim(cfg)};
      prepare_device(link);
      SessionPlan p = plan;
      p.rng_seed = args.seed + static_cast<std::uint64_t>(k);
      ScriptedResponder responder(rules, p.rng_seed ^ 0x9e3779b97f4a7c15ULL, args.latency_s);
      auto log = run_session(p, link, responder);
      all.complete = all.complete && log.complete;
      all.records.insert(all.records.end(), log.records.begin(), log.records.end());
    }
    write_outputs(args, all);
    report(common, all, args.sessions, out);
    return kOk;
  }

  const auto endpoint = require_endpoint(resolve_address(args.connect), "--connect");
  std::optional<Endpoint> bridge_ep;
  if (args.live) bridge_ep = require_endpoint(args.ui_bridge, "--ui-bridge");

  SessionLog log;
  try {
    auto client = Client::connect(endpoint);
    ProtocolLink link(client);
    prepare_device(link);

    ResponseGate gate;
    std::unique_ptr<EventBridge> bridge;
    std::unique_ptr<Responder> responder;
    EventSink sink;
    if (args.live) {
      bridge = std::make_unique<EventBridge>(*bridge_ep, &gate);
      responder = std::make_unique<LiveResponder>(gate);
      sink = [b = bridge.get()](const Event& e) { b->publish(encode_event(e)); };
      out << "live session: ui bridge on " << Endpoint{bridge_ep->host, bridge->port()}.str() << std::endl;
    } else {
      responder = std::make_unique<ScriptedResponder>(rules, args.seed ^ 0x9e3779b97f4a7c15ULL, args.latency_s);
    }
    if (common.verbosity > 0) {
      auto inner = sink;
      sink = [inner, &err](const Event& e) {
        err << encode_event(e);
        if (inner) inner(e);
      };
    }
    log = run_session(plan, link, *responder, sink);
  } catch (const SessionError& e) {
    write_outputs(args, e.partial());
    err << "edgesim session: " << e.what() << " (" << e.partial().records.size() << " trials kept)\n";
    return kRuntimeFailure;
  } catch (const TransportError& e) {
    err << "edgesim session: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  write_outputs(args, log);
  report(common, log, 1, out);
  return kOk;
}

// --- analyze -------------------------------------------------------------------

struct AnalyzeArgs {
  std::optional<std::string> log_path;
  std::optional<std::string> frames_dir;
  std::optional<std::string> heatmap_dir;
};

std::map<Condition, std::vector<FsrFrame>> load_corpus(const fs::path& dir) {
  std::map<Condition, std::vector<FsrFrame>> corpus;
  for (auto c : {Condition::EL, Condition::EH, Condition::SL, Condition::SH, Condition::NC}) {
    const auto path = dir / (std::string(to_string(c)) + ".csv");
    if (fs::exists(path)) corpus[c] = read_frames_csv(path);
  }
  return corpus;
}

int cmd_analyze(const Common& common, const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  if (!args.log_path && !args.frames_dir) throw UsageError("analyze needs --log and/or --frames-dir");
  ojson report;
  if (args.log_path) {
    const auto log = experiment::read_log(*args.log_path);
    if (log.records.empty()) {
      err << "edgesim analyze: " << *args.log_path << ": no trial records\n";
      return kRuntimeFailure;
    }
    const auto stats = experiment::compute_stats(log.records);
    if (common.structured()) {
      report["log"] = experiment::to_json(stats);
      report["log"]["complete"] = log.complete;
    } else {
      out << "session log " << *args.log_path << (log.complete ? "" : " (incomplete)") << '\n';
      experiment::print_stats_table(out, stats);
    }
  }
  if (args.frames_dir) {
    auto corpus = load_corpus(*args.frames_dir);
    for (auto c : kStimulusConditions) {
      if (corpus[c].size() < 2 * analytics::kMinCalibrationFrames) {
        err << "edgesim analyze: " << *args.frames_dir << ": need at least 6 frames in " << to_string(c) << ".csv\n";
        return kRuntimeFailure;
      }
    }
    // Even-indexed frames calibrate, odd-indexed frames are held out.
    auto half = [&](Condition c, int parity) {
      std::vector<FsrFrame> out;
      const auto& v = corpus[c];
      for (std::size_t i = static_cast<std::size_t>(parity); i < v.size(); i += 2) out.push_back(v[i]);
      return out;
    };
    const auto thresholds = analytics::calibrate_thresholds(half(Condition::SL, 0), half(Condition::SH, 0),
                                                            half(Condition::EL, 0), half(Condition::EH, 0));
    std::vector<analytics::LabelledFrame> held_out;
    for (const auto& [c, frames] : corpus) {
      for (const auto& f : half(c, 1)) held_out.push_back({c, f});
    }
    const auto rep = analytics::evaluate(held_out, thresholds);
    if (common.structured()) {
      report["classifier"] = {{"held_out_frames", rep.frames},
                              {"geometry_accuracy", rep.geometry_accuracy()},
                              {"four_way_accuracy", rep.label_accuracy()},
                              {"thresholds",
                               {{"contact_total_min", thresholds.contact_total_min},
                                {"band_ratio_edge_min", thresholds.band_ratio_edge_min},
                                {"surface_split", thresholds.surface_split},
                                {"edge_split", thresholds.edge_split}}}};
    } else {
      out << "classifier on " << rep.frames << " held-out frames\n";
      out << "  geometry accuracy: " << rep.geometry_accuracy() * 100.0 << "%\n";
      out << "  4-way accuracy:    " << rep.label_accuracy() * 100.0 << "%\n";
      out << "  true\\pred   EL   EH   SL   SH   NC\n";
      for (int r = 0; r < 5; ++r) {
        out << "  " << to_string(static_cast<Condition>(r)) << "        ";
        for (int c = 0; c < 5; ++c) {
          out << ' ' << std::setw(4) << rep.confusion[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        out << '\n';
      }
    }
    if (args.heatmap_dir) {
      fs::create_directories(*args.heatmap_dir);
      for (const auto& [c, frames] : corpus) {
        if (frames.empty()) continue;
        const auto mean = mean_frame(frames);
        const auto base = fs::path(*args.heatmap_dir) / std::string(to_string(c));
        write_heatmap_csv(base.string() + "_heatmap.csv", mean);
        write_heatmap_pgm(base.string() + "_heatmap.pgm", mean);
      }
      if (!common.structured()) out << "heatmaps written to " << *args.heatmap_dir << '\n';
    }
  }
  if (common.structured()) out << report.dump() << '\n';
  return kOk;
}

// --- frames ----------------------------------------------------------------------

struct FramesArgs {
  std::string out_dir = "frames";
  int count = 100;
  std::optional<std::uint64_t> seed;
};

int cmd_frames(const Common& common, const FramesArgs& args, std::ostream& out, std::ostream&) {
  if (args.count < 1) throw UsageError("--count must be at least 1");
  auto cfg = load_sim_config(common.config);
  if (args.seed) cfg.contact.rng_seed = *args.seed;
  fs::create_directories(args.out_dir);
  ojson written = ojson::object();
  for (auto c : {Condition::EL, Condition::EH, Condition::SL, Condition::SH, Condition::NC}) {
    DeviceSim dev(cfg);
    dev.calibrate_surface();
    dev.calibrate_edge();
    dev.apply(PresetCommand{c});
    dev.advance(dev.time_to_settle() + SimDuration(1000));
    dev.apply(StreamCommand{true, cfg.device.stream_rate_hz});
    std::vector<FsrFrame> frames;
    while (static_cast<int>(frames.size()) < args.count) {
      auto batch = dev.advance(SimDuration(100000));
      frames.insert(frames.end(), batch.begin(), batch.end());
    }
    frames.resize(static_cast<std::size_t>(args.count));
    const auto path = fs::path(args.out_dir) / (std::string(to_string(c)) + ".csv");
    write_frames_csv(path, frames);
    written[std::string(to_string(c))] = path.string();
  }
  if (common.structured()) {
    out << ojson{{"frames_per_condition", args.count}, {"files", written}}.dump() << '\n';
  } else {
    out << "wrote " << args.count << " settled frames per condition to " << args.out_dir << '\n';
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-motor fingertip haptic device simulator and experiment toolkit", "edgesim"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Configuration file (key = value)");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"table", "structured"}));
    sub->add_flag("-v,--verbose", common.verbosity, "More diagnostics on stderr");
  };

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the device simulator endpoint");
  add_common(serve_cmd);
  serve_cmd->add_option("--listen", serve.listen, "host:port (default $EDGESIM_ADDR or 127.0.0.1:9901)");
  serve_cmd->add_option("--time-scale", serve.time_scale, "Simulated seconds per wall second");
  serve_cmd->add_option("--ui-bridge", serve.ui_bridge, "host:port for the browser event bridge");

  SessionArgs session;
  auto* session_cmd = app.add_subcommand("session", "Run a psychophysics session");
  add_common(session_cmd);
  session_cmd->add_option("--connect", session.connect, "Device server host:port");
  session_cmd->add_flag("--simulate", session.simulate, "Use an in-process simulated device");
  session_cmd->add_flag("--live", session.live, "Collect responses from the browser UI");
  session_cmd->add_option("--ui-bridge", session.ui_bridge, "host:port for the live event bridge");
  session_cmd->add_option("--responder", session.responder, "perfect | confusion:FROM->TO:P[,...]");
  session_cmd->add_option("--seed", session.seed, "Schedule and responder seed");
  session_cmd->add_option("--repetitions", session.repetitions, "Repetitions per condition");
  session_cmd->add_option("--isi", session.isi_s, "Inter-stimulus interval in seconds");
  session_cmd->add_option("--latency", session.latency_s, "Scripted responder decision latency in seconds");
  session_cmd->add_option("--response-timeout", session.responder_timeout_s, "Seconds before a trial is marked no-response");
  session_cmd->add_option("--sessions", session.sessions, "Number of sessions (with --simulate)");
  session_cmd->add_option("--log", session.log_path, "Trial log CSV output");
  session_cmd->add_option("--summary", session.summary_path, "Structured session summary output");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Recompute statistics and classify frame corpora");
  add_common(analyze_cmd);
  analyze_cmd->add_option("--log", analyze.log_path, "Session log (.csv or .json)");
  analyze_cmd->add_option("--frames-dir", analyze.frames_dir, "Directory with EL.csv, EH.csv, SL.csv, SH.csv[, NC.csv]");
  analyze_cmd->add_option("--heatmap-dir", analyze.heatmap_dir, "Write mean heatmaps (CSV + PGM) per condition");

  FramesArgs frames;
  auto* frames_cmd = app.add_subcommand("frames", "Generate settled frame corpora from the simulator");
  add_common(frames_cmd);
  frames_cmd->add_option("--out-dir", frames.out_dir, "Output directory");
  frames_cmd->add_option("--count", frames.count, "Frames per condition");
  frames_cmd->add_option("--seed", frames.seed, "Noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "edgesim: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == serve_cmd) return cmd_serve(common, serve, out, err);
    if (active == session_cmd) return cmd_session(common, session, out, err);
    if (active == analyze_cmd) return cmd_analyze(common, analyze, out, err);
    return cmd_frames(common, frames, out, err);
  } catch (const UsageError& e) {
    err << "edgesim " << active->get_name() << ": " << e.what() << "\n\n" << active->help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "edgesim " << active->get_name() << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace edgesim::cli
