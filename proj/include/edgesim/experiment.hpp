#pragma once

// Psychophysics session engine: seeded trial schedule, stimulus presentation
// through a DeviceLink, response capture, and descriptive statistics.
//
// A trial is: TrialStart -> preset command -> settle -> AwaitResponse ->
// response (or timeout) -> TrialEnd -> NC preset -> settle -> ISI.
// Response time is clocked from the preset command.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include "edgesim/condition.hpp"
#include "edgesim/device_sim.hpp"

namespace edgesim {
class Client;
}

namespace edgesim::experiment {

struct SessionPlan {
  int repetitions = 5;
  std::vector<Condition> conditions{kStimulusConditions.begin(), kStimulusConditions.end()};
  double isi_s = 3.0;
  std::uint64_t rng_seed = 0;
  double responder_timeout_s = 30.0;
  double settle_timeout_s = 30.0;

  /// Throws std::invalid_argument for repetitions < 1 or empty/duplicate conditions.
  void validate() const;
};

/// Uniform integer in [0, bound) by rejection on the raw 64-bit output, so
/// the sequence depends only on the mt19937_64 stream.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound);

/// Each condition `repetitions` times (repetition-major), then a
/// Fisher-Yates shuffle from the back using draw_below on
/// mt19937_64(rng_seed).
std::vector<Condition> make_schedule(const SessionPlan& plan);

struct TrialRecord {
  int index = 0;
  Condition presented = Condition::NC;
  std::optional<Condition> responded;  ///< empty: no response before timeout
  bool correct = false;
  double response_time_s = 0.0;
  double t_command_ms = 0.0;
  double t_settle_ms = 0.0;
  double t_response_ms = 0.0;

  /// Response time measured from settle instead of from the command.
  double settle_response_time_s() const { return (t_response_ms - t_settle_ms) / 1000.0; }

  bool operator==(const TrialRecord&) const = default;
};

struct ConditionStats {
  Condition condition = Condition::NC;
  std::size_t trials = 0;
  std::size_t correct = 0;
  std::size_t no_response = 0;
  double accuracy = 0.0;            ///< correct / trials; 0 when trials == 0
  std::optional<double> mean_rt_s;  ///< over trials with a response
};

struct SessionStats {
  std::vector<ConditionStats> per_condition;
  double overall_accuracy = 0.0;
  std::optional<double> overall_mean_rt_s;
  /// Labels for both matrix axes: the four stimulus conditions, then any
  /// other label seen in the log.
  std::vector<Condition> labels;
  /// rows = presented, columns = responded. No-response trials are counted
  /// in ConditionStats::no_response instead.
  std::vector<std::vector<std::size_t>> confusion;

  const ConditionStats* find(Condition c) const;
};

/// Throws std::invalid_argument for an empty log.
SessionStats compute_stats(std::span<const TrialRecord> records);

struct SessionLog {
  std::vector<TrialRecord> records;
  bool complete = false;
};

/// A session that ended on a device or transport failure; the trials run
/// before the failure are kept.
class SessionError : public std::runtime_error {
 public:
  SessionError(const std::string& what, SessionLog partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SessionLog& partial() const { return partial_; }

 private:
  SessionLog partial_;
};

// ---------------------------------------------------------------------------
// Device access and time

struct LinkStatus {
  double surface_mm = 0.0;
  double edge_mm = 0.0;
  bool moving = false;
  bool calibrated_surface = false;
  bool calibrated_edge = false;
};

/// Device plus the session clock. Simulated links run on device time;
/// network links on the wall clock.
class DeviceLink {
 public:
  virtual ~DeviceLink() = default;
  virtual void calibrate(Axis axis) = 0;
  virtual void preset(Condition condition) = 0;
  virtual LinkStatus status() = 0;
  /// Milliseconds on the session clock.
  virtual double now_ms() = 0;
  virtual void wait_ms(double ms) = 0;
  /// Returns once no axis is moving; throws std::runtime_error on timeout.
  virtual void wait_settled(double timeout_ms) = 0;
};

/// In-process device running on simulated time; waits cost no wall time.
class SimulatedLink final : public DeviceLink {
 public:
  explicit SimulatedLink(DeviceSim device = DeviceSim{}) : device_(std::move(device)) {}

  void calibrate(Axis axis) override;
  void preset(Condition condition) override;
  LinkStatus status() override;
  double now_ms() override;
  void wait_ms(double ms) override;
  void wait_settled(double timeout_ms) override;

  const DeviceSim& device() const { return device_; }

 private:
  DeviceSim device_;
};

/// Remote device over the line protocol; the session clock is wall time.
class ProtocolLink final : public DeviceLink {
 public:
  explicit ProtocolLink(Client& client);

  void calibrate(Axis axis) override;
  void preset(Condition condition) override;
  LinkStatus status() override;
  double now_ms() override;
  void wait_ms(double ms) override;
  void wait_settled(double timeout_ms) override;

 private:
  Client& client_;
  std::chrono::steady_clock::time_point origin_;
};

/// Calibrates both axes and parks the device at NC.
void prepare_device(DeviceLink& link, double settle_timeout_ms = 30000.0);

// ---------------------------------------------------------------------------
// Responders

struct Prompt {
  int index = 0;
  Condition presented = Condition::NC;
  double t_command_ms = 0.0;
};

struct Response {
  std::optional<Condition> choice;
  double t_ms = 0.0;  ///< session clock at receipt
};

class Responder {
 public:
  virtual ~Responder() = default;
  /// Called just before AwaitResponse is announced, so answers sent in
  /// reaction to that event are already admissible.
  virtual void arm(const Prompt&) {}
  virtual Response await_response(const Prompt& prompt, DeviceLink& clock, double timeout_ms) = 0;
};

/// "from -> to with probability p".
struct ConfusionRule {
  Condition from;
  Condition to;
  double probability;
};

/// Answers after a fixed decision latency; confuses according to rules.
class ScriptedResponder final : public Responder {
 public:
  explicit ScriptedResponder(std::vector<ConfusionRule> rules = {}, std::uint64_t seed = 0,
                             double latency_s = 1.0);

  Response await_response(const Prompt& prompt, DeviceLink& clock, double timeout_ms) override;

 private:
  std::vector<ConfusionRule> rules_;
  std::mt19937_64 rng_;
  double latency_s_;
};

/// Parses "perfect" or "confusion:SH->SL:0.16[,EL->EH:0.05...]".
/// Throws std::invalid_argument on malformed specs or probabilities whose
/// sum for one source condition exceeds 1.
std::vector<ConfusionRule> parse_responder_spec(std::string_view spec);

/// Admits at most one response per trial, and only while that trial is
/// awaiting a response. Thread-safe; fed by the UI bridge.
class ResponseGate {
 public:
  enum class Outcome { Accepted, OutOfPhase, Duplicate };

  /// Opens the gate for `index`; reopening the already-open trial keeps
  /// any response it has received.
  void open(int index);
  void close();
  Outcome submit(int index, Condition choice);
  /// Waits for the response to trial `index`, or nullopt at the deadline
  /// or when the gate is closed.
  std::optional<Condition> wait(int index, std::chrono::steady_clock::time_point deadline);

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::optional<int> open_index_;
  std::optional<int> answered_index_;
  std::optional<Condition> choice_;
};

std::string_view to_string(ResponseGate::Outcome outcome);

/// Responses from a human through a ResponseGate.
class LiveResponder final : public Responder {
 public:
  explicit LiveResponder(ResponseGate& gate) : gate_(gate) {}
  void arm(const Prompt& prompt) override { gate_.open(prompt.index); }
  Response await_response(const Prompt& prompt, DeviceLink& clock, double timeout_ms) override;

 private:
  ResponseGate& gate_;
};

// ---------------------------------------------------------------------------
// Session events

struct TrialStart {
  int index = 0;
  int total = 0;
};
struct AwaitResponse {
  int index = 0;
  double t0_ms = 0.0;
};
struct TrialEnd {
  TrialRecord record;
};
struct SessionEnd {
  SessionStats stats;
  bool complete = true;
};

using Event = std::variant<TrialStart, AwaitResponse, TrialEnd, SessionEnd>;
using EventSink = std::function<void(const Event&)>;

/// One JSON line (with trailing newline), same conventions as the wire
/// protocol: {"type":"trial_start",...}.
std::string encode_event(const Event& event);

/// Runs every scheduled trial. A stop request ends the session after the
/// current step and returns an incomplete log. Device or transport
/// failures throw SessionError carrying the partial log.
SessionLog run_session(const SessionPlan& plan, DeviceLink& link, Responder& responder,
                       const EventSink& sink = {}, std::stop_token stop = {});

}  // namespace edgesim::experiment
