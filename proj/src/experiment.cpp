#include "edgesim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "edgesim/client.hpp"
#include "edgesim/errors.hpp"
#include "edgesim/session_io.hpp"

namespace edgesim::experiment {

namespace {

using SteadyClock = std::chrono::steady_clock;

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void SessionPlan::validate() const {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
  if (conditions.empty()) throw std::invalid_argument("session needs at least one condition");
  std::set<Condition> seen(conditions.begin(), conditions.end());
  if (seen.size() != conditions.size()) throw std::invalid_argument("session conditions must be distinct");
  if (!(isi_s >= 0)) throw std::invalid_argument("inter-stimulus interval must be non-negative");
  if (!(responder_timeout_s > 0) || !(settle_timeout_s > 0)) throw std::invalid_argument("timeouts must be positive");
}

std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("draw_below needs a positive bound");
  // 2^64 mod bound: raw values below it would bias the modulo.
  const std::uint64_t reject_below = (0 - bound) % bound;
  std::uint64_t x = rng();
  while (x < reject_below) x = rng();
  return x % bound;
}

std::vector<Condition> make_schedule(const SessionPlan& plan) {
  plan.validate();
  std::vector<Condition> schedule;
  schedule.reserve(static_cast<std::size_t>(plan.repetitions) * plan.conditions.size());
  for (int rep = 0; rep < plan.repetitions; ++rep) {
    schedule.insert(schedule.end(), plan.conditions.begin(), plan.conditions.end());
  }
  std::mt19937_64 rng(plan.rng_seed);
  for (std::size_t i = schedule.size(); i-- > 1;) {
    std::swap(schedule[i], schedule[draw_below(rng, i + 1)]);
  }
  return schedule;
}

const ConditionStats* SessionStats::find(Condition c) const {
  for (const auto& s : per_condition) {
    if (s.condition == c) return &s;
  }
  return nullptr;
}

SessionStats compute_stats(std::span<const TrialRecord> records) {
  if (records.empty()) throw std::invalid_argument("cannot compute statistics of an empty log");
  SessionStats stats;
  stats.labels.assign(kStimulusConditions.begin(), kStimulusConditions.end());
  auto add_label = [&](Condition c) {
    if (std::find(stats.labels.begin(), stats.labels.end(), c) == stats.labels.end()) stats.labels.push_back(c);
  };
  for (const auto& r : records) {
    add_label(r.presented);
    if (r.responded) add_label(*r.responded);
  }
  auto index_of = [&](Condition c) {
    return static_cast<std::size_t>(std::find(stats.labels.begin(), stats.labels.end(), c) - stats.labels.begin());
  };

  const auto n = stats.labels.size();
  stats.confusion.assign(n, std::vector<std::size_t>(n, 0));
  stats.per_condition.resize(n);
  std::vector<double> rt_sum(n, 0.0);
  std::vector<std::size_t> rt_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) stats.per_condition[i].condition = stats.labels[i];

  std::size_t correct = 0;
  double rt_total = 0;
  std::size_t rt_n = 0;
  for (const auto& r : records) {
    const auto row = index_of(r.presented);
    auto& cs = stats.per_condition[row];
    ++cs.trials;
    if (r.correct) {
      ++cs.correct;
      ++correct;
    }
    if (!r.responded) {
      ++cs.no_response;
      continue;
    }
    ++stats.confusion[row][index_of(*r.responded)];
    rt_sum[row] += r.response_time_s;
    ++rt_count[row];
    rt_total += r.response_time_s;
    ++rt_n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& cs = stats.per_condition[i];
    cs.accuracy = cs.trials ? static_cast<double>(cs.correct) / static_cast<double>(cs.trials) : 0.0;
    if (rt_count[i]) cs.mean_rt_s = rt_sum[i] / static_cast<double>(rt_count[i]);
  }
  stats.overall_accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  if (rt_n) stats.overall_mean_rt_s = rt_total / static_cast<double>(rt_n);
  return stats;
}

// --- links -----------------------------------------------------------------

void SimulatedLink::calibrate(Axis axis) { device_.apply(CalibrateCommand{axis}); }

void SimulatedLink::preset(Condition condition) { device_.apply(PresetCommand{condition}); }

LinkStatus SimulatedLink::status() {
  const auto& s = device_.state();
  return {device_.surface_mm(), device_.edge_cable_mm(), s.moving(), s.surface.calibrated, s.edge.calibrated};
}

double SimulatedLink::now_ms() { return static_cast<double>(device_.state().clock_us) / 1000.0; }

void SimulatedLink::wait_ms(double ms) {
  if (ms > 0) device_.advance(SimDuration(static_cast<std::int64_t>(std::llround(ms * 1000.0))));
}

void SimulatedLink::wait_settled(double timeout_ms) {
  const auto need = device_.time_to_settle();
  const auto limit = SimDuration(static_cast<std::int64_t>(timeout_ms * 1000.0));
  if (need > limit) {
    device_.advance(limit);
    throw std::runtime_error("device did not settle within " + std::to_string(timeout_ms) + " ms");
  }
  device_.advance(need);
}

ProtocolLink::ProtocolLink(Client& client) : client_(client), origin_(SteadyClock::now()) {}

namespace {

protocol::State expect_state(const protocol::Message& reply) {
  if (const auto* e = std::get_if<protocol::Error>(&reply)) throw DeviceError(e->code, e->detail);
  if (const auto* s = std::get_if<protocol::State>(&reply)) return *s;
  throw TransportError("unexpected '" + std::string(protocol::type_name(reply)) + "' reply");
}

}  // namespace

void ProtocolLink::calibrate(Axis axis) { expect_state(client_.request(protocol::Calibrate{axis})); }

void ProtocolLink::preset(Condition condition) { expect_state(client_.request(protocol::Preset{condition})); }

LinkStatus ProtocolLink::status() {
  const auto s = expect_state(client_.request(protocol::Status{}));
  return {s.surface_mm, s.edge_mm, s.moving, s.calibrated_surface, s.calibrated_edge};
}

double ProtocolLink::now_ms() {
  return std::chrono::duration<double, std::milli>(SteadyClock::now() - origin_).count();
}

void ProtocolLink::wait_ms(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

void ProtocolLink::wait_settled(double timeout_ms) {
  const auto deadline = SteadyClock::now() + std::chrono::duration<double, std::milli>(timeout_ms);
  while (status().moving) {
    if (SteadyClock::now() > deadline) {
      throw std::runtime_error("device did not settle within " + std::to_string(timeout_ms) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

void prepare_device(DeviceLink& link, double settle_timeout_ms) {
  link.wait_settled(settle_timeout_ms);
  link.calibrate(Axis::Surface);
  link.calibrate(Axis::Edge);
  link.preset(Condition::NC);
  link.wait_settled(settle_timeout_ms);
}

// --- responders --------------------------------------------------------------

ScriptedResponder::ScriptedResponder(std::vector<ConfusionRule> rules, std::uint64_t seed, double latency_s)
    : rules_(std::move(rules)), rng_(seed), latency_s_(latency_s) {
  if (!(latency_s_ > 0)) throw std::invalid_argument("responder latency must be positive");
}

Response ScriptedResponder::await_response(const Prompt& prompt, DeviceLink& clock, double timeout_ms) {
  const double latency_ms = latency_s_ * 1000.0;
  if (latency_ms > timeout_ms) {
    clock.wait_ms(timeout_ms);
    return {std::nullopt, clock.now_ms()};
  }
  Condition choice = prompt.presented;
  const double u = unit_draw(rng_);
  double cumulative = 0;
  for (const auto& rule : rules_) {
    if (rule.from != prompt.presented) continue;
    cumulative += rule.probability;
    if (u < cumulative) {
      choice = rule.to;
      break;
    }
  }
  clock.wait_ms(latency_ms);
  return {choice, clock.now_ms()};
}

std::vector<ConfusionRule> parse_responder_spec(std::string_view spec) {
  const std::string s = trim(spec);
  if (s == "perfect") return {};
  constexpr std::string_view prefix = "confusion:";
  if (s.rfind(prefix, 0) != 0) {
    throw std::invalid_argument("responder must be 'perfect' or 'confusion:FROM->TO:P[,...]', got '" + s + "'");
  }
  std::vector<ConfusionRule> rules;
  std::string_view rest = std::string_view(s).substr(prefix.size());
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto arrow = item.find("->");
    const auto colon = item.rfind(':');
    if (arrow == std::string::npos || colon == std::string::npos || colon < arrow) {
      throw std::invalid_argument("malformed confusion rule '" + item + "'");
    }
    auto from = parse_condition(trim(std::string_view(item).substr(0, arrow)));
    auto to = parse_condition(trim(std::string_view(item).substr(arrow + 2, colon - arrow - 2)));
    if (!from || !to) throw std::invalid_argument("unknown condition in rule '" + item + "'");
    double p = 0;
    try {
      std::size_t used = 0;
      const std::string ptext = trim(std::string_view(item).substr(colon + 1));
      p = std::stod(ptext, &used);
      if (used != ptext.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad probability in rule '" + item + "'");
    }
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("probability outside [0, 1] in rule '" + item + "'");
    rules.push_back({*from, *to, p});
  }
  if (rules.empty()) throw std::invalid_argument("confusion responder needs at least one rule");
  for (auto c : {Condition::EL, Condition::EH, Condition::SL, Condition::SH, Condition::NC}) {
    double sum = 0;
    for (const auto& r : rules) {
      if (r.from == c) sum += r.probability;
    }
    if (sum > 1.0 + 1e-12) throw std::invalid_argument("confusion probabilities for " + std::string(to_string(c)) + " exceed 1");
  }
  return rules;
}

void ResponseGate::open(int index) {
  std::lock_guard lock(mutex_);
  if (open_index_ == index) return;
  open_index_ = index;
  answered_index_.reset();
  choice_.reset();
}

void ResponseGate::close() {
  {
    std::lock_guard lock(mutex_);
    open_index_.reset();
  }
  cv_.notify_all();
}

ResponseGate::Outcome ResponseGate::submit(int index, Condition choice) {
  {
    std::lock_guard lock(mutex_);
    if (answered_index_ == index) return Outcome::Duplicate;
    if (open_index_ != index) return Outcome::OutOfPhase;
    answered_index_ = index;
    choice_ = choice;
  }
  cv_.notify_all();
  return Outcome::Accepted;
}

std::optional<Condition> ResponseGate::wait(int index, SteadyClock::time_point deadline) {
  std::unique_lock lock(mutex_);
  cv_.wait_until(lock, deadline, [&] { return answered_index_ == index || open_index_ != index; });
  if (answered_index_ == index) return choice_;
  return std::nullopt;
}

std::string_view to_string(ResponseGate::Outcome outcome) {
  switch (outcome) {
    case ResponseGate::Outcome::Accepted: return "accepted";
    case ResponseGate::Outcome::OutOfPhase: return "out_of_phase";
    case ResponseGate::Outcome::Duplicate: return "duplicate";
  }
  return "?";
}

Response LiveResponder::await_response(const Prompt& prompt, DeviceLink& clock, double timeout_ms) {
  gate_.open(prompt.index);
  const auto deadline = SteadyClock::now() + std::chrono::duration_cast<SteadyClock::duration>(
                                                 std::chrono::duration<double, std::milli>(timeout_ms));
  auto choice = gate_.wait(prompt.index, deadline);
  const double t = clock.now_ms();
  gate_.close();
  return {choice, t};
}

// --- events ------------------------------------------------------------------

std::string encode_event(const Event& event) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, TrialStart>) {
          j["type"] = "trial_start";
          j["index"] = e.index;
          j["total"] = e.total;
        } else if constexpr (std::is_same_v<T, AwaitResponse>) {
          j["type"] = "await_response";
          j["index"] = e.index;
          j["t0_ms"] = e.t0_ms;
        } else if constexpr (std::is_same_v<T, TrialEnd>) {
          j["type"] = "trial_end";
          j["record"] = to_json(e.record);
        } else {
          j["type"] = "session_end";
          j["complete"] = e.complete;
          j["stats"] = to_json(e.stats);
        }
      },
      event);
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + '\n';
}

// --- session -----------------------------------------------------------------

SessionLog run_session(const SessionPlan& plan, DeviceLink& link, Responder& responder, const EventSink& sink,
                       std::stop_token stop) {
  const auto schedule = make_schedule(plan);
  auto emit = [&](const Event& e) {
    if (sink) sink(e);
  };
  SessionLog log;
  const double settle_ms = plan.settle_timeout_s * 1000.0;
  const double timeout_ms = plan.responder_timeout_s * 1000.0;
  const int total = static_cast<int>(schedule.size());

  try {
    const auto st = link.status();
    if (!st.calibrated_surface || !st.calibrated_edge) {
      throw DeviceError(ErrorCode::NotCalibrated, "both axes must be calibrated before a session");
    }
    for (int i = 0; i < total && !stop.stop_requested(); ++i) {
      const Condition presented = schedule[static_cast<std::size_t>(i)];
      emit(TrialStart{i, total});

      TrialRecord rec;
      rec.index = i;
      rec.presented = presented;
      rec.t_command_ms = link.now_ms();
      link.preset(presented);
      link.wait_settled(settle_ms);
      rec.t_settle_ms = link.now_ms();

      const Prompt prompt{i, presented, rec.t_command_ms};
      responder.arm(prompt);
      emit(AwaitResponse{i, rec.t_command_ms});
      const auto resp = responder.await_response(prompt, link, timeout_ms);
      rec.responded = resp.choice;
      rec.correct = resp.choice == presented;
      rec.t_response_ms = resp.t_ms;
      rec.response_time_s = (rec.t_response_ms - rec.t_command_ms) / 1000.0;
      log.records.push_back(rec);
      emit(TrialEnd{rec});

      link.preset(Condition::NC);
      link.wait_settled(settle_ms);
      if (stop.stop_requested()) break;
      link.wait_ms(plan.isi_s * 1000.0);
    }
  } catch (const std::exception& e) {
    log.complete = false;
    if (!log.records.empty()) emit(SessionEnd{compute_stats(log.records), false});
    throw SessionError(e.what(), std::move(log));
  }
  log.complete = static_cast<int>(log.records.size()) == total;
  if (!log.records.empty()) emit(SessionEnd{compute_stats(log.records), log.complete});
  return log;
}

}  // namespace edgesim::experiment
