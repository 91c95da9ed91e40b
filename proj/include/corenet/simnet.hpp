#pragma once

// Deterministic discrete-event engine. Messages travel store-and-forward
// along a node path; each link adds its full per-traversal delay and the
// message is delivered as a single event at the far end.

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "corenet/delay_model.hpp"
#include "corenet/topology.hpp"
#include "corenet/wire_codecs.hpp"

namespace corenet::sim {

// Simulated time in femtoseconds. 2^63 fs is about 2.5 hours.
class SimTime {
 public:
  static constexpr std::int64_t kPerMs = 1'000'000'000'000;

  constexpr SimTime() = default;
  static constexpr SimTime from_ticks(std::int64_t fs) { return SimTime(fs); }
  static SimTime from_ms(double ms);

  constexpr std::int64_t ticks() const { return fs_; }
  constexpr double ms() const { return static_cast<double>(fs_) / static_cast<double>(kPerMs); }

  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime(a.fs_ + b.fs_); }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime(a.fs_ - b.fs_); }
  friend constexpr auto operator<=>(SimTime, SimTime) = default;

 private:
  constexpr explicit SimTime(std::int64_t fs) : fs_(fs) {}
  std::int64_t fs_ = 0;
};

enum class WirelessMode { kExpectedValue, kStochastic };

std::string_view to_string(WirelessMode mode);
WirelessMode parse_wireless_mode(std::string_view text);  // "expected" | "stochastic"

struct LinkModel {
  delay::DelayParams params;
  delay::ModelOptions model;
  WirelessMode mode = WirelessMode::kExpectedValue;
  std::uint64_t seed = 1;
};

enum class PacketKind { kControl, kData };

struct Packet {
  PacketKind kind = PacketKind::kControl;
  std::string name;
  topo::NodeId from;
  topo::NodeId to;
  int size_bytes = 0;
  std::uint64_t id = 0;
  int message = -1;  // caller-defined message code
  std::string step;  // message-chart step label, control only
  // Data only: the frame as it appears on this leg.
  wire::Scheme scheme = wire::Scheme::kNone;
  std::vector<std::uint8_t> frame;
};

struct Deliver {
  Packet packet;
  SimTime sent;
};

struct Timer {
  topo::NodeId owner;
  std::string tag;
};

struct SimEvent {
  SimTime at;
  std::uint64_t seq = 0;
  std::variant<Deliver, Timer> action;
};

class Simulator {
 public:
  using Handler = std::function<void(const SimEvent&)>;

  Simulator(const topo::Topology& topology, LinkModel model);

  SimTime now() const { return now_; }
  const LinkModel& model() const { return model_; }

  void set_handler(Handler handler) { handler_ = std::move(handler); }
  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<std::string>& trace() const { return trace_; }

  // Queues an action; the engine assigns the sequence number. Throws
  // kCausality for a time before now().
  std::uint64_t schedule(SimTime at, std::variant<Deliver, Timer> action);

  // Delay of one traversal of the link a-b. Stochastic mode draws the
  // retransmission count here.
  double link_delay_ms(topo::NodeId a, topo::NodeId b, int bytes);

  // Sends `packet` along `path` (path.front() is the sender) and schedules
  // its delivery. Returns the arrival time. Throws kNoRoute on a missing link.
  SimTime transmit(Packet packet, const std::vector<topo::NodeId>& path);

  // Processes one event; false when the queue is empty.
  bool step();
  // Processes every event with at <= t_end, then sets the clock to t_end.
  std::size_t run_until(SimTime t_end);
  // Drains the queue.
  std::size_t run();

  std::size_t pending() const { return queue_.size(); }
  std::size_t pending_data() const { return pending_data_; }
  std::size_t dispatched() const { return dispatched_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  double uniform();
  void record(const SimEvent& event);

  const topo::Topology& topology_;
  LinkModel model_;
  std::mt19937_64 rng_;
  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  Handler handler_;
  bool tracing_ = false;
  std::vector<std::string> trace_;
  std::size_t pending_data_ = 0;
  std::size_t dispatched_ = 0;
};

}  // namespace corenet::sim
