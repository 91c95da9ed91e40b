#include "corenet/simnet.hpp"

#include <cmath>
#include <cstdio>

#include "corenet/error.hpp"

namespace corenet::sim {

SimTime SimTime::from_ms(double ms) {
  const double fs = ms * static_cast<double>(kPerMs);
  if (!std::isfinite(fs) || std::fabs(fs) > 9.0e18) {
    throw Error(ErrorCode::kDomain, "time outside the simulated range");
  }
  return SimTime(std::llround(fs));
}

std::string_view to_string(WirelessMode mode) {
  return mode == WirelessMode::kExpectedValue ? "expected" : "stochastic";
}

WirelessMode parse_wireless_mode(std::string_view text) {
  if (text == "expected") return WirelessMode::kExpectedValue;
  if (text == "stochastic") return WirelessMode::kStochastic;
  throw Error(ErrorCode::kConfig, "unknown wireless mode '" + std::string(text) + "'");
}

Simulator::Simulator(const topo::Topology& topology, LinkModel model)
    : topology_(topology), model_(std::move(model)), rng_(model_.seed) {
  model_.params.validate();
}

std::uint64_t Simulator::schedule(SimTime at, std::variant<Deliver, Timer> action) {
  if (at < now_) {
    throw Error(ErrorCode::kCausality, "event at " + std::to_string(at.ms()) + " ms scheduled at clock " +
                                           std::to_string(now_.ms()) + " ms");
  }
  if (const auto* d = std::get_if<Deliver>(&action); d && d->packet.kind == PacketKind::kData) ++pending_data_;
  const std::uint64_t seq = next_seq_++;
  queue_.push(SimEvent{at, seq, std::move(action)});
  return seq;
}

// Top 53 bits of the engine output; mt19937_64 is fully specified, so draws
// are identical on every platform.
double Simulator::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

double Simulator::link_delay_ms(topo::NodeId a, topo::NodeId b, int bytes) {
  auto wired = topology_.link_wired(a, b);
  if (!wired) throw Error(ErrorCode::kNoRoute, "no link " + topo::to_string(a) + "-" + topo::to_string(b));
  const auto& p = model_.params;
  if (*wired) return delay::wired_delay_ms(bytes, 1, p);

  if (model_.mode == WirelessMode::kExpectedValue) return delay::wireless_delay_ms(bytes, p, model_.model);

  auto lossless = p;
  lossless.failure_prob = 0.0;
  const double attempt = delay::wireless_delay_ms(bytes, lossless, model_.model);
  int attempts = 1;
  while (uniform() < p.failure_prob) ++attempts;
  return attempts * attempt;
}

SimTime Simulator::transmit(Packet packet, const std::vector<topo::NodeId>& path) {
  if (path.empty()) throw Error(ErrorCode::kNoRoute, "empty path");
  if (packet.size_bytes <= 0) throw Error(ErrorCode::kPrecondition, "packet without a size");
  double total_ms = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total_ms += link_delay_ms(path[i - 1], path[i], packet.size_bytes);
  const SimTime arrival = now_ + SimTime::from_ms(total_ms);
  schedule(arrival, Deliver{std::move(packet), now_});
  return arrival;
}

void Simulator::record(const SimEvent& event) {
  char head[64];
  std::snprintf(head, sizeof head, "%.9f %llu ", event.at.ms(), static_cast<unsigned long long>(event.seq));
  std::string line = head;
  if (const auto* d = std::get_if<Deliver>(&event.action)) {
    line += topo::to_string(d->packet.from) + " " + topo::to_string(d->packet.to) + " " + d->packet.name + " " +
            std::to_string(d->packet.size_bytes);
  } else {
    const auto& t = std::get<Timer>(event.action);
    line += topo::to_string(t.owner) + " " + topo::to_string(t.owner) + " timer:" + t.tag + " 0";
  }
  trace_.push_back(std::move(line));
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  SimEvent event = queue_.top();
  queue_.pop();
  now_ = event.at;
  if (const auto* d = std::get_if<Deliver>(&event.action); d && d->packet.kind == PacketKind::kData) {
    --pending_data_;
  }
  ++dispatched_;
  if (tracing_) record(event);
  if (handler_) handler_(event);
  return true;
}

std::size_t Simulator::run_until(SimTime t_end) {
  if (t_end < now_) throw Error(ErrorCode::kCausality, "run_until into the past");
  std::size_t n = 0;
  while (!queue_.empty() && queue_.top().at <= t_end) {
    step();
    ++n;
  }
  now_ = t_end;
  return n;
}

std::size_t Simulator::run() {
  std::size_t n = 0;
  while (step()) ++n;
  return n;
}

}  // namespace corenet::sim
