#include "corenet/delay_model.hpp"

#include <cmath>

#include "corenet/error.hpp"

namespace corenet::delay {
namespace {

constexpr double kBitsPerByte = 8.0;
constexpr double kBitsPerMsPerMbps = 1000.0;  // 1 Mbps = 1000 bits per ms

double tx_ms(int bytes, double mbps) { return kBitsPerByte * bytes / (mbps * kBitsPerMsPerMbps); }

void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kPrecondition, what);
}

}  // namespace

void DelayParams::validate() const {
  check(std::isfinite(wireless_link_ms) && wireless_link_ms >= 0, "L_wl must be >= 0");
  check(std::isfinite(wired_link_ms) && wired_link_ms >= 0, "L_w must be >= 0");
  check(std::isfinite(queue_ms) && queue_ms >= 0, "T_q must be >= 0");
  check(failure_prob >= 0 && failure_prob < 1, "q must lie in [0, 1)");
  check(control_bytes > 0 && data_bytes > 0, "packet sizes must be > 0");
  check(std::isfinite(wireless_mbps) && wireless_mbps > 0, "B_wl must be > 0");
  check(std::isfinite(wired_mbps) && wired_mbps > 0, "B_w must be > 0");
}

void HopCounts::validate() const {
  check(alpha >= 1 && beta >= 1 && gamma >= 1 && delta >= 1 && epsilon >= 1 && lambda >= 1,
        "hop counts must be >= 1");
}

void DelayBreakdown::add(std::string label, int count, double each_ms) {
  terms.push_back({std::move(label), count, each_ms});
  total_ms += count * each_ms;
}

double DelayBreakdown::sum_of_terms() const {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.count * t.each_ms;
  return sum;
}

double wireless_prefactor(double q, Prefactor mode) {
  return mode == Prefactor::kLossDiscount ? (1.0 - q) / (1.0 + q) : (1.0 + q) / (1.0 - q);
}

double wireless_delay_ms(int bytes, const DelayParams& p, const ModelOptions& opts) {
  check(bytes > 0, "message size must be > 0");
  p.validate();
  const double latency =
      opts.wireless_term == WirelessLatencyTerm::kWirelessLink ? p.wireless_link_ms : p.wired_link_ms;
  return wireless_prefactor(p.failure_prob, opts.prefactor) * (tx_ms(bytes, p.wireless_mbps) + latency);
}

double wired_delay_ms(int bytes, int hops, const DelayParams& p) {
  check(bytes > 0, "message size must be > 0");
  p.validate();
  check(hops >= 1, "hop count must be >= 1");
  return hops * (tx_ms(bytes, p.wired_mbps) + p.wired_link_ms + p.queue_ms);
}

DelayBreakdown ttd_4g(const DelayParams& p, const HopCounts& h, const ModelOptions& opts) {
  p.validate();
  h.validate();
  const int sc = p.control_bytes;
  const int sd = p.data_bytes;
  const int data_hop = opts.data_hop_4g == DataHopTerm::kEpsilon ? h.epsilon : h.alpha;

  DelayBreakdown b;
  b.add("wireless(S_c)", 4, wireless_delay_ms(sc, p, opts));
  b.add("gamma(S_c)", 5, wired_delay_ms(sc, h.gamma, p));
  b.add("delta(S_c)", 2, wired_delay_ms(sc, h.delta, p));
  b.add("epsilon(S_c)", 4, wired_delay_ms(sc, h.epsilon, p));
  b.add("beta(S_c)", 2, wired_delay_ms(sc, h.beta, p));
  b.add("wireless(S_d)", 2, wireless_delay_ms(sd, p, opts));
  b.add(opts.data_hop_4g == DataHopTerm::kEpsilon ? "epsilon(S_d)" : "alpha(S_d)", 2,
        wired_delay_ms(sd, data_hop, p));
  b.add("beta(S_d)", 2, wired_delay_ms(sd, h.beta, p));
  return b;
}

DelayBreakdown ttd_icna(const DelayParams& p, const HopCounts& h, const ModelOptions& opts) {
  p.validate();
  h.validate();
  const int sc = p.control_bytes;
  const int sd = p.data_bytes;

  DelayBreakdown b;
  b.add("wireless(S_c)", 3, wireless_delay_ms(sc, p, opts));
  b.add("gamma(S_c)", 5, wired_delay_ms(sc, h.gamma, p));
  b.add("delta(S_c)", 2, wired_delay_ms(sc, h.delta, p));
  b.add("epsilon(S_c)", 2, wired_delay_ms(sc, h.epsilon, p));
  b.add("wireless(S_d)", 2, wireless_delay_ms(sd, p, opts));
  b.add("alpha(S_d)", 2, wired_delay_ms(sd, h.alpha, p));
  return b;
}

std::string_view to_string(HandoverKind kind) {
  switch (kind) {
    case HandoverKind::kX2_4g: return "X2_4G";
    case HandoverKind::kS1_4g: return "S1_4G";
    case HandoverKind::kInterGwIcna: return "INTER_GW_ICNA";
    case HandoverKind::kIntraGwIcna: return "INTRA_GW_ICNA";
  }
  return "INVALID";
}

HandoverKind parse_handover_kind(std::string_view text) {
  for (auto k : {HandoverKind::kX2_4g, HandoverKind::kS1_4g, HandoverKind::kInterGwIcna,
                 HandoverKind::kIntraGwIcna}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidKind, std::string(text));
}

// Handover signaling is all control-sized.
DelayBreakdown handover_delay(HandoverKind kind, const DelayParams& p, const HopCounts& h,
                              const ModelOptions&) {
  p.validate();
  h.validate();
  const int sc = p.control_bytes;
  auto hops = [&](int n) { return wired_delay_ms(sc, n, p); };

  DelayBreakdown b;
  switch (kind) {
    case HandoverKind::kX2_4g:
      b.add("lambda", 2, hops(h.lambda));
      b.add("gamma", 3, hops(h.gamma));
      b.add("epsilon", 2, hops(h.epsilon));
      b.add("beta", 2, hops(h.beta));
      break;
    case HandoverKind::kS1_4g:
      b.add("lambda", 6, hops(h.lambda));
      b.add("epsilon", 2, hops(h.epsilon));
      b.add("beta", 2, hops(h.beta));
      break;
    case HandoverKind::kInterGwIcna:
      b.add("lambda", 3, hops(h.lambda));
      b.add("gamma", 2, hops(h.gamma));
      b.add("epsilon", 2, hops(h.epsilon));
      break;
    case HandoverKind::kIntraGwIcna:
      b.add("gamma", 5, hops(h.gamma));
      b.add("epsilon", 2, hops(h.epsilon));
      break;
    default:
      throw Error(ErrorCode::kInvalidKind, "unknown handover kind");
  }
  return b;
}

}  // namespace corenet::delay
