#pragma once

// Closed-form delay model for attach, data delivery and handover signaling.
//
// Per-message primitives:
//   wireless(S)   = k(q) * (8 S / B_wl + L_wl)
//   wired(S, H)   = H * (8 S / B_w + L_w + T_q)
// where k(q) is (1-q)/(1+q) by default. Sizes are bytes, bandwidths Mbps,
// delays ms.

#include <string>
#include <string_view>
#include <vector>

namespace corenet::delay {

struct DelayParams {
  double wireless_link_ms = 10.0;  // L_wl
  double wired_link_ms = 2.0;      // L_w
  double failure_prob = 0.2;       // q
  double queue_ms = 5.0;           // T_q, per wired node
  int control_bytes = 50;          // S_c
  int data_bytes = 200;            // S_d
  double wireless_mbps = 11.0;     // B_wl
  double wired_mbps = 100.0;       // B_w

  // Throws kPrecondition on any out-of-range field.
  void validate() const;
};

struct HopCounts {
  int alpha = 2;    // eNB-SGW (BS-CGW for data in ICNA)
  int beta = 3;     // SGW-PGW
  int gamma = 2;    // eNB-MME, BS-UCE
  int delta = 3;    // MME-HSS, UCE-HSS
  int epsilon = 2;  // MME-SGW, UCE-CGW
  int lambda = 2;   // eNB-eNB, BS-BS

  void validate() const;
  friend bool operator==(const HopCounts&, const HopCounts&) = default;
};

enum class Prefactor { kLossDiscount, kRetransmission };
enum class WirelessLatencyTerm { kWirelessLink, kWiredLink };
enum class DataHopTerm { kEpsilon, kAlpha };

// Model variants. Defaults give the reference values.
struct ModelOptions {
  Prefactor prefactor = Prefactor::kLossDiscount;
  // kWiredLink uses L_w in place of L_wl inside the wireless delay.
  WirelessLatencyTerm wireless_term = WirelessLatencyTerm::kWirelessLink;
  // Hop count used for the eNB->SGW data leg of the 4G total delay.
  DataHopTerm data_hop_4g = DataHopTerm::kEpsilon;
};

struct DelayTerm {
  std::string label;
  int count = 0;
  double each_ms = 0.0;
};

struct DelayBreakdown {
  double total_ms = 0.0;
  std::vector<DelayTerm> terms;

  void add(std::string label, int count, double each_ms);
  // Recomputes the total from the terms.
  double sum_of_terms() const;
};

double wireless_prefactor(double failure_prob, Prefactor mode = Prefactor::kLossDiscount);

double wireless_delay_ms(int bytes, const DelayParams& p, const ModelOptions& opts = {});
double wired_delay_ms(int bytes, int hops, const DelayParams& p);

DelayBreakdown ttd_4g(const DelayParams& p, const HopCounts& h, const ModelOptions& opts = {});
DelayBreakdown ttd_icna(const DelayParams& p, const HopCounts& h, const ModelOptions& opts = {});

enum class HandoverKind { kX2_4g, kS1_4g, kInterGwIcna, kIntraGwIcna };

std::string_view to_string(HandoverKind kind);
HandoverKind parse_handover_kind(std::string_view text);

DelayBreakdown handover_delay(HandoverKind kind, const DelayParams& p, const HopCounts& h,
                              const ModelOptions& opts = {});

}  // namespace corenet::delay
