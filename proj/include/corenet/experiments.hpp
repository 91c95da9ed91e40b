#pragma once

// Scenario files, parameter sweeps and CSV output.
//
// A scenario is an INI file:
//
//   [scenario]
//   name = ttd_vs_queue
//   kind = analyze            ; analyze | simulate
//   metric = ttd
//   mode = expected           ; simulate only
//   seed = 1
//   [sweep]
//   param = T_q
//   from = 1
//   to = 10
//   step = 1
//   [params]                  ; optional overrides (L_wl, T_q, S_d, ...)
//   S_d = 200
//   [hops]
//   gamma = 2
//
// Metrics: ttd, handover_x2_inter, handover_s1_intra, dto_gtp_ipinip,
// dto_gtp_gre (analyze); ttd, handover_x2_inter, handover_s1_intra,
// attach_data, handover_chain (simulate).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "corenet/delay_model.hpp"
#include "corenet/procedures.hpp"
#include "corenet/simnet.hpp"
#include "corenet/wire_codecs.hpp"

namespace corenet::exp {

enum class RunKind { kAnalyze, kSimulate };

enum class Metric {
  kTtd,
  kHandoverX2Inter,
  kHandoverS1Intra,
  kDtoGtpIpInIp,
  kDtoGtpGre,
  kAttachData,
  kHandoverChain,
};

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);  // throws kConfig

struct Sweep {
  std::string param;  // T_q, L_wl, gamma, lambda, S_d, n_enbs
  double from = 0.0;
  double to = 0.0;
  double step = 1.0;

  // from + i*step for every i with value <= to.
  std::vector<double> points() const;
};

struct Scenario {
  std::string name = "scenario";
  RunKind kind = RunKind::kAnalyze;
  Metric metric = Metric::kTtd;
  delay::DelayParams params;
  delay::HopCounts hops;
  delay::ModelOptions model;
  sim::WirelessMode mode = sim::WirelessMode::kExpectedValue;
  std::uint64_t seed = 1;
  wire::OuterHeaderMode outer = wire::OuterHeaderMode::kCompact;
  proc::Scope attach_scope = proc::Scope::kClosedForm;  // attach_data
  double speed_kmh = 0.0;  // handover_chain; 0 runs handovers back to back
  Sweep sweep;
  bool compare = true;  // simulate: emit analytic columns when they exist
  bool trace = false;
  int jobs = 1;

  // Throws kConfig.
  void validate() const;
};

Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);

// Point `value` of `param` applied to a copy of the scenario inputs.
void apply_sweep_value(const std::string& param, double value, delay::DelayParams& params, delay::HopCounts& hops);

struct ResultRow {
  double sweep_value = 0.0;
  std::string metric;
  std::vector<double> values;  // empty on an error row
  std::string status;          // simulate only
  std::vector<std::string> trace;
};

struct SweepResult {
  std::vector<std::string> value_columns;
  bool has_status = false;
  std::vector<ResultRow> rows;
};

SweepResult run_sweep(const Scenario& scenario);

// Header then one row per line, 6 decimals. Throws kPrecondition on no rows.
std::string to_csv(const SweepResult& result);
void emit_csv(const SweepResult& result, const std::filesystem::path& path);

// Every trace line of every point, prefixed by a `# <sweep value> <arch>`
// line per simulation.
std::string trace_text(const SweepResult& result);

// Handover trigger interval for a UE crossing cells of `cell_m` metres.
double handover_interval_ms(double speed_kmh, double cell_m = 100.0);

}  // namespace corenet::exp
