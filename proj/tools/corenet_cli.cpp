// corenet: closed-form sweeps, event-engine scenarios, codec vectors and
// topology dumps.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "corenet/error.hpp"
#include "corenet/experiments.hpp"
#include "corenet/procedures.hpp"
#include "corenet/topology.hpp"
#include "corenet/wire_codecs.hpp"

namespace {

using namespace corenet;

struct SweepFlags {
  std::string scenario;
  std::string sweep;
  std::optional<double> from, to, step;
  std::string metric;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string trace;
  std::string outer;
  int jobs = 0;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  cmd->add_option("--scenario", f.scenario, "Scenario file")->check(CLI::ExistingFile);
  cmd->add_option("--sweep", f.sweep, "Swept parameter: T_q, L_wl, gamma, lambda, S_d, n_enbs");
  cmd->add_option("--from", f.from);
  cmd->add_option("--to", f.to);
  cmd->add_option("--step", f.step);
  cmd->add_option("--metric", f.metric, "Metric when no scenario file is given");
  cmd->add_option("--out", f.out, "CSV path (default stdout)");
  cmd->add_option("--outer-header", f.outer, "compact|standard");
  cmd->add_option("--jobs", f.jobs, "Points evaluated in parallel");
}

wire::OuterHeaderMode parse_outer(const std::string& text) {
  if (text == "compact") return wire::OuterHeaderMode::kCompact;
  if (text == "standard") return wire::OuterHeaderMode::kStandard;
  throw Error(ErrorCode::kConfig, "--outer-header must be compact or standard");
}

exp::Scenario scenario_from(const SweepFlags& f, exp::RunKind kind) {
  exp::Scenario s;
  if (!f.scenario.empty()) {
    s = exp::load_scenario(f.scenario);
    if (s.kind != kind) {
      throw Error(ErrorCode::kConfig, f.scenario + " is a " +
                                          (s.kind == exp::RunKind::kAnalyze ? "analyze" : "simulate") + " scenario");
    }
  } else {
    if (f.metric.empty() || f.sweep.empty()) {
      throw Error(ErrorCode::kConfig, "give --scenario, or --metric with --sweep/--from/--to/--step");
    }
    s.kind = kind;
    s.name = "cli";
  }
  if (!f.metric.empty()) s.metric = exp::parse_metric(f.metric);
  if (!f.sweep.empty()) s.sweep.param = f.sweep;
  if (f.from) s.sweep.from = *f.from;
  if (f.to) s.sweep.to = *f.to;
  if (f.step) s.sweep.step = *f.step;
  if (!f.mode.empty()) s.mode = sim::parse_wireless_mode(f.mode);
  if (f.seed) s.seed = *f.seed;
  if (!f.outer.empty()) s.outer = parse_outer(f.outer);
  if (f.jobs > 0) s.jobs = f.jobs;
  if (!f.trace.empty()) s.trace = true;
  s.validate();
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out.flush()) throw Error(ErrorCode::kIo, "write failed: " + path);
}

int run_sweep_command(const SweepFlags& f, exp::RunKind kind) {
  const auto s = scenario_from(f, kind);
  const auto result = exp::run_sweep(s);
  write_text(f.out, exp::to_csv(result));
  if (!f.trace.empty()) write_text(f.trace, exp::trace_text(result));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Core-network signaling and tunneling simulator"};
  app.require_subcommand(1);

  SweepFlags analyze_flags;
  auto* analyze = app.add_subcommand("analyze", "Closed-form parameter sweeps");
  add_sweep_flags(analyze, analyze_flags);

  SweepFlags sim_flags;
  std::string procedure;
  std::string arch_text = "icna";
  std::string scope_text = "chart";
  std::string format = "lines";
  auto* simulate = app.add_subcommand("simulate", "Event-engine scenarios and procedure transcripts");
  add_sweep_flags(simulate, sim_flags);
  simulate->add_option("--mode", sim_flags.mode, "expected|stochastic");
  simulate->add_option("--seed", sim_flags.seed);
  simulate->add_option("--trace", sim_flags.trace, "Write the engine trace to this path");
  simulate->add_option("--procedure", procedure, "Print the transcript of one procedure, e.g. ATTACH_ICNA");
  simulate->add_option("--arch", arch_text, "4g|icna");
  simulate->add_option("--scope", scope_text, "chart|closed_form");
  simulate->add_option("--format", format, "lines|csv");

  auto* codec = app.add_subcommand("codec", "Codec utilities");
  auto* dump = codec->add_subcommand("dump", "Print the golden frames");
  std::string codec_outer = "compact";
  dump->add_option("--outer-header", codec_outer, "compact|standard");
  codec->require_subcommand(1);

  auto* topology = app.add_subcommand("topology", "Print the generated topology as an edge list");
  std::string topo_arch = "icna";
  delay::HopCounts hops;
  int n_bs = 2;
  int n_ue = 2;
  topology->add_option("--arch", topo_arch, "4g|icna");
  topology->add_option("--alpha", hops.alpha);
  topology->add_option("--beta", hops.beta);
  topology->add_option("--gamma", hops.gamma);
  topology->add_option("--delta", hops.delta);
  topology->add_option("--epsilon", hops.epsilon);
  topology->add_option("--lambda", hops.lambda);
  topology->add_option("--bs", n_bs);
  topology->add_option("--ue", n_ue);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_sweep_command(analyze_flags, exp::RunKind::kAnalyze);

    if (*simulate) {
      if (procedure.empty()) return run_sweep_command(sim_flags, exp::RunKind::kSimulate);
      proc::WorldConfig config;
      config.topology.arch = topo::parse_arch(arch_text);
      if (!sim_flags.mode.empty()) config.mode = sim::parse_wireless_mode(sim_flags.mode);
      if (sim_flags.seed) config.seed = *sim_flags.seed;
      if (!sim_flags.outer.empty()) config.outer = parse_outer(sim_flags.outer);
      proc::ProcedureOptions opts;
      if (scope_text == "chart") {
        opts.scope = proc::Scope::kChart;
      } else if (scope_text == "closed_form") {
        opts.scope = proc::Scope::kClosedForm;
      } else {
        throw Error(ErrorCode::kConfig, "--scope must be chart or closed_form");
      }
      const auto t = proc::run_procedure(proc::parse_procedure_kind(procedure), config, opts);
      std::string text;
      if (format == "csv") {
        text = t.to_csv();
      } else if (format == "lines") {
        for (const auto& line : t.to_lines()) text += line + "\n";
      } else {
        throw Error(ErrorCode::kConfig, "--format must be lines or csv");
      }
      write_text(sim_flags.out, text);
      return 0;
    }

    if (*codec) {
      std::string text;
      for (const auto& line : wire::golden_vectors(parse_outer(codec_outer))) text += line + "\n";
      std::cout << text;
      return 0;
    }

    if (*topology) {
      topo::TopologyConfig c;
      c.arch = topo::parse_arch(topo_arch);
      c.hops = hops;
      c.n_bs = n_bs;
      c.n_ue = n_ue;
      for (const auto& line : topo::build_topology(c).edge_list()) std::cout << line << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "corenet: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
