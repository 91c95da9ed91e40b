#include "corenet/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "corenet/error.hpp"

namespace corenet::exp {

namespace pt = boost::property_tree;

namespace {

constexpr double kAgreeMs = 1e-6;

const std::set<std::string> kSweepParams = {"T_q", "L_wl", "gamma", "lambda", "S_d", "n_enbs"};

int as_int(const std::string& param, double value) {
  const double r = std::round(value);
  if (std::fabs(value - r) > 1e-9) throw Error(ErrorCode::kConfig, param + " must be an integer");
  return static_cast<int>(r);
}

void check_keys(const pt::ptree& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : section) {
    if (!allowed.count(key)) throw Error(ErrorCode::kConfig, "unknown key [" + name + "] " + key);
  }
}

proc::WorldConfig world_config(const Scenario& s, topo::Arch arch, const delay::DelayParams& p,
                               const delay::HopCounts& h, std::uint64_t seed) {
  proc::WorldConfig c;
  c.topology.arch = arch;
  c.topology.hops = h;
  c.params = p;
  c.model = s.model;
  c.mode = s.mode;
  c.seed = seed;
  c.outer = s.outer;
  c.trace = s.trace;
  return c;
}

void take_trace(ResultRow& row, const proc::World& w, double value, topo::Arch arch) {
  if (!w.config().trace) return;
  char head[64];
  std::snprintf(head, sizeof head, "# %.6f %s", value, std::string(topo::to_string(arch)).c_str());
  row.trace.emplace_back(head);
  const auto& lines = w.simulator().trace();
  row.trace.insert(row.trace.end(), lines.begin(), lines.end());
}

std::string status_for(const Scenario& s, const std::vector<double>& sim, const std::vector<double>& analytic) {
  if (s.mode == sim::WirelessMode::kStochastic) return "stochastic";
  for (std::size_t i = 0; i < sim.size(); ++i) {
    if (std::fabs(sim[i] - analytic[i]) > kAgreeMs) return "diverges";
  }
  return "ok";
}

ResultRow analyze_point(const Scenario& s, double value) {
  auto p = s.params;
  auto h = s.hops;
  apply_sweep_value(s.sweep.param, value, p, h);
  p.validate();
  h.validate();
  ResultRow row;
  row.sweep_value = value;
  row.metric = std::string(to_string(s.metric));
  using delay::HandoverKind;
  switch (s.metric) {
    case Metric::kTtd:
      row.values = {delay::ttd_4g(p, h, s.model).total_ms, delay::ttd_icna(p, h, s.model).total_ms};
      break;
    case Metric::kHandoverX2Inter:
      row.values = {delay::handover_delay(HandoverKind::kX2_4g, p, h, s.model).total_ms,
                    delay::handover_delay(HandoverKind::kInterGwIcna, p, h, s.model).total_ms};
      break;
    case Metric::kHandoverS1Intra:
      row.values = {delay::handover_delay(HandoverKind::kS1_4g, p, h, s.model).total_ms,
                    delay::handover_delay(HandoverKind::kIntraGwIcna, p, h, s.model).total_ms};
      break;
    case Metric::kDtoGtpIpInIp:
      row.values = {wire::tunneling_overhead_percent(wire::Scheme::kGtp4g, p.data_bytes, s.outer),
                    wire::tunneling_overhead_percent(wire::Scheme::kIpInIpIcna, p.data_bytes, s.outer)};
      break;
    case Metric::kDtoGtpGre:
      row.values = {wire::tunneling_overhead_percent(wire::Scheme::kGtp4g, p.data_bytes, s.outer),
                    wire::tunneling_overhead_percent(wire::Scheme::kGreHandover, p.data_bytes, s.outer)};
      break;
    default:
      throw Error(ErrorCode::kConfig, row.metric + " has no closed form; use simulate");
  }
  return row;
}

ResultRow simulate_point(const Scenario& s, double value, std::size_t index) {
  auto p = s.params;
  auto h = s.hops;
  apply_sweep_value(s.sweep.param, value, p, h);
  p.validate();
  h.validate();
  const std::uint64_t seed = s.seed + index;
  ResultRow row;
  row.sweep_value = value;
  row.metric = std::string(to_string(s.metric));
  std::vector<double> analytic;
  using delay::HandoverKind;
  using topo::Arch;

  auto handover_pair = [&](proc::ProcedureKind k4g, proc::ProcedureKind kicna, HandoverKind a4g,
                           HandoverKind aicna) {
    proc::ProcedureOptions opts;
    opts.scope = proc::Scope::kClosedForm;
    for (auto [arch, kind] : {std::pair{Arch::kEpc4g, k4g}, std::pair{Arch::kIcna, kicna}}) {
      proc::World w(world_config(s, arch, p, h, seed));
      proc::ProcedureOptions attach = opts;
      w.run_procedure(arch == Arch::kEpc4g ? proc::ProcedureKind::kAttach4g : proc::ProcedureKind::kAttachIcna,
                      attach);
      row.values.push_back(w.run_procedure(kind, opts).final_latency_ms);
      take_trace(row, w, value, arch);
    }
    analytic = {delay::handover_delay(a4g, p, h, s.model).total_ms,
                delay::handover_delay(aicna, p, h, s.model).total_ms};
  };

  switch (s.metric) {
    case Metric::kTtd:
      for (auto arch : {Arch::kEpc4g, Arch::kIcna}) {
        proc::World w(world_config(s, arch, p, h, seed));
        row.values.push_back(w.run_total_transmission().final_latency_ms);
        take_trace(row, w, value, arch);
      }
      analytic = {delay::ttd_4g(p, h, s.model).total_ms, delay::ttd_icna(p, h, s.model).total_ms};
      break;
    case Metric::kHandoverX2Inter:
      handover_pair(proc::ProcedureKind::kX2Ho4g, proc::ProcedureKind::kInterGwHoIcna, HandoverKind::kX2_4g,
                    HandoverKind::kInterGwIcna);
      break;
    case Metric::kHandoverS1Intra:
      handover_pair(proc::ProcedureKind::kS1Ho4g, proc::ProcedureKind::kIntraGwHoIcna, HandoverKind::kS1_4g,
                    HandoverKind::kIntraGwIcna);
      break;
    case Metric::kAttachData:
      for (auto arch : {Arch::kEpc4g, Arch::kIcna}) {
        proc::World w(world_config(s, arch, p, h, seed));
        proc::ProcedureOptions opts;
        opts.scope = s.attach_scope;
        const double attach =
            w.run_procedure(arch == Arch::kEpc4g ? proc::ProcedureKind::kAttach4g : proc::ProcedureKind::kAttachIcna,
                            opts)
                .final_latency_ms;
        const auto data = w.run_procedure(proc::ProcedureKind::kDataMhIh, opts);
        if (data.packets_delivered != 1) throw Error(ErrorCode::kInvalidState, "uplink packet not delivered");
        row.values.push_back(attach + data.final_latency_ms);
        take_trace(row, w, value, arch);
      }
      break;
    case Metric::kHandoverChain: {
      const int handovers = as_int("n_enbs", value) - 1;
      if (handovers < 1) throw Error(ErrorCode::kConfig, "n_enbs must be at least 2");
      const double interval = s.speed_kmh > 0.0 ? handover_interval_ms(s.speed_kmh) : 0.0;
      for (auto arch : {Arch::kEpc4g, Arch::kIcna}) {
        double total = 0.0;
        for (double d : proc::run_handover_chain(arch, handovers, world_config(s, arch, p, h, seed), interval)) {
          total += d;
        }
        row.values.push_back(total);
      }
      analytic = {handovers * delay::handover_delay(HandoverKind::kX2_4g, p, h, s.model).total_ms,
                  handovers * delay::handover_delay(HandoverKind::kInterGwIcna, p, h, s.model).total_ms};
      break;
    }
    default:
      throw Error(ErrorCode::kConfig, row.metric + " is an analytic metric; use analyze");
  }
  if (s.compare && !analytic.empty()) {
    row.status = status_for(s, row.values, analytic);
    row.values.insert(row.values.end(), analytic.begin(), analytic.end());
  } else {
    row.status = s.mode == sim::WirelessMode::kStochastic ? "stochastic" : "ok";
  }
  return row;
}

ResultRow run_point(const Scenario& s, double value, std::size_t index) {
  try {
    return s.kind == RunKind::kAnalyze ? analyze_point(s, value) : simulate_point(s, value, index);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnrealizableTopology) throw;
    ResultRow row;
    row.sweep_value = value;
    row.metric = std::string(to_string(s.metric));
    row.status = "error:" + std::string(to_string(e.code()));
    return row;
  }
}

bool has_analytic_columns(const Scenario& s) {
  return s.compare && s.metric != Metric::kAttachData;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kTtd: return "ttd";
    case Metric::kHandoverX2Inter: return "handover_x2_inter";
    case Metric::kHandoverS1Intra: return "handover_s1_intra";
    case Metric::kDtoGtpIpInIp: return "dto_gtp_ipinip";
    case Metric::kDtoGtpGre: return "dto_gtp_gre";
    case Metric::kAttachData: return "attach_data";
    case Metric::kHandoverChain: return "handover_chain";
  }
  return "invalid";
}

Metric parse_metric(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(Metric::kHandoverChain); ++i) {
    auto m = static_cast<Metric>(i);
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown metric '" + std::string(text) + "'");
}

std::vector<double> Sweep::points() const {
  if (!(step > 0.0) || !(from <= to)) throw Error(ErrorCode::kConfig, "sweep needs step > 0 and from <= to");
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(from + static_cast<double>(i) * step);
  return out;
}

void apply_sweep_value(const std::string& param, double value, delay::DelayParams& p, delay::HopCounts& h) {
  if (param == "T_q") {
    p.queue_ms = value;
  } else if (param == "L_wl") {
    p.wireless_link_ms = value;
  } else if (param == "gamma") {
    h.gamma = as_int(param, value);
  } else if (param == "lambda") {
    h.lambda = as_int(param, value);
  } else if (param == "S_d") {
    p.data_bytes = as_int(param, value);
  } else if (param == "n_enbs") {
    as_int(param, value);  // consumed by the handover chain
  } else {
    throw Error(ErrorCode::kConfig, "unknown sweep parameter '" + param + "'");
  }
}

void Scenario::validate() const {
  if (!kSweepParams.count(sweep.param)) throw Error(ErrorCode::kConfig, "unknown sweep parameter '" + sweep.param + "'");
  sweep.points();
  if ((sweep.param == "n_enbs") != (metric == Metric::kHandoverChain)) {
    throw Error(ErrorCode::kConfig, "n_enbs sweeps go with the handover_chain metric only");
  }
  const bool analytic_only = metric == Metric::kDtoGtpIpInIp || metric == Metric::kDtoGtpGre;
  const bool sim_only = metric == Metric::kAttachData || metric == Metric::kHandoverChain;
  if (kind == RunKind::kSimulate && analytic_only) {
    throw Error(ErrorCode::kConfig, std::string(to_string(metric)) + " is an analytic metric; use analyze");
  }
  if (kind == RunKind::kAnalyze && sim_only) {
    throw Error(ErrorCode::kConfig, std::string(to_string(metric)) + " needs the simulator; use simulate");
  }
  if (jobs < 1) throw Error(ErrorCode::kConfig, "jobs must be positive");
  if (speed_kmh < 0.0) throw Error(ErrorCode::kConfig, "negative speed");
  try {
    params.validate();
    hops.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

Scenario parse_scenario(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  for (const auto& [section, _] : tree) {
    if (section != "scenario" && section != "sweep" && section != "params" && section != "hops" &&
        section != "model") {
      throw Error(ErrorCode::kConfig, "unknown section [" + section + "]");
    }
  }

  auto str = [](const pt::ptree& t, const std::string& key, const std::string& fallback) {
    return t.get<std::string>(key, fallback);
  };
  auto num = [](const pt::ptree& t, const std::string& key, auto fallback) {
    const auto child = t.get_child_optional(key);
    if (!child) return fallback;
    try {
      return child->template get_value<decltype(fallback)>();
    } catch (const pt::ptree_error& e) {
      throw Error(ErrorCode::kConfig, "bad value for '" + key + "': " + e.what());
    }
  };

  Scenario s;
  const pt::ptree empty;
  const auto& sc = tree.get_child("scenario", empty);
  check_keys(sc, "scenario",
             {"name", "kind", "metric", "mode", "seed", "outer_header", "attach_scope", "speed_kmh", "compare",
              "trace", "jobs"});
  s.name = str(sc, "name", s.name);
  const auto kind = str(sc, "kind", "analyze");
  if (kind == "analyze") {
    s.kind = RunKind::kAnalyze;
  } else if (kind == "simulate") {
    s.kind = RunKind::kSimulate;
  } else {
    throw Error(ErrorCode::kConfig, "kind must be analyze or simulate");
  }
  if (!sc.get_optional<std::string>("metric")) throw Error(ErrorCode::kConfig, "missing [scenario] metric");
  s.metric = parse_metric(str(sc, "metric", ""));
  s.mode = sim::parse_wireless_mode(str(sc, "mode", "expected"));
  s.seed = num(sc, "seed", std::uint64_t{1});
  const auto outer = str(sc, "outer_header", "compact");
  if (outer == "compact") {
    s.outer = wire::OuterHeaderMode::kCompact;
  } else if (outer == "standard") {
    s.outer = wire::OuterHeaderMode::kStandard;
  } else {
    throw Error(ErrorCode::kConfig, "outer_header must be compact or standard");
  }
  const auto scope = str(sc, "attach_scope", "closed_form");
  if (scope == "closed_form") {
    s.attach_scope = proc::Scope::kClosedForm;
  } else if (scope == "chart") {
    s.attach_scope = proc::Scope::kChart;
  } else {
    throw Error(ErrorCode::kConfig, "attach_scope must be closed_form or chart");
  }
  s.speed_kmh = num(sc, "speed_kmh", 0.0);
  s.compare = num(sc, "compare", true);
  s.trace = num(sc, "trace", false);
  s.jobs = num(sc, "jobs", 1);

  const auto& sw = tree.get_child("sweep", empty);
  check_keys(sw, "sweep", {"param", "from", "to", "step"});
  s.sweep.param = str(sw, "param", "");
  s.sweep.from = num(sw, "from", 0.0);
  s.sweep.to = num(sw, "to", 0.0);
  s.sweep.step = num(sw, "step", 1.0);

  const auto& pr = tree.get_child("params", empty);
  check_keys(pr, "params", {"L_wl", "L_w", "q", "T_q", "S_c", "S_d", "B_wl", "B_w"});
  auto& p = s.params;
  p.wireless_link_ms = num(pr, "L_wl", p.wireless_link_ms);
  p.wired_link_ms = num(pr, "L_w", p.wired_link_ms);
  p.failure_prob = num(pr, "q", p.failure_prob);
  p.queue_ms = num(pr, "T_q", p.queue_ms);
  p.control_bytes = num(pr, "S_c", p.control_bytes);
  p.data_bytes = num(pr, "S_d", p.data_bytes);
  p.wireless_mbps = num(pr, "B_wl", p.wireless_mbps);
  p.wired_mbps = num(pr, "B_w", p.wired_mbps);

  const auto& hp = tree.get_child("hops", empty);
  check_keys(hp, "hops", {"alpha", "beta", "gamma", "delta", "epsilon", "lambda"});
  auto& h = s.hops;
  h.alpha = num(hp, "alpha", h.alpha);
  h.beta = num(hp, "beta", h.beta);
  h.gamma = num(hp, "gamma", h.gamma);
  h.delta = num(hp, "delta", h.delta);
  h.epsilon = num(hp, "epsilon", h.epsilon);
  h.lambda = num(hp, "lambda", h.lambda);

  const auto& md = tree.get_child("model", empty);
  check_keys(md, "model", {"prefactor", "wireless_term", "data_hop_4g"});
  const auto prefactor = str(md, "prefactor", "loss_discount");
  if (prefactor == "loss_discount") {
    s.model.prefactor = delay::Prefactor::kLossDiscount;
  } else if (prefactor == "retransmission") {
    s.model.prefactor = delay::Prefactor::kRetransmission;
  } else {
    throw Error(ErrorCode::kConfig, "prefactor must be loss_discount or retransmission");
  }
  const auto term = str(md, "wireless_term", "wireless_link");
  if (term == "wireless_link") {
    s.model.wireless_term = delay::WirelessLatencyTerm::kWirelessLink;
  } else if (term == "wired_link") {
    s.model.wireless_term = delay::WirelessLatencyTerm::kWiredLink;
  } else {
    throw Error(ErrorCode::kConfig, "wireless_term must be wireless_link or wired_link");
  }
  const auto dh = str(md, "data_hop_4g", "epsilon");
  if (dh == "epsilon") {
    s.model.data_hop_4g = delay::DataHopTerm::kEpsilon;
  } else if (dh == "alpha") {
    s.model.data_hop_4g = delay::DataHopTerm::kAlpha;
  } else {
    throw Error(ErrorCode::kConfig, "data_hop_4g must be epsilon or alpha");
  }

  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return parse_scenario(in);
}

SweepResult run_sweep(const Scenario& s) {
  s.validate();
  const auto points = s.sweep.points();
  SweepResult result;
  const bool dto = s.metric == Metric::kDtoGtpIpInIp || s.metric == Metric::kDtoGtpGre;
  if (dto) {
    result.value_columns = {"dto_gtp", s.metric == Metric::kDtoGtpGre ? "dto_gre" : "dto_ipinip"};
  } else {
    result.value_columns = {"value_4g", "value_icna"};
  }
  if (s.kind == RunKind::kSimulate) {
    if (has_analytic_columns(s)) {
      result.value_columns.insert(result.value_columns.end(), {"analytic_4g", "analytic_icna"});
    }
    result.has_status = true;
  }

  result.rows.resize(points.size());
  const auto jobs = static_cast<std::size_t>(s.jobs);
  for (std::size_t start = 0; start < points.size(); start += jobs) {
    const std::size_t end = std::min(points.size(), start + jobs);
    if (jobs == 1) {
      result.rows[start] = run_point(s, points[start], start);
      continue;
    }
    std::vector<std::future<ResultRow>> batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, run_point, std::cref(s), points[i], i));
    }
    for (std::size_t i = start; i < end; ++i) result.rows[i] = batch[i - start].get();
  }
  return result;
}

std::string to_csv(const SweepResult& result) {
  if (result.rows.empty()) throw Error(ErrorCode::kPrecondition, "no rows to write");
  std::ostringstream os;
  os << "sweep_value,metric";
  for (const auto& c : result.value_columns) os << ',' << c;
  if (result.has_status) os << ",status";
  os << '\n';
  char buf[64];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%.6f", row.sweep_value);
    os << buf << ',' << row.metric;
    for (std::size_t i = 0; i < result.value_columns.size(); ++i) {
      os << ',';
      if (i < row.values.size()) {
        if (!std::isfinite(row.values[i])) throw Error(ErrorCode::kDomain, "non-finite result value");
        std::snprintf(buf, sizeof buf, "%.6f", row.values[i]);
        os << buf;
      }
    }
    if (result.has_status) os << ',' << row.status;
    os << '\n';
  }
  return os.str();
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
  const auto text = to_csv(result);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string trace_text(const SweepResult& result) {
  std::string out;
  for (const auto& row : result.rows) {
    for (const auto& line : row.trace) {
      out += line;
      out += '\n';
    }
  }
  return out;
}

double handover_interval_ms(double speed_kmh, double cell_m) {
  if (!(speed_kmh > 0.0) || !(cell_m > 0.0)) throw Error(ErrorCode::kPrecondition, "speed and cell size must be positive");
  return cell_m / (speed_kmh / 3.6) * 1000.0;
}

}  // namespace corenet::exp
