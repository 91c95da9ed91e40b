#include "corenet/experiments.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "corenet/error.hpp"
#include "oracle.hpp"

namespace {

using namespace corenet;
using namespace corenet::exp;
namespace fs = std::filesystem;

const fs::path kSource = CORENET_SOURCE_DIR;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

Scenario analytic(Metric metric, const std::string& param, double from, double to, double step = 1.0) {
  Scenario s;
  s.metric = metric;
  s.sweep = {param, from, to, step};
  return s;
}

// Residual of the middle point against the chord through the outer two.
double collinearity_residual(double x0, double y0, double x1, double y1, double x2, double y2) {
  return std::fabs((y1 - y0) * (x2 - x0) - (y2 - y0) * (x1 - x0)) / std::fabs(x2 - x0);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Command {
  int status;
  std::string out;
};

Command run_cli(const std::string& args) {
  const std::string cmd = std::string(CORENET_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::vector<fs::path> shipped_scenarios() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kSource / "scenarios")) {
    if (e.path().extension() == ".ini") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- Configuration ----------------------------------------------------------

TEST(ScenarioFile, ParsesEverySection) {
  const auto s = parse(R"(
[scenario]
name = demo
kind = simulate
metric = handover_x2_inter
mode = stochastic
seed = 9
outer_header = standard
trace = true
jobs = 3
[sweep]
param = lambda
from = 1
to = 4
step = 1
[params]
L_wl = 7.5
T_q = 0
S_d = 300
q = 0.1
[hops]
beta = 4
[model]
data_hop_4g = alpha
)");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.kind, RunKind::kSimulate);
  EXPECT_EQ(s.metric, Metric::kHandoverX2Inter);
  EXPECT_EQ(s.mode, sim::WirelessMode::kStochastic);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.outer, wire::OuterHeaderMode::kStandard);
  EXPECT_TRUE(s.trace);
  EXPECT_EQ(s.jobs, 3);
  EXPECT_EQ(s.sweep.param, "lambda");
  EXPECT_DOUBLE_EQ(s.params.wireless_link_ms, 7.5);
  EXPECT_DOUBLE_EQ(s.params.queue_ms, 0.0);
  EXPECT_EQ(s.params.data_bytes, 300);
  EXPECT_DOUBLE_EQ(s.params.failure_prob, 0.1);
  EXPECT_EQ(s.hops.beta, 4);
  EXPECT_EQ(s.hops.gamma, 2);
  EXPECT_EQ(s.model.data_hop_4g, delay::DataHopTerm::kAlpha);
}

TEST(ScenarioFile, RejectsBadInput) {
  const std::string sweep = "[sweep]\nparam = T_q\nfrom = 1\nto = 2\nstep = 1\n";
  EXPECT_EQ(code_of([&] { parse("[scenario]\nmetric = ttd\n[extra]\nx = 1\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario]\nmetric = ttd\ncolour = red\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario]\nkind = analyze\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario]\nmetric = latency\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario]\nmetric = ttd\n[params]\nT_q = soon\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario]\nmetric = ttd\nkind = guess\n" + sweep); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse("[scenario\nmetric = ttd\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { load_scenario("/nonexistent/none.ini"); }), ErrorCode::kIo);
}

TEST(ScenarioFile, ValidationCatchesInconsistentScenarios) {
  auto s = analytic(Metric::kTtd, "B_w", 1, 2);
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kTtd, "T_q", 5, 1);
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kTtd, "T_q", 1, 5, 0);
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kAttachData, "T_q", 1, 5);
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kDtoGtpGre, "S_d", 100, 200, 100);
  s.kind = RunKind::kSimulate;
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kTtd, "n_enbs", 2, 4);
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
  s = analytic(Metric::kTtd, "T_q", 1, 2);
  s.params.failure_prob = 1.5;
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kConfig);
}

TEST(Sweep, PointsCoverTheRangeInclusively) {
  EXPECT_EQ((Sweep{"T_q", 1, 10, 1}.points().size()), 10u);
  EXPECT_EQ((Sweep{"S_d", 100, 1000, 100}.points()), (std::vector<double>{100, 200, 300, 400, 500, 600, 700, 800,
                                                                         900, 1000}));
  const auto fine = Sweep{"T_q", 0, 1, 0.1}.points();
  ASSERT_EQ(fine.size(), 11u);
  EXPECT_NEAR(fine.back(), 1.0, 1e-12);
  EXPECT_EQ((Sweep{"T_q", 3, 3, 1}.points().size()), 1u);
}

TEST(Sweep, IntegerParametersRejectFractions) {
  delay::DelayParams p;
  delay::HopCounts h;
  EXPECT_EQ(code_of([&] { apply_sweep_value("gamma", 2.5, p, h); }), ErrorCode::kConfig);
  apply_sweep_value("gamma", 4, p, h);
  EXPECT_EQ(h.gamma, 4);
  apply_sweep_value("L_wl", 12.5, p, h);
  EXPECT_DOUBLE_EQ(p.wireless_link_ms, 12.5);
}

// --- Analytic sweeps --------------------------------------------------------

TEST(AnalyzeSweep, TotalDelayMatchesTheOracleAtEveryQueueDelay) {
  const auto r = run_sweep(analytic(Metric::kTtd, "T_q", 1, 10));
  ASSERT_EQ(r.rows.size(), 10u);
  EXPECT_EQ(r.value_columns, (std::vector<std::string>{"value_4g", "value_icna"}));
  for (const auto& row : r.rows) {
    oracle::Params p;
    p.t_q = oracle::Q(static_cast<long long>(row.sweep_value));
    EXPECT_NEAR(row.values[0], oracle::to_double(oracle::ttd_4g(p, {})), 1e-9);
    EXPECT_NEAR(row.values[1], oracle::to_double(oracle::ttd_icna(p, {})), 1e-9);
    EXPECT_LT(row.values[1], row.values[0]);
  }
}

TEST(AnalyzeSweep, TotalDelayIsLinearInQueueAndWirelessLatency) {
  for (const auto& [param, from, to] : {std::tuple{"T_q", 1.0, 10.0}, std::tuple{"L_wl", 5.0, 20.0}}) {
    const auto r = run_sweep(analytic(Metric::kTtd, param, from, to));
    for (std::size_t i = 2; i < r.rows.size(); ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_LT(collinearity_residual(r.rows[i - 2].sweep_value, r.rows[i - 2].values[c],
                                        r.rows[i - 1].sweep_value, r.rows[i - 1].values[c], r.rows[i].sweep_value,
                                        r.rows[i].values[c]),
                  1e-9)
            << param;
      }
    }
  }
}

TEST(AnalyzeSweep, DtoAtTwoHundredBytes) {
  const auto r = run_sweep(analytic(Metric::kDtoGtpIpInIp, "S_d", 100, 1000, 100));
  ASSERT_EQ(r.rows.size(), 10u);
  EXPECT_EQ(r.value_columns, (std::vector<std::string>{"dto_gtp", "dto_ipinip"}));
  EXPECT_NEAR(r.rows[1].values[0], 15.254237, 1e-6);
  EXPECT_NEAR(r.rows[1].values[1], 13.793103, 1e-6);
  const auto g = run_sweep(analytic(Metric::kDtoGtpGre, "S_d", 200, 200));
  EXPECT_NEAR(g.rows[0].values[1], 12.280702, 1e-6);
  for (const auto& row : r.rows) EXPECT_GT(row.values[0], row.values[1]);
}

TEST(AnalyzeSweep, HandoverSlopesInLambda) {
  const auto r = run_sweep(analytic(Metric::kHandoverX2Inter, "lambda", 1, 8));
  const double hop = oracle::to_double(oracle::wired_hop(50, {}));
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_NEAR(r.rows[i].values[0] - r.rows[i - 1].values[0], 2 * hop, 1e-9);
    EXPECT_NEAR(r.rows[i].values[1] - r.rows[i - 1].values[1], 3 * hop, 1e-9);
  }
  EXPECT_GT(r.rows[1].values[0], r.rows[1].values[1]);  // lambda = 2
}

TEST(AnalyzeSweep, OuterHeaderModeChangesIpInIpOnly) {
  auto s = analytic(Metric::kDtoGtpIpInIp, "S_d", 200, 200);
  s.outer = wire::OuterHeaderMode::kStandard;
  const auto r = run_sweep(s);
  EXPECT_NEAR(r.rows[0].values[0], 15.254237, 1e-6);
  EXPECT_NEAR(r.rows[0].values[1], oracle::to_double(oracle::overhead_percent(40, 200)), 1e-9);
}

// --- Simulated sweeps -------------------------------------------------------

TEST(SimulateSweep, AgreesWithClosedForms) {
  for (auto metric : {Metric::kTtd, Metric::kHandoverX2Inter}) {
    auto s = analytic(metric, "T_q", 0, 6, 2);
    s.kind = RunKind::kSimulate;
    const auto r = run_sweep(s);
    ASSERT_EQ(r.value_columns.size(), 4u);
    for (const auto& row : r.rows) {
      EXPECT_EQ(row.status, "ok");
      EXPECT_NEAR(row.values[0], row.values[2], 1e-6);
      EXPECT_NEAR(row.values[1], row.values[3], 1e-6);
    }
  }
}

TEST(SimulateSweep, S1DivergesFromItsClosedFormWhenGammaDiffersFromLambda) {
  auto s = analytic(Metric::kHandoverS1Intra, "gamma", 1, 3);
  s.kind = RunKind::kSimulate;
  const auto r = run_sweep(s);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].status, "diverges");
  EXPECT_EQ(r.rows[1].status, "ok");  // gamma == lambda
  EXPECT_EQ(r.rows[2].status, "diverges");
  // The intra-gateway side always matches.
  for (const auto& row : r.rows) EXPECT_NEAR(row.values[1], row.values[3], 1e-6);
}

TEST(SimulateSweep, UnrealizablePointsBecomeErrorRows) {
  auto s = analytic(Metric::kHandoverX2Inter, "lambda", 3, 6);
  s.kind = RunKind::kSimulate;
  const auto r = run_sweep(s);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[1].status, "ok");
  EXPECT_EQ(r.rows[2].status, "error:unrealizable-topology");
  EXPECT_TRUE(r.rows[2].values.empty());
  const auto csv = to_csv(r);
  EXPECT_NE(csv.find("5.000000,handover_x2_inter,,,,,error:unrealizable-topology\n"), std::string::npos);
}

TEST(SimulateSweep, HandoverChainAccumulates) {
  auto s = analytic(Metric::kHandoverChain, "n_enbs", 2, 5);
  s.kind = RunKind::kSimulate;
  s.speed_kmh = 30;
  const auto r = run_sweep(s);
  for (const auto& row : r.rows) {
    const double n = row.sweep_value - 1;
    EXPECT_NEAR(row.values[0], n * 140.080, 1e-6);
    EXPECT_NEAR(row.values[1], n * 98.056, 1e-6);
    EXPECT_EQ(row.status, "ok");
  }
  s.sweep.from = 1;
  EXPECT_EQ(code_of([&] { run_sweep(s); }), ErrorCode::kConfig);
}

TEST(SimulateSweep, AttachDataHasNoAnalyticColumns) {
  auto s = analytic(Metric::kAttachData, "T_q", 5, 5);
  s.kind = RunKind::kSimulate;
  const auto r = run_sweep(s);
  EXPECT_EQ(r.value_columns, (std::vector<std::string>{"value_4g", "value_icna"}));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_LT(r.rows[0].values[1], r.rows[0].values[0]);
}

TEST(SimulateSweep, ParallelPointsKeepTheirOrder) {
  auto s = analytic(Metric::kTtd, "T_q", 1, 10);
  s.kind = RunKind::kSimulate;
  s.mode = sim::WirelessMode::kStochastic;
  s.trace = true;
  const auto serial = run_sweep(s);
  s.jobs = 4;
  const auto parallel = run_sweep(s);
  EXPECT_EQ(to_csv(serial), to_csv(parallel));
  EXPECT_EQ(trace_text(serial), trace_text(parallel));
}

TEST(SimulateSweep, StochasticRowsDependOnTheSeed) {
  auto s = analytic(Metric::kTtd, "T_q", 1, 4);
  s.kind = RunKind::kSimulate;
  s.mode = sim::WirelessMode::kStochastic;
  const auto a = to_csv(run_sweep(s));
  EXPECT_EQ(a, to_csv(run_sweep(s)));
  s.seed = 77;
  EXPECT_NE(a, to_csv(run_sweep(s)));
  EXPECT_NE(a.find(",stochastic\n"), std::string::npos);
}

// --- Output -------------------------------------------------------------------

TEST(Csv, HeaderThenSixDecimalRows) {
  const auto one = run_sweep(analytic(Metric::kHandoverX2Inter, "lambda", 2, 2));
  EXPECT_EQ(to_csv(one), "sweep_value,metric,value_4g,value_icna\n2.000000,handover_x2_inter,140.080000,98.056000\n");
  EXPECT_EQ(code_of([] { to_csv(SweepResult{}); }), ErrorCode::kPrecondition);
}

TEST(Csv, FilesAreByteIdenticalAcrossRuns) {
  const auto dir = fs::temp_directory_path() / "corenet_csv_test";
  fs::create_directories(dir);
  const auto s = analytic(Metric::kTtd, "L_wl", 5, 20);
  emit_csv(run_sweep(s), dir / "a.csv");
  emit_csv(run_sweep(s), dir / "b.csv");
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  EXPECT_EQ(read_file(dir / "a.csv"), to_csv(run_sweep(s)));
  EXPECT_EQ(code_of([&] { emit_csv(run_sweep(s), dir / "missing" / "c.csv"); }), ErrorCode::kIo);
  fs::remove_all(dir);
}

TEST(Speed, HandoverIntervalFromCellCrossing) {
  EXPECT_NEAR(handover_interval_ms(36.0), 10000.0, 1e-9);
  EXPECT_NEAR(handover_interval_ms(120.0, 100.0), 3000.0, 1e-9);
  EXPECT_EQ(code_of([] { handover_interval_ms(0.0); }), ErrorCode::kPrecondition);
}

// --- Shipped scenarios --------------------------------------------------------

TEST(ShippedScenarios, AllRunAndAreDeterministic) {
  const auto files = shipped_scenarios();
  ASSERT_GE(files.size(), 9u);
  for (const auto& f : files) {
    const auto s = load_scenario(f);
    const auto a = run_sweep(s);
    const auto b = run_sweep(s);
    EXPECT_EQ(to_csv(a), to_csv(b)) << f;
    EXPECT_EQ(trace_text(a), trace_text(b)) << f;
    EXPECT_EQ(a.rows.size(), s.sweep.points().size()) << f;
  }
}

TEST(ShippedScenarios, CurveOrderings) {
  auto load = [](const std::string& name) { return run_sweep(load_scenario(kSource / "scenarios" / name)); };
  for (const auto* name : {"ttd_vs_queue.ini", "ttd_vs_wireless_latency.ini", "ttd_vs_gamma.ini",
                           "attach_data.ini", "handover_chain.ini"}) {
    for (const auto& row : load(name).rows) EXPECT_LT(row.values[1], row.values[0]) << name << " " << row.sweep_value;
  }
  // X2 stays above inter-gateway while lambda < gamma + 2 beta.
  for (const auto& row : load("handover_vs_lambda.ini").rows) {
    if (row.sweep_value < 8) EXPECT_LT(row.values[1], row.values[0]) << row.sweep_value;
  }
  // S1 stays above intra-gateway while 6 lambda + 2 beta > 5 gamma.
  for (const auto& row : load("handover_vs_gamma.ini").rows) {
    if (row.sweep_value <= 3) {
      EXPECT_LT(row.values[1], row.values[0]) << row.sweep_value;
    } else {
      EXPECT_GT(row.values[1], row.values[0]) << row.sweep_value;
    }
  }
  for (const auto* name : {"dto_gtp_ipinip.ini", "dto_gtp_gre.ini"}) {
    const auto r = load(name);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      EXPECT_GT(r.rows[i].values[0], r.rows[i].values[1]);
      if (i > 0) EXPECT_LT(r.rows[i].values[0], r.rows[i - 1].values[0]);
    }
  }
}

// --- Command line ----------------------------------------------------------------

TEST(Cli, AnalyzeScenarioMatchesLibraryOutput) {
  const auto file = kSource / "scenarios" / "ttd_vs_queue.ini";
  const auto c = run_cli("analyze --scenario " + file.string());
  EXPECT_EQ(c.status, 0);
  EXPECT_EQ(c.out, to_csv(run_sweep(load_scenario(file))));
}

TEST(Cli, InlineSweepFlags) {
  const auto c = run_cli("analyze --metric handover_x2_inter --sweep lambda --from 2 --to 2 --step 1");
  EXPECT_EQ(c.status, 0);
  EXPECT_EQ(c.out, "sweep_value,metric,value_4g,value_icna\n2.000000,handover_x2_inter,140.080000,98.056000\n");
}

TEST(Cli, ProcedureTranscript) {
  const auto c = run_cli("simulate --procedure INTER_GW_HO_ICNA --arch icna --scope closed_form");
  EXPECT_EQ(c.status, 0);
  EXPECT_NE(c.out.find("258.208727 ReleaseResources BS1 BS0\n"), std::string::npos);
}

TEST(Cli, CodecDumpMatchesGoldenFile) {
  const auto c = run_cli("codec dump");
  EXPECT_EQ(c.status, 0);
  EXPECT_EQ(c.out, read_file(kSource / "tests" / "golden" / "codec_vectors.txt"));
}

TEST(Cli, TopologyEdgeList) {
  const auto c = run_cli("topology --arch icna");
  EXPECT_EQ(c.status, 0);
  EXPECT_NE(c.out.find("UE0 BS0 wireless\n"), std::string::npos);
  EXPECT_EQ(run_cli("topology --arch icna --lambda 9").status, 2);
}

TEST(Cli, ErrorsExitWithTwo) {
  EXPECT_EQ(run_cli("analyze --metric nope --sweep T_q --from 1 --to 2 --step 1").status, 2);
  EXPECT_EQ(run_cli("analyze --metric ttd --sweep T_q --from 3 --to 2 --step 1").status, 2);
  EXPECT_EQ(run_cli("simulate --procedure X2_HO_4G --arch icna").status, 2);
}

}  // namespace
