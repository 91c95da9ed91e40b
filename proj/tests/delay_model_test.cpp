#include "corenet/delay_model.hpp"

#include <gtest/gtest.h>

#include "corenet/error.hpp"
#include "oracle.hpp"

namespace {

using namespace corenet;
using namespace corenet::delay;

constexpr double kTol = 1e-9;

TEST(DelayPrimitives, MatchExactOracleAtDefaults) {
  DelayParams p;
  oracle::Params o;
  EXPECT_NEAR(wireless_delay_ms(50, p), oracle::to_double(oracle::wireless(50, o)), kTol);
  EXPECT_NEAR(wireless_delay_ms(200, p), oracle::to_double(oracle::wireless(200, o)), kTol);
  EXPECT_NEAR(wired_delay_ms(50, 1, p), oracle::to_double(oracle::wired_hop(50, o)), kTol);
  EXPECT_NEAR(wired_delay_ms(200, 3, p), oracle::to_double(oracle::wired(200, 3, o)), kTol);
}

TEST(DelayPrimitives, FrozenValues) {
  DelayParams p;
  EXPECT_NEAR(wireless_delay_ms(50, p), 368.0 / 55.0, kTol);  // 6.690909...
  EXPECT_NEAR(wireless_delay_ms(200, p), 6.763636363636, 1e-11);
  EXPECT_NEAR(wired_delay_ms(50, 1, p), 7.004, kTol);
  EXPECT_NEAR(wired_delay_ms(200, 1, p), 7.016, kTol);
}

TEST(DelayPrimitives, WiredScalesWithHops) {
  DelayParams p;
  for (int h = 1; h <= 10; ++h) EXPECT_NEAR(wired_delay_ms(50, h, p), h * wired_delay_ms(50, 1, p), kTol);
}

TEST(DelayPrimitives, LosslessRadioHasUnitPrefactor) {
  DelayParams p;
  p.failure_prob = 0.0;
  EXPECT_NEAR(wireless_delay_ms(50, p), 8.0 * 50 / 11000.0 + 10.0, kTol);
  EXPECT_DOUBLE_EQ(wireless_prefactor(0.0), 1.0);
  EXPECT_DOUBLE_EQ(wireless_prefactor(0.2, Prefactor::kRetransmission), 1.2 / 0.8);
}

TEST(DelayPrimitives, AlternateLatencyTermUsesWiredLink) {
  DelayParams p;
  ModelOptions opts;
  opts.wireless_term = WirelessLatencyTerm::kWiredLink;
  EXPECT_NEAR(wireless_delay_ms(50, p, opts), (0.8 / 1.2) * (400.0 / 11000.0 + 2.0), kTol);
}

TEST(DelayPrimitives, RejectOutOfRangeInputs) {
  DelayParams p;
  p.failure_prob = 1.0;
  EXPECT_THROW(
      {
        try {
          wireless_delay_ms(50, p);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
          throw;
        }
      },
      Error);
  p = {};
  p.queue_ms = -1;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_THROW(wired_delay_ms(50, 0, DelayParams{}), Error);
  EXPECT_THROW(wireless_delay_ms(0, DelayParams{}), Error);
  HopCounts h;
  h.lambda = 0;
  EXPECT_THROW(ttd_4g(DelayParams{}, h), Error);
}

TEST(TotalTransmissionDelay, DefaultsMatchOracle) {
  const auto g4 = ttd_4g({}, {});
  const auto icna = ttd_icna({}, {});
  const double o4 = oracle::to_double(oracle::ttd_4g({}, {}));
  const double oi = oracle::to_double(oracle::ttd_icna({}, {}));
  EXPECT_NEAR(g4.total_ms, o4, kTol);
  EXPECT_NEAR(icna.total_ms, oi, kTol);
  // Four-decimal reference values.
  EXPECT_NEAR(g4.total_ms, 320.5708, 1e-3);
  EXPECT_NEAR(icna.total_ms, 201.7439, 1e-3);
  EXPECT_NEAR(g4.total_ms, 320.570909090909, 1e-9);
  EXPECT_NEAR(icna.total_ms, 201.744, 1e-9);
}

TEST(TotalTransmissionDelay, BreakdownSumsToTotal) {
  for (const auto& b : {ttd_4g({}, {}), ttd_icna({}, {})}) {
    EXPECT_NEAR(b.sum_of_terms(), b.total_ms, kTol);
    EXPECT_FALSE(b.terms.empty());
  }
  const auto b = ttd_4g({}, {});
  EXPECT_EQ(b.terms.front().label, "wireless(S_c)");
  EXPECT_EQ(b.terms.front().count, 4);
}

TEST(TotalTransmissionDelay, ZeroQueueingDropsFortyHopsOfQueue) {
  DelayParams p;
  p.queue_ms = 0.0;
  oracle::Params o;
  o.t_q = 0;
  EXPECT_NEAR(ttd_4g(p, {}).total_ms, oracle::to_double(oracle::ttd_4g(o, {})), kTol);
  EXPECT_NEAR(ttd_4g(p, {}).total_ms, 120.570909090909, 1e-9);
  // 40 wired hops at defaults, each losing T_q = 5 ms.
  EXPECT_NEAR(ttd_4g({}, {}).total_ms - ttd_4g(p, {}).total_ms, 200.0, kTol);
}

TEST(TotalTransmissionDelay, DataHopOptionSelectsAlpha) {
  HopCounts h;
  h.alpha = 4;
  ModelOptions opts;
  opts.data_hop_4g = DataHopTerm::kAlpha;
  const double diff = ttd_4g({}, h, opts).total_ms - ttd_4g({}, h).total_ms;
  EXPECT_NEAR(diff, 2 * 2 * wired_delay_ms(200, 1, {}), kTol);
}

TEST(TotalTransmissionDelay, MatchesOracleAcrossGrid) {
  for (int tq = 0; tq <= 10; ++tq) {
    for (int lwl = 5; lwl <= 20; lwl += 5) {
      for (int gamma = 1; gamma <= 4; ++gamma) {
        DelayParams p;
        p.queue_ms = tq;
        p.wireless_link_ms = lwl;
        HopCounts h;
        h.gamma = gamma;
        oracle::Params o;
        o.t_q = tq;
        o.l_wl = lwl;
        oracle::Hops oh;
        oh.gamma = gamma;
        EXPECT_NEAR(ttd_4g(p, h).total_ms, oracle::to_double(oracle::ttd_4g(o, oh)), kTol);
        EXPECT_NEAR(ttd_icna(p, h).total_ms, oracle::to_double(oracle::ttd_icna(o, oh)), kTol);
        EXPECT_GT(ttd_4g(p, h).total_ms, ttd_icna(p, h).total_ms);
      }
    }
  }
}

TEST(TotalTransmissionDelay, GammaSlopeIsTheSameForBothArchitectures) {
  // Both expressions carry five gamma-hop control legs.
  HopCounts lo, hi;
  hi.gamma = lo.gamma + 1;
  const double d4 = ttd_4g({}, hi).total_ms - ttd_4g({}, lo).total_ms;
  const double di = ttd_icna({}, hi).total_ms - ttd_icna({}, lo).total_ms;
  EXPECT_NEAR(d4, di, kTol);
  EXPECT_NEAR(d4, 5 * wired_delay_ms(50, 1, {}), kTol);
}

TEST(TotalTransmissionDelay, LinearInQueueAndRadioLatency) {
  auto collinear = [](double y0, double y1, double y2) { return std::abs((y2 - y1) - (y1 - y0)); };
  for (int x = 1; x + 2 <= 10; ++x) {
    DelayParams a, b, c;
    a.queue_ms = x;
    b.queue_ms = x + 1;
    c.queue_ms = x + 2;
    EXPECT_LT(collinear(ttd_4g(a, {}).total_ms, ttd_4g(b, {}).total_ms, ttd_4g(c, {}).total_ms), 1e-9);
    EXPECT_LT(collinear(ttd_icna(a, {}).total_ms, ttd_icna(b, {}).total_ms, ttd_icna(c, {}).total_ms), 1e-9);
  }
}

TEST(HandoverDelay, DefaultsMatchOracle) {
  EXPECT_NEAR(handover_delay(HandoverKind::kX2_4g, {}, {}).total_ms, oracle::to_double(oracle::x2({}, {})), kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kS1_4g, {}, {}).total_ms, oracle::to_double(oracle::s1({}, {})), kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kInterGwIcna, {}, {}).total_ms,
              oracle::to_double(oracle::inter_gw({}, {})), kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kIntraGwIcna, {}, {}).total_ms,
              oracle::to_double(oracle::intra_gw({}, {})), kTol);

  EXPECT_NEAR(handover_delay(HandoverKind::kX2_4g, {}, {}).total_ms, 140.080, kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kS1_4g, {}, {}).total_ms, 154.088, kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kInterGwIcna, {}, {}).total_ms, 98.056, kTol);
  EXPECT_NEAR(handover_delay(HandoverKind::kIntraGwIcna, {}, {}).total_ms, 98.056, kTol);
}

TEST(HandoverDelay, LambdaSlopes) {
  const double hop = wired_delay_ms(50, 1, {});
  HopCounts lo, hi;
  for (int l = 1; l < 8; ++l) {
    lo.lambda = l;
    hi.lambda = l + 1;
    auto d = [&](HandoverKind k) { return handover_delay(k, {}, hi).total_ms - handover_delay(k, {}, lo).total_ms; };
    EXPECT_NEAR(d(HandoverKind::kX2_4g), 2 * hop, kTol);
    EXPECT_NEAR(d(HandoverKind::kInterGwIcna), 3 * hop, kTol);
    EXPECT_NEAR(d(HandoverKind::kS1_4g), 6 * hop, kTol);
    EXPECT_NEAR(d(HandoverKind::kIntraGwIcna), 0.0, kTol);
  }
}

TEST(HandoverDelay, X2AboveInterGatewayOnlyWhileLambdaIsBelowGammaPlusTwoBeta) {
  for (int gamma = 1; gamma <= 6; ++gamma) {
    for (int lambda = 1; lambda <= 2 * gamma; ++lambda) {
      for (int beta = 1; beta <= 5; ++beta) {
        HopCounts h;
        h.gamma = gamma;
        h.lambda = lambda;
        h.beta = beta;
        const double x2 = handover_delay(HandoverKind::kX2_4g, {}, h).total_ms;
        const double inter = handover_delay(HandoverKind::kInterGwIcna, {}, h).total_ms;
        if (lambda < gamma + 2 * beta) {
          EXPECT_GT(x2, inter) << gamma << " " << lambda << " " << beta;
        } else if (lambda == gamma + 2 * beta) {
          EXPECT_NEAR(x2, inter, kTol);
        } else {
          EXPECT_LT(x2, inter) << gamma << " " << lambda << " " << beta;
        }
      }
    }
  }
}

TEST(HandoverDelay, X2AboveInterGatewayAtDefaultDistances) {
  const HopCounts h;
  EXPECT_GT(handover_delay(HandoverKind::kX2_4g, {}, h).total_ms,
            handover_delay(HandoverKind::kInterGwIcna, {}, h).total_ms);
}

TEST(HandoverDelay, S1AboveIntraGatewayOnlyWhileSixLambdaPlusTwoBetaExceedsFiveGamma) {
  for (int gamma = 1; gamma <= 8; ++gamma) {
    HopCounts h;
    h.gamma = gamma;
    const double s1 = handover_delay(HandoverKind::kS1_4g, {}, h).total_ms;
    const double intra = handover_delay(HandoverKind::kIntraGwIcna, {}, h).total_ms;
    const int lhs = 6 * h.lambda + 2 * h.beta;
    if (lhs > 5 * gamma) {
      EXPECT_GT(s1, intra) << "gamma=" << gamma;
    } else {
      EXPECT_LE(s1, intra) << "gamma=" << gamma;
    }
  }
  HopCounts at4;
  at4.gamma = 4;
  EXPECT_LT(handover_delay(HandoverKind::kS1_4g, {}, at4).total_ms,
            handover_delay(HandoverKind::kIntraGwIcna, {}, at4).total_ms);
}

TEST(HandoverDelay, KindNamesRoundTrip) {
  for (auto k : {HandoverKind::kX2_4g, HandoverKind::kS1_4g, HandoverKind::kInterGwIcna,
                 HandoverKind::kIntraGwIcna}) {
    EXPECT_EQ(parse_handover_kind(to_string(k)), k);
  }
  try {
    parse_handover_kind("X3");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidKind);
  }
}

}  // namespace
