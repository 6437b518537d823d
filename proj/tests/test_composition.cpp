#include "qkdlab/composition.hpp"

#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

namespace qkdlab {
namespace {

ProtocolPair constant_pair(const View& real, const View& ideal) {
  ProtocolPair p;
  p.name = "constant";
  p.real_run = [real](std::mt19937_64&) { return real; };
  p.ideal_run = [ideal](std::mt19937_64&) { return ideal; };
  p.real_exact = ViewDistribution{{real, 1.0}};
  p.ideal_exact = ViewDistribution{{ideal, 1.0}};
  return p;
}

DistinguisherDef first_output_bit() {
  return {"first_output", [](const View& v) { return !v.outputs.empty() && v.outputs[0] == 1; }};
}

TEST(AdvantageTest, IdenticalPairsGiveNoAdvantage) {
  const ProtocolPair p = perfect_key_source(3);
  const AdvantageEstimate e = estimate_advantage(p, first_output_bit(), 20000, 4);
  EXPECT_LE(std::abs(e.point), e.half_width_99);
  const AdvantageEstimate x = estimate_advantage(p, first_output_bit(), 100, 4, true);
  EXPECT_EQ(x.point, 0.0);
  EXPECT_TRUE(x.exact);
}

TEST(AdvantageTest, SeparatedPairsGiveFullAdvantage) {
  const ProtocolPair p = constant_pair(View{{1}, {}}, View{{0}, {}});
  const AdvantageEstimate e = estimate_advantage(p, first_output_bit(), 1000, 1);
  EXPECT_EQ(e.point, 1.0);
  EXPECT_TRUE(e.hoeffding);
  EXPECT_NEAR(e.half_width_99, std::sqrt(std::log(2.0 / 0.01) / 2.0 * (2.0 / 1000.0)), 1e-12);
}

TEST(AdvantageTest, RejectsTooFewTrials) {
  EXPECT_THROW(estimate_advantage(perfect_key_source(1), first_output_bit(), 99, 1), std::invalid_argument);
}

TEST(AdvantageTest, EnumerationNeedsExplicitDistributions) {
  ProtocolPair p = perfect_key_source(2);
  p.real_exact.reset();
  EXPECT_THROW(estimate_advantage(p, first_output_bit(), 100, 1, true), std::invalid_argument);
}

TEST(AdvantageTest, SameSeedSameEstimate) {
  const ProtocolPair p = biased_key_source(3, 0.1);
  const auto a = estimate_advantage(p, first_output_bit(), 5000, 9);
  const auto b = estimate_advantage(p, first_output_bit(), 5000, 9);
  EXPECT_EQ(a.real_accept, b.real_accept);
  EXPECT_EQ(a.ideal_accept, b.ideal_accept);
}

TEST(HalfWidthTest, PooledNormalFormula) {
  bool hoeffding = true;
  const double h = half_width_99(5000, 10000, 4800, 10000, &hoeffding);
  const double p = 9800.0 / 20000.0;
  EXPECT_FALSE(hoeffding);
  EXPECT_NEAR(h, 2.5758293035489004 * std::sqrt(p * (1 - p) * (2.0 / 10000.0)), 1e-6);
}

TEST(BiasedSourceTest, DeclaredEpsIsExactTotalVariation) {
  // One bit: |0.6 − 0.5| = 0.1.
  EXPECT_NEAR(biased_key_source(1, 0.1).declared_eps, 0.1, 1e-15);
  // Three bits: ½ Σ_k C(3,k) |0.6^k 0.4^{3−k} − 1/8|.
  const double tv = 0.5 * (std::abs(0.064 - 0.125) + 3 * std::abs(0.096 - 0.125) + 3 * std::abs(0.144 - 0.125) +
                           std::abs(0.216 - 0.125));
  EXPECT_NEAR(biased_key_source(3, 0.1).declared_eps, tv, 1e-15);
  EXPECT_NEAR(tv, 0.148, 1e-15);
}

TEST(BiasedSourceTest, MonteCarloAgreesWithExact) {
  const Bits message = {1, 0, 1};
  const ProtocolPair composed = compose(otp_application(message), biased_key_source(3, 0.1));
  const AdvantageEstimate exact = estimate_advantage(composed, majority_distinguisher(), 100, 0, true);
  // Majority of three bits with Pr[1] = 0.6: 0.648; uniform: 0.5.
  EXPECT_NEAR(exact.point, 0.148, 1e-12);
  const AdvantageEstimate mc = estimate_advantage(composed, majority_distinguisher(), 100000, 11);
  EXPECT_LE(std::abs(mc.point - exact.point), mc.half_width_99);
}

TEST(ComposeTest, DeclaredEpsAddsAndClamps) {
  KeyedApplication app = otp_application({0, 1});
  app.declared_eps = 0.3;
  // Two bits at δ = 0.1: ½(0.09 + 2·0.01 + 0.11) = 0.11.
  EXPECT_NEAR(compose(app, biased_key_source(2, 0.1)).declared_eps, 0.3 + 0.11, 1e-12);
  app.declared_eps = 0.95;
  EXPECT_EQ(compose(app, biased_key_source(2, 0.1)).declared_eps, 1.0);
}

TEST(ComposeTest, KeyLengthMismatchThrows) {
  EXPECT_THROW(compose(otp_application({0, 1, 1}), perfect_key_source(2)), std::length_error);
  EXPECT_THROW(hybrid_source_gap(otp_application({0}), perfect_key_source(2)), std::length_error);
}

TEST(OtpTest, PerfectKeyGivesUniformCiphertext) {
  const ProtocolPair composed = compose(otp_application({1, 1, 0}), perfect_key_source(3));
  ASSERT_TRUE(composed.real_exact && composed.ideal_exact);
  EXPECT_EQ(composed.real_exact->size(), 8u);
  for (const auto& [v, p] : *composed.real_exact) {
    EXPECT_NEAR(p, 0.125, 1e-15);
    EXPECT_EQ(v.outputs, (Bits{1, 1, 0}));
  }
  EXPECT_NEAR(total_variation(*composed.real_exact, *composed.ideal_exact), 0.0, 1e-15);
}

TEST(OtpTest, SingleBiasedBitExact) {
  const ProtocolPair composed = compose(otp_application({0}), biased_key_source(1, 0.1));
  EXPECT_NEAR(total_variation(*composed.real_exact, *composed.ideal_exact), 0.1, 1e-15);
  EXPECT_NEAR(estimate_advantage(composed, first_bit_distinguisher(), 100, 0, true).point, 0.1, 1e-15);
}

TEST(OtpTest, RejectsNonBitMessage) { EXPECT_THROW(otp_application({0, 2}), std::invalid_argument); }

TEST(TelescopeTest, ExactResidualVanishes) {
  const CompositionReport r = verify_composition_bound(otp_application({1, 0, 1}), biased_key_source(3, 0.1),
                                                       {majority_distinguisher(), first_bit_distinguisher()},
                                                       100, 3, true);
  for (const auto& d : r.distinguishers) {
    EXPECT_LE(std::abs(d.telescope_residual), 1e-12) << d.name;
    EXPECT_NEAR(d.app_gap.point, 0.0, 1e-15) << d.name;
  }
  EXPECT_TRUE(r.pass);
}

TEST(TelescopeTest, SampledGapsRespectTheirBounds) {
  const CompositionReport r = verify_composition_bound(otp_application({1, 0, 1}), biased_key_source(3, 0.1),
                                                       {majority_distinguisher()}, 50000, 5);
  const auto& d = r.distinguishers.at(0);
  EXPECT_LE(std::abs(d.source_gap.point), r.eps_source + d.source_gap.half_width_99);
  EXPECT_LE(std::abs(d.app_gap.point), r.eps_app + d.app_gap.half_width_99);
  EXPECT_LE(std::abs(d.telescope_residual),
            d.total.half_width_99 + d.source_gap.half_width_99 + d.app_gap.half_width_99);
  EXPECT_EQ(to_json(r)["distinguishers"][0]["name"], "majority");
}

TEST(AttackSourceTest, ParityDistinguisherSucceeds) {
  const std::size_t n = 3;
  const Bits message = {0, 1, 1, 0};
  const ProtocolPair composed = compose(otp_application(message), attack_key_source(n, 1.0 / 64));
  const AdvantageEstimate mc = estimate_advantage(composed, parity_distinguisher(n), 20000, 8);
  EXPECT_GE(mc.point, 0.5 - mc.half_width_99);
  EXPECT_NEAR(mc.real_accept, 1.0, 1e-12);
  const AdvantageEstimate exact = estimate_advantage(composed, parity_distinguisher(n), 100, 0, true);
  EXPECT_NEAR(exact.point, 0.5, 1e-12);
}

TEST(AttackSourceTest, ViolatesSmallDeclaredEps) {
  const CompositionReport r = verify_composition_bound(otp_application({1, 1, 0, 1}), attack_key_source(3, 1.0 / 64),
                                                       {parity_distinguisher(3)}, 10000, 2);
  EXPECT_FALSE(r.pass);
}

TEST(AttackSourceTest, RejectsBadParameters) {
  EXPECT_THROW(attack_key_source(1, 0.1), std::invalid_argument);
  EXPECT_THROW(attack_key_source(3, 1.5), std::invalid_argument);
}

}  // namespace
}  // namespace qkdlab
