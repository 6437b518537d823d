#include "qkdlab/security_metrics.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qkdlab/attack_lab.hpp"

namespace qkdlab {
namespace {

// P(X ≤ k) for X ~ Binomial(n, p), summed in log space.
double binomial_cdf(std::size_t k, std::size_t n, double p) {
  double total = 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                            j * std::log(p) + (n - j) * std::log1p(-p);
    total += std::exp(log_term);
  }
  return total;
}

// Clopper–Pearson one-sided upper limit by bisection on the binomial CDF.
double cp_upper_oracle(std::size_t k, std::size_t n, double alpha) {
  double lo = static_cast<double>(k) / n, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (binomial_cdf(k, n, mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CqState perfect_key_state(std::size_t key_len, std::size_t dim) {
  std::vector<CqBranch> b;
  const double p = std::ldexp(1.0, -static_cast<int>(key_len));
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << key_len); ++s) {
    b.push_back({KeyLabel::from_index(s, key_len), p, DensityOperator::maximally_mixed(dim)});
  }
  return CqState(key_len, std::move(b));
}

// ρ^s = |s⟩⟨s|: the adversary holds a copy of the key.
CqState copied_key_state(std::size_t key_len) {
  std::vector<CqBranch> b;
  const std::size_t keys = std::size_t{1} << key_len;
  for (std::size_t s = 0; s < keys; ++s) {
    b.push_back({KeyLabel::from_index(s, key_len), 1.0 / keys, DensityOperator::basis_projector(keys, s)});
  }
  return CqState(key_len, std::move(b));
}

TEST(CorrectnessTest, ExactMismatchProbability) {
  const JointDistribution j({{{"0", "0"}, 0.7}, {{"0", "1"}, 0.1}, {{"1", "1"}, 0.15}, {{"1", "PERP"}, 0.05}});
  EXPECT_NEAR(correctness_eps(j), 0.15, 1e-15);
}

TEST(CorrectnessTest, ClopperPearsonZeroMismatches) {
  std::vector<std::pair<KeyLabel, KeyLabel>> samples(1000, {KeyLabel::bits("01"), KeyLabel::bits("01")});
  const CorrectnessEstimate e = correctness_eps(samples);
  EXPECT_EQ(e.mismatches, 0u);
  EXPECT_NEAR(e.upper_99, 1.0 - std::pow(0.01, 1.0 / 1000.0), 1e-12);
}

TEST(CorrectnessTest, ClopperPearsonMatchesBisectionOracle) {
  std::vector<std::pair<KeyLabel, KeyLabel>> samples(500, {KeyLabel::bits("1"), KeyLabel::bits("1")});
  for (int k = 0; k < 7; ++k) samples[k].second = KeyLabel::bits("0");
  const CorrectnessEstimate e = correctness_eps(samples);
  EXPECT_NEAR(e.upper_99, cp_upper_oracle(7, 500, 0.01), 1e-9);
  EXPECT_NEAR(e.empirical, 7.0 / 500.0, 1e-15);
}

TEST(CorrectnessTest, RejectsEmptySamples) {
  std::vector<std::pair<KeyLabel, KeyLabel>> none;
  EXPECT_THROW(correctness_eps(none), std::invalid_argument);
}

TEST(RobustnessTest, ReadsAbortProbability) {
  EXPECT_NEAR(robustness_eps({{"0", 0.49}, {"1", 0.49}, {"PERP", 0.02}}), 0.02, 1e-15);
  EXPECT_EQ(robustness_eps({{"0", 0.5}, {"1", 0.5}}), 0.0);
  EXPECT_THROW(robustness_eps({{"0", 0.5}}), std::invalid_argument);
}

TEST(SecrecyUpperTest, PerfectKeyIsZero) {
  EXPECT_NEAR(secrecy_eps_upper(perfect_key_state(3, 2)), 0.0, 1e-12);
}

TEST(SecrecyUpperTest, CopiedKeyOneBit) {
  // ½ Σ_s ‖½|s⟩⟨s| − ¼ I‖₁ = ½.
  EXPECT_NEAR(secrecy_eps_upper(copied_key_state(1)), 0.5, 1e-12);
}

TEST(SecrecyUpperTest, MatchesDenseDistanceToCanonicalIdeal) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    const CqState cq = oracle::random_cq(2, 3, k % 2 == 0, rng);
    const CqState ideal = ideal_state(canonical_ideal(cq), 2);
    const double dense = oracle::trace_distance_svd(oracle::dense_embedding(cq), oracle::dense_embedding(ideal));
    EXPECT_NEAR(secrecy_eps_upper(cq), dense, 1e-9);
  }
}

TEST(SecrecyUpperTest, MissingKeysCountAgainstSecrecy) {
  // Only key "0" ever occurs; the ideal spreads it over both keys.
  const CqState cq(1, {{KeyLabel::bits("0"), 1.0, DensityOperator::maximally_mixed(2)}});
  EXPECT_NEAR(secrecy_eps_upper(cq), 0.5, 1e-12);
}

TEST(IdealStateTest, HasPerfectForm) {
  std::mt19937_64 rng(4);
  const CqState cq = oracle::random_cq(2, 2, true, rng);
  const IdealForm f = canonical_ideal(cq);
  const CqState ideal = ideal_state(f, 2);
  EXPECT_NEAR(ideal.perp_probability(), cq.perp_probability(), 1e-12);
  EXPECT_NEAR(secrecy_eps_upper(ideal), 0.0, 1e-12);
}

TEST(SecrecyLowerTest, HelstromReachesCanonicalDistance) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const CqState cq = oracle::random_cq(1, 2, k % 3 == 0, rng);
    const SecrecyLowerBound lb = secrecy_eps_lower(cq, {helstrom_strategy(cq)});
    EXPECT_NEAR(lb.strategies[0].advantage_vs_canonical, secrecy_eps_upper(cq), 1e-9);
    EXPECT_LE(lb.value, secrecy_eps_upper(cq) + 1e-12);
  }
}

TEST(SecrecyLowerTest, CopiedKeyCertifiedHalf) {
  const CqState cq = copied_key_state(1);
  const SecrecyLowerBound lb = secrecy_eps_lower(cq, default_strategies(cq));
  EXPECT_NEAR(lb.value, 0.5, 1e-9);
}

TEST(SecrecyLowerTest, ParityStrategyOnAttackState) {
  const AttackState a = build_attack_state(3);
  const SecrecyLowerBound lb = secrecy_eps_lower(a.cq, {basis_parity_strategy(3)});
  const StrategyAdvantage& s = lb.strategies.at(0);
  EXPECT_NEAR(s.real_accept, 1.0, 1e-12);
  EXPECT_NEAR(s.canonical_ideal_accept, 0.5, 1e-12);
  EXPECT_NEAR(s.ideal_accept_max, 0.5, 1e-12);
  EXPECT_NEAR(lb.value, 0.5, 1e-9);
}

TEST(SecrecyLowerTest, RejectsEmptyStrategyList) {
  EXPECT_THROW(secrecy_eps_lower(perfect_key_state(1, 2), {}), std::invalid_argument);
}

TEST(AccessibleInfoTest, NeverExceedsHolevoChi) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 8; ++k) {
    const CqState cq = oracle::random_cq(2, 4, false, rng);
    const AccessibleInfoResult r = accessible_info_lower(cq, 16, 100 + k);
    EXPECT_LE(r.bits, oracle::holevo_chi(cq) + 1e-9);
    EXPECT_GE(r.bits, 0.0);
  }
}

TEST(AccessibleInfoTest, CopiedKeyGivesFullKeyLength) {
  const AccessibleInfoResult r = accessible_info_lower(copied_key_state(2), 8, 1);
  EXPECT_NEAR(r.bits, 2.0, 1e-9);
  EXPECT_EQ(r.best_family, "per_qubit");
}

TEST(AccessibleInfoTest, DeterministicForSeed) {
  std::mt19937_64 rng(2);
  const CqState cq = oracle::random_cq(1, 3, false, rng);
  EXPECT_EQ(accessible_info_lower(cq, 12, 5).bits, accessible_info_lower(cq, 12, 5).bits);
}

TEST(AccessibleInfoTest, RejectsZeroBudgetAndOversizedStates) {
  const CqState cq = perfect_key_state(1, 4);
  EXPECT_THROW(accessible_info_lower(cq, 0, 1), std::invalid_argument);
  EXPECT_THROW(accessible_info_lower(cq, 4, 1, 2), std::invalid_argument);
}

TEST(AccessibleInfoTest, AttackStatePerQubitFamilyIsExhaustiveAndSmall) {
  const AttackState a = build_attack_state(4);
  const AccessibleInfoResult r = accessible_info_lower(a.cq, 8, 3);
  const FamilySearch* f = r.family("per_qubit");
  ASSERT_NE(f, nullptr);
  EXPECT_TRUE(f->exhaustive);
  EXPECT_EQ(f->evaluations, 81u);
  const double breidbart =
      measured_information(a.cq, Povm::projective(product_basis(std::vector<double>(4, std::numbers::pi / 8.0)), 4));
  EXPECT_GE(f->best_bits + 1e-12, breidbart);
  EXPECT_LE(f->best_bits, 0.2);
}

TEST(BenOrTest, ClosedFormSatisfiesBoundWithEquality) {
  const double eps = ben_or_sufficient_eps(1e-4, 3);
  EXPECT_NEAR(1e-4, std::ldexp(1.0, -5) * eps * eps, 1e-18);
  EXPECT_EQ(ben_or_sufficient_eps(10.0, 3), 1.0);
  EXPECT_EQ(ben_or_sufficient_eps(0.0, 3), 0.0);
  EXPECT_THROW(ben_or_sufficient_eps(-1.0, 3), std::invalid_argument);
}

TEST(ComposeReportTest, SumsAndClamps) {
  EXPECT_NEAR(compose_report(0.1, 0.2, 0.3), 0.6, 1e-15);
  EXPECT_EQ(compose_report(0.6, 0.6, 0.0), 1.0);
  EXPECT_THROW(compose_report(-0.1, 0.0, 0.0), std::invalid_argument);
}

TEST(SecurityReportTest, PerfectKeyAllZero) {
  SecurityInputs in;
  in.outcomes = JointDistribution({{{"0", "0"}, 0.5}, {{"1", "1"}, 0.5}});
  in.passive_outcomes = Distribution{{"0", 0.5}, {"1", 0.5}};
  in.search_budget = 4;
  const SecurityReport r = make_security_report(perfect_key_state(1, 2), in);
  EXPECT_EQ(r.eps_correct, 0.0);
  EXPECT_EQ(r.eps_robust, 0.0);
  EXPECT_NEAR(r.eps_secret_upper, 0.0, 1e-12);
  EXPECT_NEAR(r.eps_secret_lower, 0.0, 1e-12);
  EXPECT_NEAR(r.iacc_lower_bits, 0.0, 1e-12);
  EXPECT_NEAR(r.eps_total, 0.0, 1e-12);
  const Json j = to_json(r);
  EXPECT_TRUE(j.contains("provenance"));
  EXPECT_EQ(j["provenance"]["eps_total_uses"], "eps_secret_upper");
}

}  // namespace
}  // namespace qkdlab
