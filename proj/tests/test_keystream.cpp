#include "qkdlab/keystream.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

namespace qkdlab {
namespace {

StreamParams reference_params() {
  StreamParams p;
  p.gamma = 1e-3;
  p.rate_rho = 1e-2;
  p.nu = 1e-3;
  p.n0 = 60000;
  p.c = 1e5;
  p.ell = 256;
  p.ell0 = 40000;
  return p;
}

TEST(RoundEpsTest, DirectEvaluation) {
  StreamParams p = reference_params();
  p.ell = 1000;
  const RoundEps e = round_eps(p, 1, 1e5, 1e6, 1e3);
  // γ(ρ n − ℓ_i − ℓ) = 1e-3·(1e4 − 2e3) = 8; −ν ℓ_{i−1} + ln n = −100 + ln 1e6.
  EXPECT_NEAR(e.first_term, std::exp(-8.0), 1e-18);
  EXPECT_NEAR(e.second_term, std::exp(-100.0) * 1e6, 1e-50);
  EXPECT_NEAR(e.value, std::exp(-8.0) + std::exp(-100.0) * 1e6, 1e-18);
  EXPECT_FALSE(e.clamped);
}

TEST(RoundEpsTest, ZeroExponentGivesOne) {
  StreamParams p = reference_params();
  p.ell = 500;
  // ρ n − ℓ_i − ℓ = 1000 − 500 − 500 = 0, and the second term underflows.
  const RoundEps e = round_eps(p, 1, 1e6, 1e5, 500);
  EXPECT_DOUBLE_EQ(e.first_term, 1.0);
  EXPECT_EQ(e.value, 1.0);
  EXPECT_FALSE(e.clamped);
}

TEST(RoundEpsTest, NegativeExponentClamps) {
  StreamParams p = reference_params();
  p.ell = 600;
  const RoundEps e = round_eps(p, 1, 1e6, 1e5, 500);
  EXPECT_GT(e.first_term, 1.0);
  EXPECT_EQ(e.value, 1.0);
  EXPECT_TRUE(e.clamped);
}

TEST(RoundEpsTest, DoublingPreviousKeyShrinksSecondTerm) {
  const StreamParams p = reference_params();
  const RoundEps a = round_eps(p, 2, 3000, 1e6, 1000);
  const RoundEps b = round_eps(p, 2, 6000, 1e6, 1000);
  EXPECT_LT(b.second_term, a.second_term);
}

TEST(RoundEpsTest, RejectsInvalidArguments) {
  const StreamParams p = reference_params();
  EXPECT_THROW(round_eps(p, 0, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(round_eps(p, 1, 0, 1, 1), std::invalid_argument);
}

TEST(ScheduleTest, RecordsFollowGrowthRule) {
  StreamParams p = reference_params();
  p.c = 2.5;
  const auto rec = schedule(p, 20);
  ASSERT_EQ(rec.size(), 20u);
  for (const auto& r : rec) {
    EXPECT_EQ(r.n_i, static_cast<double>(p.n0) + std::ceil(p.c * r.i));
    EXPECT_EQ(r.ell_i, static_cast<double>(p.ell) + std::ceil(p.c * p.rate_rho * r.i / 2.0));
    EXPECT_GE(r.eps_i, 0.0);
  }
  for (std::size_t k = 1; k < rec.size(); ++k) {
    EXPECT_GT(rec[k].n_i, rec[k - 1].n_i);
  }
}

TEST(ScheduleTest, FirstRoundUsesInitialKey) {
  const StreamParams p = reference_params();
  const auto rec = schedule(p, 2);
  const RoundEps e = round_eps(p, 1, static_cast<double>(p.ell0), rec[0].n_i, rec[0].ell_i);
  EXPECT_EQ(rec[0].eps_i, e.value);
  const RoundEps e2 = round_eps(p, 2, rec[0].ell_i, rec[1].n_i, rec[1].ell_i);
  EXPECT_EQ(rec[1].eps_i, e2.value);
}

TEST(ScheduleTest, FirstTermExponentsStepByHalfGammaCRho) {
  StreamParams p = reference_params();
  p.c = 3000;
  const auto rec = schedule(p, 30, ScheduleMode::kReal);
  const double step = p.gamma * p.c * p.rate_rho / 2.0;
  for (std::size_t k = 1; k < rec.size(); ++k) {
    EXPECT_NEAR(std::log(rec[k].first_term) - std::log(rec[k - 1].first_term), -step, 1e-9);
  }
}

TEST(ScheduleTest, RoundedFirstTermWithinFactorOfGeometric) {
  StreamParams p = reference_params();
  p.c = 3333.3;
  const auto rec = schedule(p, 40);
  const double q = std::exp(-p.gamma * p.c * p.rate_rho / 2.0);
  const double bound = std::exp(p.gamma * (p.rate_rho + 1.0));
  for (const auto& r : rec) {
    const double ratio = r.first_term / (rec[0].first_term * std::pow(q, static_cast<double>(r.i - 1)));
    EXPECT_LE(ratio, bound * (1 + 1e-12));
    EXPECT_GE(ratio, 1.0 / bound / (1 + 1e-12));
  }
}

TEST(TotalEpsTest, DegenerateParametersGiveEpsZero) {
  StreamParams p = reference_params();
  p.n0 = 100'000'000;
  p.ell0 = 10'000'000;
  p.c = 1e9;
  p.eps0 = 1e-6;
  const StreamBudget b = total_eps(p, 50);
  EXPECT_EQ(b.partial_sum, 0.0);
  EXPECT_EQ(b.tail_bound, 0.0);
  EXPECT_EQ(b.eps_total, 1e-6);
}

TEST(TotalEpsTest, TailDecreasesWithHorizon) {
  StreamParams p = reference_params();
  p.c = 2000;
  double prev = INFINITY;
  for (std::uint64_t h : {1u, 2u, 5u, 10u, 20u, 40u}) {
    const StreamBudget b = total_eps(p, h);
    EXPECT_LT(b.tail_bound, prev) << h;
    prev = b.tail_bound;
  }
}

TEST(TotalEpsTest, TailBoundsBruteForceSum) {
  StreamParams p = reference_params();
  p.c = 500;
  p.n0 = 52000;
  for (auto mode : {ScheduleMode::kRounded, ScheduleMode::kReal}) {
    const StreamBudget b = total_eps(p, 10, mode);
    const auto long_run = schedule(p, 5000, mode);
    double first = 0.0, second = 0.0;
    for (std::size_t k = 10; k < long_run.size(); ++k) {
      first += long_run[k].first_term;
      second += long_run[k].second_term;
    }
    EXPECT_GE(b.tail_first, first);
    EXPECT_GE(b.tail_second, second);
    // The bound is not loose by more than the rounding allowance.
    EXPECT_LE(b.tail_first, first * std::exp(2e-3) + 1e-300);
  }
}

TEST(TotalEpsTest, DivergentConfigurationFlagged) {
  StreamParams p = reference_params();
  p.c = 0.0;
  const StreamBudget b = total_eps(p, 10);
  EXPECT_TRUE(b.divergent);
  EXPECT_EQ(b.eps_total, 1.0);
}

TEST(PlanTest, ReferenceConstantsReachOneInABillion) {
  const PlanResult r = plan(1e-9, 1e-3, 1e-2, 1e-3, 0.0);
  EXPECT_LE(total_eps(r.params, 200).eps_total, 1e-9);
  EXPECT_GT(r.params.rate_rho * static_cast<double>(r.params.n0), 2.0 * static_cast<double>(r.params.ell));
  EXPECT_EQ(r.params.ell, 256u);
  EXPECT_NEAR(total_eps(r.params, 200).eps_total, total_eps(r.params, 400).eps_total, 1e-12);
}

TEST(PlanTest, Deterministic) {
  const PlanResult a = plan(1e-6, 1e-3, 1e-2, 1e-3, 0.0);
  const PlanResult b = plan(1e-6, 1e-3, 1e-2, 1e-3, 0.0);
  EXPECT_EQ(to_json(a.params).dump(), to_json(b.params).dump());
}

TEST(PlanTest, TighterTargetNeverLowersN0) {
  std::uint64_t prev = 0;
  for (double t : {1e-3, 1e-6, 1e-9, 1e-12, 1e-20}) {
    const PlanResult r = plan(t, 1e-3, 1e-2, 1e-3, 0.0);
    EXPECT_GE(r.params.n0, prev) << t;
    EXPECT_LE(r.budget.eps_total, t);
    prev = r.params.n0;
  }
}

TEST(PlanTest, RejectsTargetAtOrBelowEps0) {
  EXPECT_THROW(plan(1e-9, 1e-3, 1e-2, 1e-3, 1e-9), std::invalid_argument);
  EXPECT_THROW(plan(1e-9, 1e-3, 1e-2, 1e-3, 1e-6), std::invalid_argument);
}

TEST(PlanTest, UnreachableTargetReportsBest) {
  PlanOptions opt;
  opt.c_grid = {1.0};
  opt.max_n0 = 60000;
  opt.max_ell0 = 1000;
  try {
    plan(1e-9, 1e-3, 1e-2, 1e-3, 0.0, opt);
    FAIL() << "expected PlanError";
  } catch (const PlanError& e) {
    EXPECT_GT(e.best_budget().eps_total, 1e-9);
  }
}

TEST(SimulateTest, NoAbortsEmitsExactStream) {
  StreamParams p = reference_params();
  p.c = 10;
  std::mt19937_64 rng(1);
  const SimulationResult r = simulate_stream(p, {0.0}, {10}, rng);
  EXPECT_EQ(r.stream.size(), 10 * p.ell);
  EXPECT_EQ(r.bits_emitted, 10 * p.ell);
  EXPECT_EQ(r.retries, 0u);
  EXPECT_EQ(r.bits_stored, static_cast<std::uint64_t>(schedule_ell(p, 10)));
}

TEST(SimulateTest, EachRoundConsumesPreviousStore) {
  StreamParams p = reference_params();
  p.c = 100;
  std::mt19937_64 rng(2);
  const SimulationResult r = simulate_stream(p, {0.0}, {5}, rng);
  EXPECT_EQ(r.log[0].consumed, p.ell0);
  for (std::size_t k = 1; k < r.log.size(); ++k) {
    EXPECT_EQ(r.log[k].consumed, r.log[k - 1].stored_after);
  }
}

TEST(SimulateTest, RetryCountMatchesGeometricLaw) {
  StreamParams p = reference_params();
  std::mt19937_64 rng(3);
  SimulationOptions opt;
  opt.rounds = 10000;
  opt.keep_stream = false;
  const SimulationResult r = simulate_stream(p, {0.1}, opt, rng);
  const double mean = 10000.0 / 9.0;
  const double sd = std::sqrt(10000.0 * 0.1 / 0.81);
  EXPECT_LE(std::abs(static_cast<double>(r.retries) - mean), 3.0 * sd);
  EXPECT_EQ(r.attempts, r.retries + 10000);
}

TEST(SimulateTest, LedgerHoldsUnderFuzzing) {
  std::mt19937_64 meta(77);
  for (int k = 0; k < 40; ++k) {
    StreamParams p = reference_params();
    p.c = std::uniform_real_distribution<double>(0.5, 5e4)(meta);
    p.ell = 1 + meta() % 512;
    p.ell0 = 1 + meta() % 5000;
    const double abort = std::uniform_real_distribution<double>(0.0, 0.6)(meta);
    std::mt19937_64 rng(meta());
    const SimulationResult r = simulate_stream(p, {abort}, {200, AuthCharging::kOncePerRound, 0, false}, rng);
    EXPECT_EQ(r.bits_emitted + r.bits_stored + r.bits_consumed, r.bits_produced + r.initial_bits);
  }
}

TEST(SimulateTest, PerAttemptChargingNeedsReserve) {
  StreamParams p = reference_params();
  std::mt19937_64 rng(5);
  EXPECT_THROW(simulate_stream(p, {0.5}, {100, AuthCharging::kPerAttempt, 0, false}, rng), StreamUnderflow);
  std::mt19937_64 rng2(5);
  const SimulationResult r =
      simulate_stream(p, {0.5}, {3, AuthCharging::kPerAttempt, 1'000'000'000, false}, rng2);
  EXPECT_EQ(r.bits_emitted + r.bits_stored + r.bits_consumed, r.bits_produced + r.initial_bits);
  // Every attempt, retries included, paid for authentication.
  std::uint64_t charged = 0;
  for (const auto& e : r.log) charged += e.attempts;
  EXPECT_EQ(charged, r.attempts);
  EXPECT_GT(r.bits_consumed, 3 * std::min(p.ell0, p.ell));
}

TEST(SimulateTest, RejectsBadAbortProbability) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(simulate_stream(reference_params(), {1.0}, {1}, rng), std::invalid_argument);
}

TEST(ExportTest, CsvHasHeaderAndRows) {
  const auto rec = schedule(reference_params(), 50);
  const std::string csv = schedule_csv(rec);
  std::size_t lines = 0;
  for (std::size_t pos = 0; (pos = csv.find("\r\n", pos)) != std::string::npos; pos += 2) ++lines;
  EXPECT_EQ(lines, 51u);
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "i,n_i,ell_i,eps_i,cumulative_eps");
}

TEST(ExportTest, ParamsJsonRoundTrip) {
  const StreamParams p = reference_params();
  EXPECT_EQ(to_json(stream_params_from_json(to_json(p))).dump(), to_json(p).dump());
  Json broken = to_json(p);
  broken.erase("nu");
  EXPECT_THROW(stream_params_from_json(broken), SchemaError);
}

}  // namespace
}  // namespace qkdlab
