// Continuous key stream: each round authenticates with ℓ_{i−1} bits of the
// previous round's key and emits ℓ fresh bits plus ℓ_i bits kept for the next
// round. Per-round bounds, the growth schedule, total-ε summation with a
// closed-form tail, a parameter planner and a mock-source simulator.
//
// Logarithms are natural throughout: the ln n_i term sits next to e-base
// exponentials.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkdlab/serialization.hpp"

namespace qkdlab {

struct StreamParams {
  double gamma = 1e-3;
  double rate_rho = 1e-2;
  double nu = 1e-3;
  std::uint64_t n0 = 1;
  double c = 1.0;
  std::uint64_t ell = 256;
  std::uint64_t ell0 = 1;
  double eps0 = 0.0;
};

/// Throws std::invalid_argument unless every constant is finite and positive
/// (eps0 in [0, 1]).
void validate(const StreamParams& p);

/// kRounded takes ceilings of the schedule; kReal keeps n_i and ℓ_i real so the
/// first terms form an exact geometric progression.
enum class ScheduleMode { kRounded, kReal };

struct RoundRecord {
  std::uint64_t i = 0;
  double n_i = 0.0;
  double ell_i = 0.0;
  double eps_i = 0.0;
  double first_term = 0.0;
  double second_term = 0.0;
  /// Set when the unclamped bound exceeded 1.
  bool clamped = false;
};

struct RoundEps {
  double first_term = 0.0;
  double second_term = 0.0;
  double value = 0.0;
  bool clamped = false;
};

/// e^{−γ(ρ n_i − ℓ_i − ℓ)} + e^{−ν ℓ_{i−1} + ln n_i}, clamped to [0, 1].
RoundEps round_eps(const StreamParams& p, std::uint64_t i, double ell_prev, double n_i, double ell_i);

double schedule_n(const StreamParams& p, std::uint64_t i, ScheduleMode mode = ScheduleMode::kRounded);
double schedule_ell(const StreamParams& p, std::uint64_t i, ScheduleMode mode = ScheduleMode::kRounded);

std::vector<RoundRecord> schedule(const StreamParams& p, std::uint64_t rounds,
                                  ScheduleMode mode = ScheduleMode::kRounded);

struct StreamBudget {
  std::vector<RoundRecord> rounds;
  double partial_sum = 0.0;
  double tail_first = 0.0;
  double tail_second = 0.0;
  double tail_bound = 0.0;
  /// min(1, eps0 + partial_sum + tail_bound).
  double eps_total = 0.0;
  bool divergent = false;
  ScheduleMode mode = ScheduleMode::kRounded;
};

/// Sums rounds 1..horizon and bounds every later round in closed form. A
/// nonpositive decay rate (γcρ or νcρ) yields eps_total = 1 with `divergent`.
StreamBudget total_eps(const StreamParams& p, std::uint64_t horizon = 200,
                       ScheduleMode mode = ScheduleMode::kRounded);

struct PlanOptions {
  std::uint64_t ell = 256;
  std::uint64_t horizon = 200;
  std::uint64_t max_n0 = std::uint64_t{1} << 50;
  std::uint64_t max_ell0 = 10'000'000;
  /// Growth constants tried, ascending.
  std::vector<double> c_grid;
};

/// 1, 2, 5 per decade from 1 to 1e9.
std::vector<double> default_c_grid();

struct PlanResult {
  StreamParams params;
  StreamBudget budget;
  std::size_t configurations_tried = 0;
};

class PlanError : public std::runtime_error {
 public:
  PlanError(const std::string& what, StreamParams best, StreamBudget best_budget)
      : std::runtime_error(what), best_(best), best_budget_(std::move(best_budget)) {}
  const StreamParams& best() const { return best_; }
  const StreamBudget& best_budget() const { return best_budget_; }

 private:
  StreamParams best_;
  StreamBudget best_budget_;
};

/// Smallest n0 (then smallest c from the grid, then smallest ℓ_0) whose
/// rounded total_eps meets `target_eps`. n0 starts at the least value with
/// ρ n0 > 2ℓ, bisection finds n0 with ℓ_0 at its cap, and a second bisection
/// shrinks ℓ_0. Throws std::invalid_argument when target_eps ≤ eps0 and
/// PlanError when no grid point reaches the target.
PlanResult plan(double target_eps, double gamma, double rate_rho, double nu, double eps0,
                const PlanOptions& options = {});

/// Whether a round that aborts and is retried pays for authentication again.
enum class AuthCharging {
  kOncePerRound,  // ℓ_{i−1} is taken at the first attempt and reused by retries
  kPerAttempt,    // every attempt takes ℓ_{i−1}; retries draw on a reserve
};

struct MockKeySource {
  /// Probability that an attempt aborts; must be in [0, 1).
  double abort_prob = 0.0;
};

struct SimulationOptions {
  std::uint64_t rounds = 10;
  AuthCharging charging = AuthCharging::kOncePerRound;
  /// Extra initial key available to per-attempt charging.
  std::uint64_t reserve_bits = 0;
  /// Keep the emitted bits; counts are tracked either way.
  bool keep_stream = true;
};

struct SimRoundLog {
  std::uint64_t i = 0;
  std::uint64_t attempts = 0;
  std::uint64_t consumed = 0;
  std::uint64_t stored_after = 0;
  std::uint64_t emitted_total = 0;
};

struct SimulationResult {
  std::vector<SimRoundLog> log;
  std::vector<std::uint8_t> stream;
  std::uint64_t bits_emitted = 0;
  std::uint64_t bits_stored = 0;
  std::uint64_t bits_consumed = 0;
  std::uint64_t bits_produced = 0;
  std::uint64_t initial_bits = 0;
  std::uint64_t attempts = 0;
  std::uint64_t retries = 0;
};

/// Thrown when the store cannot pay for an attempt; signals broken accounting
/// or an exhausted reserve.
class StreamUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the mock stream on the rounded schedule. The conservation identity
/// emitted + stored + consumed = produced + initial is checked after every
/// round; a violation throws std::logic_error.
SimulationResult simulate_stream(const StreamParams& p, const MockKeySource& source,
                                 const SimulationOptions& options, std::mt19937_64& rng);

/// Columns i, n_i, ell_i, eps_i, cumulative_eps; CRLF line endings.
std::string schedule_csv(const std::vector<RoundRecord>& rounds);

Json to_json(const StreamParams& p);
StreamParams stream_params_from_json(const Json& j);
Json to_json(const StreamBudget& b, bool include_rounds = false);
Json to_json(const SimulationResult& r, bool include_log = false);

const char* to_string(ScheduleMode m);
const char* to_string(AuthCharging c);

}  // namespace qkdlab
