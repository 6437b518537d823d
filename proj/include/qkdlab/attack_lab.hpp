// The parity-encoded key whose accessible information is small but which
// leaks a message bit with certainty once used as a one-time pad.
//
// Key S = (S_1..S_{n+1}) is uniform; R = (R_1..R_n) is uniform subject to
// R_1 ⊕ … ⊕ R_n = S_{n+1}; qubit i of E holds |R_i⟩ in basis S_i.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qkdlab/quantum_core.hpp"
#include "qkdlab/serialization.hpp"

namespace qkdlab {

using Bits = std::vector<std::uint8_t>;

inline constexpr std::size_t kAttackMaxQubits = 7;

struct AttackState {
  std::size_t n = 0;
  CqState cq;
};

/// Builds ρ^s = 2^{−(n−1)} Σ_{r: ⊕r = s_{n+1}} |φ^{s,r}⟩⟨φ^{s,r}| for every s.
AttackState build_attack_state(std::size_t n, std::size_t max_qubits = kAttackMaxQubits);

/// |φ^{s,r}⟩ = ⊗_i |r_i⟩_{s_i}; s must have at least r.size() bits.
PureState attack_register(const Bits& s, const Bits& r);

struct MarginalCheck {
  bool pass = false;
  double max_deviation = 0.0;
};

/// For every prefix (s_1..s_n), ½ρ^{(s,0)} + ½ρ^{(s,1)} against I/2^n.
MarginalCheck fully_mixed_marginal_check(const AttackState& a, double tolerance = 1e-9);

enum class AdversaryBases {
  kFromCiphertext,  // Ŝ_i = M_i ⊕ C_i, the actual attack
  kComplement,      // 1 − Ŝ_i, control experiment
};

struct AttackTranscript {
  Bits s;
  Bits r;
  Bits message;
  Bits ciphertext;
  Bits recovered_key_prefix;
  Bits measured_r;
  std::uint8_t recovered_bit = 0;
  bool success = false;
};

/// One run: sample (s, r), prepare the register, encrypt `message` (n+1 bits)
/// with s, and let the adversary recover M_{n+1} from the ciphertext and E.
AttackTranscript run_otp_attack(std::size_t n, const Bits& message, std::mt19937_64& rng,
                                AdversaryBases bases = AdversaryBases::kFromCiphertext);

struct AttackTrialSummary {
  std::size_t trials = 0;
  std::size_t successes = 0;
  double success_rate() const {
    return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials);
  }
};

AttackTrialSummary run_otp_attack_trials(std::size_t n, const Bits& message, std::size_t trials,
                                         std::uint64_t seed,
                                         AdversaryBases bases = AdversaryBases::kFromCiphertext);

/// Projective measurement of one qubit of a pure register in the basis given
/// by the columns of `basis` (2×2 unitary). Collapses `state` and returns the
/// outcome index.
int measure_qubit(Vector& state, std::size_t qubit, std::size_t qubits, const Matrix& basis,
                  std::mt19937_64& rng);

struct GuessOracle {
  double p_star = 0.0;
  double angle = 0.0;
};

/// Best probability of guessing R_i from |R_i⟩_{S_i} with S_i, R_i uniform,
/// over projective qubit measurements: angle sweep then golden-section refinement.
GuessOracle single_qubit_guess_oracle(double sweep_step = 1e-4);

/// Guess probability for one fixed measurement angle.
double single_qubit_guess_probability(double angle);

struct ParityGuessPoint {
  std::size_t n = 0;
  double probability = 0.0;
};

/// ½(1 + (2p* − 1)^n) for n = 1..n_max.
std::vector<ParityGuessPoint> parity_guess_curve(std::size_t n_max);
std::vector<ParityGuessPoint> parity_guess_curve(std::size_t n_max, double p_star);

std::string parity_guess_csv(const std::vector<ParityGuessPoint>& curve);

struct SecrecyGapReport {
  std::size_t n = 0;
  double iacc_lower_bits = 0.0;
  double iacc_per_qubit_bits = 0.0;
  std::string iacc_best_family;
  bool per_qubit_exhaustive = false;
  double eps_secret_lower = 0.0;
  double eps_secret_upper = 0.0;
  double ben_or_required_iacc = 0.0;
  std::size_t search_budget = 0;
  std::uint64_t seed = 0;
};

SecrecyGapReport secrecy_gap_report(std::size_t n, std::size_t search_budget, std::uint64_t seed);
SecrecyGapReport secrecy_gap_report(const AttackState& state, std::size_t search_budget,
                                    std::uint64_t seed);

Json to_json(const SecrecyGapReport& r);
SecrecyGapReport secrecy_gap_from_json(const Json& j);

std::string bits_to_string(const Bits& b);
Bits bits_from_string(const std::string& s);

}  // namespace qkdlab
