// ε-correctness, ε-robustness and a two-sided bracket on ε-secrecy, plus
// accessible-information lower bounds and the sufficiency bound that turns a
// small accessible information into composable security.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkdlab/quantum_core.hpp"
#include "qkdlab/serialization.hpp"

namespace qkdlab {

/// (1 − p_⊥) Σ_s 2^{−ℓ} |s⟩⟨s| ⊗ ρ' + p_⊥ |⊥⟩⟨⊥| ⊗ ρ''.
struct IdealForm {
  double p_perp;
  DensityOperator rho_prime;
  DensityOperator rho_dblprime;
};

struct CorrectnessEstimate {
  std::size_t samples = 0;
  std::size_t mismatches = 0;
  double empirical = 0.0;
  /// One-sided 99% Clopper–Pearson upper bound on Pr[S_A ≠ S_B].
  double upper_99 = 0.0;
};

/// Exact Pr[S_A ≠ S_B]; x is S_A and z is S_B.
double correctness_eps(const JointDistribution& outcomes);
CorrectnessEstimate correctness_eps(std::span<const std::pair<KeyLabel, KeyLabel>> samples);

/// Pr[S_A = ⊥] under a passive adversary. The caller vouches for the noise
/// model; keys are label strings with "PERP" for ⊥.
double robustness_eps(const Distribution& passive_outcomes);

IdealForm canonical_ideal(const CqState& cq);

/// Materializes the ideal form as a cq-state over all 2^ℓ keys plus ⊥.
CqState ideal_state(const IdealForm& ideal, std::size_t key_len);

/// Trace distance to the canonical ideal. An upper bound on ε_s.
double secrecy_eps_upper(const CqState& cq);

/// A distinguisher that reads the classical key s, measures E with a POVM that
/// may depend on s, and accepts according to a rule on (s, outcome).
struct DistinguishingStrategy {
  std::string name;
  std::function<Povm(const KeyLabel&)> measurement;
  std::function<bool(const KeyLabel&, const std::string&)> accept;

  static DistinguishingStrategy fixed(
      std::string name, Povm povm, std::function<bool(const KeyLabel&, const std::string&)> accept);
};

struct StrategyAdvantage {
  std::string name;
  double real_accept = 0.0;
  double canonical_ideal_accept = 0.0;
  /// Range of the acceptance probability over every ideal state of the
  /// perfect form (any ρ', ρ'' and p_⊥).
  double ideal_accept_min = 0.0;
  double ideal_accept_max = 0.0;
  /// |real − canonical ideal|.
  double advantage_vs_canonical = 0.0;
  /// Advantage against the closest ideal state; a lower bound on ε_s.
  double certified = 0.0;
};

struct SecrecyLowerBound {
  double value = 0.0;
  std::string best_strategy;
  std::vector<StrategyAdvantage> strategies;
};

SecrecyLowerBound secrecy_eps_lower(const CqState& cq,
                                    const std::vector<DistinguishingStrategy>& strategies);

/// Per-key Helstrom measurement against the canonical ideal.
DistinguishingStrategy helstrom_strategy(const CqState& cq);

/// For a key of n+1 bits and n qubits: measure qubit i in basis s_i and accept
/// iff the outcome parity equals s_{n+1}.
DistinguishingStrategy basis_parity_strategy(std::size_t qubits);

/// Helstrom always; basis parity when the shapes fit (key_len = qubits + 1).
std::vector<DistinguishingStrategy> default_strategies(const CqState& cq);

struct FamilySearch {
  std::string family;
  double best_bits = 0.0;
  std::size_t evaluations = 0;
  bool exhaustive = false;
  /// Best per-qubit angles (per_qubit family) for reproduction.
  std::vector<double> best_angles;
};

struct AccessibleInfoResult {
  double bits = 0.0;
  std::string best_family;
  std::vector<FamilySearch> families;
  std::size_t budget = 0;
  std::uint64_t seed = 0;

  const FamilySearch* family(const std::string& name) const;
};

/// Above this many strategies the per-qubit basis family is sampled rather
/// than enumerated.
inline constexpr std::size_t kPerQubitExhaustiveLimit = 243;

/// Best I(S_A : Z) found over: per-qubit products of standard, diagonal and
/// Breidbart bases (qubit registers only), seeded random rank-one POVMs, and
/// hill climbing on a measurement basis. Always a lower bound on I_acc.
AccessibleInfoResult accessible_info_lower(const CqState& cq, std::size_t search_budget,
                                           std::uint64_t seed,
                                           std::size_t max_dim = kDefaultDimensionCap);

/// I(S_A : Z) in bits for a fixed POVM; thin wrapper used by the search.
double measured_information(const CqState& cq, const Povm& m);

/// Smallest ε with iacc ≤ 2^{−(n+2)} ε², capped at 1.
double ben_or_sufficient_eps(double iacc_bits, std::size_t key_len);

/// min(1, ε_c + ε_s + ε_r).
double compose_report(double eps_c, double eps_s, double eps_r);

struct SecurityReport {
  double eps_correct = 0.0;
  double eps_robust = 0.0;
  double eps_secret_upper = 0.0;
  double eps_secret_lower = 0.0;
  double iacc_lower_bits = 0.0;
  double eps_total = 0.0;
  Json provenance;
};

struct SecurityInputs {
  std::optional<JointDistribution> outcomes;
  std::optional<Distribution> passive_outcomes;
  std::size_t search_budget = 64;
  std::uint64_t seed = 0;
};

/// ε_total composes ε_c, the secrecy upper bound and ε_r.
SecurityReport make_security_report(const CqState& cq, const SecurityInputs& inputs);

Json to_json(const SecurityReport& r);

}  // namespace qkdlab
