// Empirical check of sequential composition: a key source and an application
// that consumes its key, each with a real and an ideal version, and
// distinguishers that see the classical outputs and the adversary's view.
//
// Distinguishers here are classical. A quantum key source enters through the
// measurement its adversary performs, which turns E into classical bits.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qkdlab/attack_lab.hpp"
#include "qkdlab/serialization.hpp"

namespace qkdlab {

/// What a distinguisher gets to see from one run.
struct View {
  Bits outputs;
  Bits adversary;

  bool operator==(const View&) const = default;
  auto operator<=>(const View&) const = default;
};

using ViewDistribution = std::map<View, double>;
using RunFn = std::function<View(std::mt19937_64&)>;

struct ProtocolPair {
  std::string name;
  RunFn real_run;
  RunFn ideal_run;
  /// Explicit distributions enable exact enumeration.
  std::optional<ViewDistribution> real_exact;
  std::optional<ViewDistribution> ideal_exact;
  double declared_eps = 0.0;
  /// Length of `outputs`; for key sources this is the key length.
  std::size_t output_bits = 0;
};

/// An application that takes the key from a key source's outputs. Both
/// versions see the source view and return the composed view.
struct KeyedApplication {
  std::string name;
  std::size_t key_bits = 0;
  std::function<View(const View& source, std::mt19937_64&)> real;
  std::function<View(const View& source, std::mt19937_64&)> ideal;
  std::function<ViewDistribution(const View& source)> real_exact;
  std::function<ViewDistribution(const View& source)> ideal_exact;
  double declared_eps = 0.0;
};

struct DistinguisherDef {
  std::string name;
  std::function<bool(const View&)> decision;
};

struct AdvantageEstimate {
  /// Pr[B=1 | real] − Pr[B=1 | ideal].
  double point = 0.0;
  double half_width_99 = 0.0;
  std::size_t trials = 0;
  double real_accept = 0.0;
  double ideal_accept = 0.0;
  bool exact = false;
  bool hoeffding = false;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinTrials = 100;
/// Upper limit on enumerated composed outcomes.
inline constexpr std::size_t kEnumerationCap = std::size_t{1} << 24;

/// Monte-Carlo difference of acceptance frequencies with a 99% half-width, or
/// the exact difference when `enumerate` is set (requires both explicit
/// distributions; half-width 0).
AdvantageEstimate estimate_advantage(const ProtocolPair& pair, const DistinguisherDef& d,
                                     std::size_t trials, std::uint64_t seed, bool enumerate = false);

/// z_{0.995} √(p̂(1−p̂)(1/t_r + 1/t_i)) with the pooled p̂; the two-sample
/// Hoeffding radius when either side expects fewer than 10 of either outcome.
double half_width_99(std::size_t accepted_real, std::size_t trials_real, std::size_t accepted_ideal,
                     std::size_t trials_ideal, bool* used_hoeffding = nullptr);

/// (A^real∘P^real, A^ideal∘P^ideal) with declared ε = min(1, ε_app + ε_source).
ProtocolPair compose(const KeyedApplication& app, const ProtocolPair& source);

/// The two pairs of the telescope: (A^real∘P^real, A^real∘P^ideal) and
/// (A^real∘P^ideal, A^ideal∘P^ideal).
ProtocolPair hybrid_source_gap(const KeyedApplication& app, const ProtocolPair& source);
ProtocolPair hybrid_app_gap(const KeyedApplication& app, const ProtocolPair& source);

/// Real: C = M ⊕ K. Ideal: C uniform and independent of M. The composed view
/// has outputs = M and adversary = (source adversary view, C). Enumeration is
/// available for up to 20 message bits.
KeyedApplication otp_application(const Bits& message);

/// Uniform key in both worlds, empty adversary view.
ProtocolPair perfect_key_source(std::size_t bits);

/// Real key bits are i.i.d. with Pr[1] = ½ + δ; the ideal key is uniform. The
/// declared ε is the exact total variation between the two key laws.
ProtocolPair biased_key_source(std::size_t bits, double delta);

/// The parity-encoded key of attack_lab (n+1 bits). The adversary measures
/// qubit i in basis Ŝ_i = M_i ⊕ C_i; with the known prefix this is S_i, so the
/// real view carries the outcomes of measuring the register in basis s. In
/// the ideal world E is I/2^n and the outcomes are uniform.
ProtocolPair attack_key_source(std::size_t n, double declared_eps);

/// Accept iff the majority of C ⊕ M is 1 (ties reject).
DistinguisherDef majority_distinguisher();
/// Accept iff C_1 ⊕ M_1 = 1.
DistinguisherDef first_bit_distinguisher();
/// For the attack source: accept iff ⊕r̂ ⊕ C_{n+1} = M_{n+1}.
DistinguisherDef parity_distinguisher(std::size_t n);

double accept_probability(const ViewDistribution& dist, const DistinguisherDef& d);
double total_variation(const ViewDistribution& a, const ViewDistribution& b);

struct DistinguisherReport {
  std::string name;
  AdvantageEstimate total;
  AdvantageEstimate source_gap;
  AdvantageEstimate app_gap;
  /// total − (source_gap + app_gap); exactly the rounding error in enumeration mode.
  double telescope_residual = 0.0;
  bool within_bound = false;
};

struct CompositionReport {
  std::string app;
  std::string source;
  double eps_app = 0.0;
  double eps_source = 0.0;
  double declared_eps = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  bool enumerate = false;
  std::vector<DistinguisherReport> distinguishers;
  /// Every |total advantage| ≤ declared ε + half-width (1e-12 when enumerating).
  bool pass = false;
};

CompositionReport verify_composition_bound(const KeyedApplication& app, const ProtocolPair& source,
                                           const std::vector<DistinguisherDef>& distinguishers,
                                           std::size_t trials, std::uint64_t seed,
                                           bool enumerate = false);

Json to_json(const AdvantageEstimate& e);
Json to_json(const CompositionReport& r);

}  // namespace qkdlab
