#include "qkdlab/attack_lab.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "qkdlab/security_metrics.hpp"

namespace qkdlab {

namespace {

// Probabilities this close to 0 or 1 are rounding noise from 1/√2 amplitudes.
constexpr double kCertaintySnap = 1e-12;

Bits index_bits(std::uint64_t value, std::size_t width) {
  Bits out(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = (value >> (width - 1 - i)) & 1U;
  return out;
}

std::uint8_t parity(const Bits& b, std::size_t count) {
  std::uint8_t p = 0;
  for (std::size_t i = 0; i < count; ++i) p ^= b[i];
  return p;
}

const Matrix& basis_for(int s) {
  static const Matrix standard = qubit_basis(0.0);
  static const Matrix diagonal = qubit_basis(std::numbers::pi / 4.0);
  return s == 0 ? standard : diagonal;
}

}  // namespace

std::string bits_to_string(const Bits& b) {
  std::string s;
  for (auto v : b) s.push_back(v ? '1' : '0');
  return s;
}

Bits bits_from_string(const std::string& s) {
  Bits b;
  for (char c : s) {
    if (c != '0' && c != '1') throw std::invalid_argument("bits_from_string: invalid bit '" + std::string(1, c) + "'");
    b.push_back(c == '1');
  }
  return b;
}

PureState attack_register(const Bits& s, const Bits& r) {
  if (r.empty() || s.size() < r.size()) throw std::invalid_argument("attack_register: bad sizes");
  PureState psi = bb84_encode(r[0], s[0]);
  for (std::size_t i = 1; i < r.size(); ++i) psi = tensor(psi, bb84_encode(r[i], s[i]));
  return psi;
}

AttackState build_attack_state(std::size_t n, std::size_t max_qubits) {
  if (n < 2 || n > max_qubits) {
    throw std::invalid_argument("build_attack_state: n must be in [2, " + std::to_string(max_qubits) + "]");
  }
  const std::uint64_t keys = std::uint64_t{1} << (n + 1);
  const std::uint64_t registers = std::uint64_t{1} << n;
  const double weight = std::ldexp(1.0, -static_cast<int>(n - 1));
  const double key_prob = std::ldexp(1.0, -static_cast<int>(n + 1));

  std::vector<CqBranch> branches;
  branches.reserve(keys);
  for (std::uint64_t sv = 0; sv < keys; ++sv) {
    const Bits s = index_bits(sv, n + 1);
    std::vector<DensityOperator> terms;
    for (std::uint64_t rv = 0; rv < registers; ++rv) {
      const Bits r = index_bits(rv, n);
      if (parity(r, n) != s[n]) continue;
      terms.push_back(to_density(attack_register(s, r)));
    }
    std::vector<std::pair<double, const DensityOperator*>> weighted;
    for (const auto& t : terms) weighted.emplace_back(weight, &t);
    branches.push_back({KeyLabel::from_index(sv, n + 1), key_prob, mix(weighted)});
  }
  return AttackState{n, CqState(n + 1, std::move(branches))};
}

MarginalCheck fully_mixed_marginal_check(const AttackState& a, double tolerance) {
  MarginalCheck out;
  const std::size_t n = a.n;
  const auto d = static_cast<Eigen::Index>(std::size_t{1} << n);
  if (a.cq.dim() != static_cast<std::size_t>(d) || a.cq.key_len() != n + 1) {
    out.max_deviation = 1.0;
    return out;
  }
  const Matrix target = Matrix::Identity(d, d) / static_cast<double>(d);
  for (std::uint64_t prefix = 0; prefix < (std::uint64_t{1} << n); ++prefix) {
    const CqBranch* b0 = a.cq.find(KeyLabel::from_index(prefix << 1, n + 1));
    const CqBranch* b1 = a.cq.find(KeyLabel::from_index((prefix << 1) | 1U, n + 1));
    if (!b0 || !b1) {
      out.max_deviation = 1.0;
      return out;
    }
    const Matrix avg = 0.5 * (b0->rho.matrix() + b1->rho.matrix());
    out.max_deviation = std::max(out.max_deviation, (avg - target).cwiseAbs().maxCoeff());
  }
  out.pass = out.max_deviation <= tolerance;
  return out;
}

int measure_qubit(Vector& state, std::size_t qubit, std::size_t qubits, const Matrix& basis,
                  std::mt19937_64& rng) {
  if (qubit >= qubits || state.size() != (Eigen::Index{1} << qubits)) {
    throw std::invalid_argument("measure_qubit: qubit index or register size mismatch");
  }
  const Eigen::Index mask = Eigen::Index{1} << (qubits - 1 - qubit);
  double p0 = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    if (i & mask) continue;
    const Complex c0 = std::conj(basis(0, 0)) * state(i) + std::conj(basis(1, 0)) * state(i | mask);
    p0 += std::norm(c0);
  }
  if (p0 < kCertaintySnap) p0 = 0.0;
  if (p0 > 1.0 - kCertaintySnap) p0 = 1.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int outcome = u(rng) < p0 ? 0 : 1;
  const double p = outcome == 0 ? p0 : 1.0 - p0;
  const double scale = 1.0 / std::sqrt(p);
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    if (i & mask) continue;
    const Complex c = std::conj(basis(0, outcome)) * state(i) + std::conj(basis(1, outcome)) * state(i | mask);
    state(i) = c * basis(0, outcome) * scale;
    state(i | mask) = c * basis(1, outcome) * scale;
  }
  return outcome;
}

AttackTranscript run_otp_attack(std::size_t n, const Bits& message, std::mt19937_64& rng,
                                AdversaryBases bases) {
  if (n < 1) throw std::invalid_argument("run_otp_attack: need at least one qubit");
  if (message.size() != n + 1) {
    throw std::invalid_argument("run_otp_attack: message must have n+1 bits");
  }
  for (auto m : message) {
    if (m > 1) throw std::invalid_argument("run_otp_attack: message entries must be bits");
  }
  std::bernoulli_distribution coin(0.5);
  AttackTranscript t;
  t.message = message;
  t.s.resize(n + 1);
  for (auto& b : t.s) b = coin(rng);
  t.r.resize(n);
  for (std::size_t i = 0; i + 1 < n; ++i) t.r[i] = coin(rng);
  t.r[n - 1] = t.s[n] ^ parity(t.r, n - 1);

  Vector reg = attack_register(t.s, t.r).amplitudes();
  t.ciphertext.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t.ciphertext[i] = t.message[i] ^ t.s[i];

  t.recovered_key_prefix.resize(n);
  t.measured_r.resize(n);
  std::uint8_t key_parity = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t.recovered_key_prefix[i] = t.message[i] ^ t.ciphertext[i];
    const int basis = bases == AdversaryBases::kFromCiphertext ? t.recovered_key_prefix[i]
                                                               : 1 - t.recovered_key_prefix[i];
    t.measured_r[i] = static_cast<std::uint8_t>(measure_qubit(reg, i, n, basis_for(basis), rng));
    key_parity ^= t.measured_r[i];
  }
  t.recovered_bit = key_parity ^ t.ciphertext[n];
  t.success = t.recovered_bit == t.message[n];
  return t;
}

AttackTrialSummary run_otp_attack_trials(std::size_t n, const Bits& message, std::size_t trials,
                                         std::uint64_t seed, AdversaryBases bases) {
  std::mt19937_64 rng(seed);
  AttackTrialSummary out;
  for (std::size_t k = 0; k < trials; ++k) {
    if (run_otp_attack(n, message, rng, bases).success) ++out.successes;
    ++out.trials;
  }
  return out;
}

double single_qubit_guess_probability(double angle) {
  const Povm m = Povm::projective(qubit_basis(angle), 1);
  double p = 0.0;
  for (int s = 0; s < 2; ++s) {
    for (int r = 0; r < 2; ++r) {
      const Distribution d = measure(to_density(bb84_encode(r, s)), m);
      p += 0.25 * d.at(r == 0 ? "0" : "1");
    }
  }
  return p;
}

GuessOracle single_qubit_guess_oracle(double sweep_step) {
  if (!(sweep_step > 0.0) || sweep_step > 1e-4) {
    throw std::invalid_argument("single_qubit_guess_oracle: sweep step must be in (0, 1e-4]");
  }
  GuessOracle best{single_qubit_guess_probability(0.0), 0.0};
  const auto steps = static_cast<std::size_t>(std::ceil(std::numbers::pi / sweep_step));
  for (std::size_t k = 1; k < steps; ++k) {
    const double angle = static_cast<double>(k) * sweep_step;
    const double p = single_qubit_guess_probability(angle);
    if (p > best.p_star) best = {p, angle};
  }
  // Golden-section refinement around the sweep maximum.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best.angle - sweep_step;
  double hi = best.angle + sweep_step;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = single_qubit_guess_probability(x1);
  double f2 = single_qubit_guess_probability(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = single_qubit_guess_probability(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = single_qubit_guess_probability(x1);
    }
  }
  const double angle = 0.5 * (lo + hi);
  const double p = single_qubit_guess_probability(angle);
  if (p >= best.p_star) best = {p, angle};
  return best;
}

std::vector<ParityGuessPoint> parity_guess_curve(std::size_t n_max, double p_star) {
  if (n_max < 1 || n_max > 16) throw std::invalid_argument("parity_guess_curve: n_max must be in [1, 16]");
  std::vector<ParityGuessPoint> out;
  for (std::size_t n = 1; n <= n_max; ++n) {
    out.push_back({n, 0.5 * (1.0 + std::pow(2.0 * p_star - 1.0, static_cast<double>(n)))});
  }
  return out;
}

std::vector<ParityGuessPoint> parity_guess_curve(std::size_t n_max) {
  return parity_guess_curve(n_max, single_qubit_guess_oracle().p_star);
}

std::string parity_guess_csv(const std::vector<ParityGuessPoint>& curve) {
  std::string out = "n,probability\r\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\r\n", p.n, p.probability);
    out += buf;
  }
  return out;
}

SecrecyGapReport secrecy_gap_report(const AttackState& state, std::size_t search_budget,
                                    std::uint64_t seed) {
  SecrecyGapReport r;
  r.n = state.n;
  r.search_budget = search_budget;
  r.seed = seed;
  const AccessibleInfoResult iacc = accessible_info_lower(state.cq, search_budget, seed);
  r.iacc_lower_bits = iacc.bits;
  r.iacc_best_family = iacc.best_family;
  if (const FamilySearch* f = iacc.family("per_qubit")) {
    r.iacc_per_qubit_bits = f->best_bits;
    r.per_qubit_exhaustive = f->exhaustive;
  }
  r.eps_secret_lower = secrecy_eps_lower(state.cq, {basis_parity_strategy(state.n)}).value;
  r.eps_secret_upper = secrecy_eps_upper(state.cq);
  r.ben_or_required_iacc = std::ldexp(1.0, -static_cast<int>(state.n + 3));
  return r;
}

SecrecyGapReport secrecy_gap_report(std::size_t n, std::size_t search_budget, std::uint64_t seed) {
  return secrecy_gap_report(build_attack_state(n), search_budget, seed);
}

Json to_json(const SecrecyGapReport& r) {
  return Json{{"n", r.n},
              {"iacc_lower_bits", r.iacc_lower_bits},
              {"iacc_per_qubit_bits", r.iacc_per_qubit_bits},
              {"iacc_best_family", r.iacc_best_family},
              {"per_qubit_exhaustive", r.per_qubit_exhaustive},
              {"eps_secret_lower", r.eps_secret_lower},
              {"eps_secret_upper", r.eps_secret_upper},
              {"ben_or_required_iacc", r.ben_or_required_iacc},
              {"search_budget", r.search_budget},
              {"seed", r.seed}};
}

SecrecyGapReport secrecy_gap_from_json(const Json& j) {
  SecrecyGapReport r;
  r.n = j.at("n").get<std::size_t>();
  r.iacc_lower_bits = j.at("iacc_lower_bits").get<double>();
  r.iacc_per_qubit_bits = j.at("iacc_per_qubit_bits").get<double>();
  r.iacc_best_family = j.at("iacc_best_family").get<std::string>();
  r.per_qubit_exhaustive = j.at("per_qubit_exhaustive").get<bool>();
  r.eps_secret_lower = j.at("eps_secret_lower").get<double>();
  r.eps_secret_upper = j.at("eps_secret_upper").get<double>();
  r.ben_or_required_iacc = j.at("ben_or_required_iacc").get<double>();
  r.search_budget = j.at("search_budget").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace qkdlab
