#include "qkdlab/security_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/beta.hpp>

namespace qkdlab {

namespace {

constexpr std::size_t kMaxEnumeratedKeyLen = 16;

std::size_t qubit_count(std::size_t dim) {
  std::size_t n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  return (std::size_t{1} << n) == dim ? n : 0;
}

void require_enumerable(std::size_t key_len, const char* what) {
  if (key_len > kMaxEnumeratedKeyLen) {
    throw std::invalid_argument(std::string(what) + ": key length " + std::to_string(key_len) +
                                " too large to enumerate");
  }
}

Matrix positive_part_projector(const Matrix& delta) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(delta);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  const auto d = delta.rows();
  Matrix p = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (es.eigenvalues()(k) > 1e-12 * scale) {
      p += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
    }
  }
  return p;
}

Matrix acceptance_operator(const Povm& m, const std::vector<bool>& accept) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  if (m.is_rank_one()) {
    Eigen::VectorXcd w(static_cast<Eigen::Index>(accept.size()));
    for (std::size_t k = 0; k < accept.size(); ++k) w(static_cast<Eigen::Index>(k)) = accept[k] ? 1.0 : 0.0;
    return m.vectors() * w.asDiagonal() * m.vectors().adjoint();
  }
  Matrix a = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < accept.size(); ++k) {
    if (accept[k]) a += m.effect(k);
  }
  return a;
}

std::pair<double, double> eigen_range(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double xlog2x_sum(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

// I(S_A : Z) without going through string-keyed tables.
double information_for(const CqState& cq, const Povm& m) {
  std::vector<double> px;
  std::vector<double> pz(m.size(), 0.0);
  double hxz = 0.0;
  for (const auto& br : cq.branches()) {
    px.push_back(br.probability);
    if (br.probability <= 0.0) continue;
    const auto probs = m.probabilities(br.rho.matrix());
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const double v = br.probability * probs[k];
      pz[k] += v;
      if (v > 0.0) hxz -= v * std::log2(v);
    }
  }
  return std::max(0.0, xlog2x_sum(px) + xlog2x_sum(pz) - hxz);
}

Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = Complex(g(rng), g(rng));
  }
  return w;
}

Matrix haar_unitary(Eigen::Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_gaussian(d, d, rng));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Complex diag = r(k, k);
    if (std::abs(diag) > 0.0) q.col(k) *= diag / std::abs(diag);
  }
  return q;
}

// W (d×K) → S^{-1/2} W with S = W W†, which is a rank-one POVM.
Matrix random_rank_one_povm(Eigen::Index d, Eigen::Index outcomes, std::mt19937_64& rng) {
  const Matrix w = random_gaussian(d, outcomes, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(w * w.adjoint());
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Matrix s_inv_sqrt =
      es.eigenvectors() * inv_sqrt.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return s_inv_sqrt * w;
}

Matrix unitary_step(Eigen::Index d, double step, std::mt19937_64& rng) {
  Matrix h = random_gaussian(d, d, rng);
  h = 0.5 * (h + h.adjoint());
  h /= h.norm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Eigen::VectorXcd phases(d);
  for (Eigen::Index k = 0; k < d; ++k) phases(k) = std::polar(1.0, step * es.eigenvalues()(k));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

std::vector<std::string> decimal_labels(std::size_t k) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < k; ++i) labels.push_back(std::to_string(i));
  return labels;
}

}  // namespace

// ---------------------------------------------------------------------------

double correctness_eps(const JointDistribution& outcomes) {
  double p = 0.0;
  for (const auto& [k, v] : outcomes.table()) {
    if (k.first != k.second) p += v;
  }
  return std::clamp(p, 0.0, 1.0);
}

CorrectnessEstimate correctness_eps(std::span<const std::pair<KeyLabel, KeyLabel>> samples) {
  if (samples.empty()) throw std::invalid_argument("correctness_eps: empty sample set");
  CorrectnessEstimate est;
  est.samples = samples.size();
  for (const auto& [a, b] : samples) {
    if (!(a == b)) ++est.mismatches;
  }
  const auto n = static_cast<double>(est.samples);
  const auto k = static_cast<double>(est.mismatches);
  est.empirical = k / n;
  est.upper_99 = est.mismatches == est.samples ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 0.99);
  return est;
}

double robustness_eps(const Distribution& passive_outcomes) {
  double total = 0.0;
  for (const auto& [_, v] : passive_outcomes) {
    if (v < 0.0) throw std::invalid_argument("robustness_eps: negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > kOperatorTolerance) {
    throw std::invalid_argument("robustness_eps: probabilities do not sum to 1");
  }
  auto it = passive_outcomes.find("PERP");
  return it == passive_outcomes.end() ? 0.0 : std::clamp(it->second / total, 0.0, 1.0);
}

IdealForm canonical_ideal(const CqState& cq) {
  const double p_perp = cq.perp_probability();
  const std::size_t dim = cq.dim();
  std::vector<std::pair<double, const DensityOperator*>> keyed;
  for (const auto& br : cq.branches()) {
    if (!br.label.is_perp() && br.probability > 0.0) {
      keyed.emplace_back(br.probability / (1.0 - p_perp), &br.rho);
    }
  }
  DensityOperator rho_prime =
      keyed.empty() ? DensityOperator::maximally_mixed(dim) : mix(keyed);
  const CqBranch* perp = cq.find(KeyLabel::perp());
  DensityOperator rho_dblprime = (perp && perp->probability > 0.0)
                                     ? perp->rho
                                     : DensityOperator::maximally_mixed(dim);
  return IdealForm{p_perp, std::move(rho_prime), std::move(rho_dblprime)};
}

CqState ideal_state(const IdealForm& ideal, std::size_t key_len) {
  require_enumerable(key_len, "ideal_state");
  if (ideal.p_perp < 0.0 || ideal.p_perp > 1.0) {
    throw std::invalid_argument("ideal_state: p_perp outside [0,1]");
  }
  const std::uint64_t keys = std::uint64_t{1} << key_len;
  const double q = (1.0 - ideal.p_perp) / static_cast<double>(keys);
  std::vector<CqBranch> branches;
  branches.reserve(keys + 1);
  for (std::uint64_t s = 0; s < keys; ++s) {
    branches.push_back({KeyLabel::from_index(s, key_len), q, ideal.rho_prime});
  }
  branches.push_back({KeyLabel::perp(), ideal.p_perp, ideal.rho_dblprime});
  return CqState(key_len, std::move(branches));
}

double secrecy_eps_upper(const CqState& cq) {
  const IdealForm ideal = canonical_ideal(cq);
  const double keys = std::ldexp(1.0, static_cast<int>(cq.key_len()));
  const double q = (1.0 - ideal.p_perp) / keys;
  double total = 0.0;
  double present = 0.0;
  for (const auto& br : cq.branches()) {
    if (br.label.is_perp()) {
      total += 0.5 * hermitian_trace_norm(br.probability * (br.rho.matrix() - ideal.rho_dblprime.matrix()));
    } else {
      present += 1.0;
      total += 0.5 * hermitian_trace_norm(br.probability * br.rho.matrix() - q * ideal.rho_prime.matrix());
    }
  }
  total += 0.5 * q * (keys - present);
  return std::clamp(total, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Distinguishers

DistinguishingStrategy DistinguishingStrategy::fixed(
    std::string name, Povm povm, std::function<bool(const KeyLabel&, const std::string&)> accept) {
  auto shared = std::make_shared<const Povm>(std::move(povm));
  return DistinguishingStrategy{std::move(name),
                                [shared](const KeyLabel&) { return *shared; },
                                std::move(accept)};
}

SecrecyLowerBound secrecy_eps_lower(const CqState& cq,
                                    const std::vector<DistinguishingStrategy>& strategies) {
  if (strategies.empty()) throw std::invalid_argument("secrecy_eps_lower: no strategies");
  require_enumerable(cq.key_len(), "secrecy_eps_lower");
  const IdealForm ideal = canonical_ideal(cq);
  const auto d = static_cast<Eigen::Index>(cq.dim());
  const std::uint64_t keys = std::uint64_t{1} << cq.key_len();

  SecrecyLowerBound out;
  for (const auto& strategy : strategies) {
    StrategyAdvantage adv;
    adv.name = strategy.name;
    Matrix average = Matrix::Zero(d, d);
    auto visit = [&](const KeyLabel& label) -> Matrix {
      const Povm m = strategy.measurement(label);
      if (m.dim() != cq.dim()) {
        throw std::invalid_argument("secrecy_eps_lower: strategy '" + strategy.name +
                                    "' measurement has wrong dimension");
      }
      std::vector<bool> accept(m.size());
      for (std::size_t k = 0; k < m.size(); ++k) accept[k] = strategy.accept(label, m.labels()[k]);
      if (const CqBranch* br = cq.find(label); br && br->probability > 0.0) {
        const auto probs = m.probabilities(br->rho.matrix());
        for (std::size_t k = 0; k < probs.size(); ++k) {
          if (accept[k]) adv.real_accept += br->probability * probs[k];
        }
      }
      return acceptance_operator(m, accept);
    };
    for (std::uint64_t s = 0; s < keys; ++s) {
      average += visit(KeyLabel::from_index(s, cq.key_len()));
    }
    average /= static_cast<double>(keys);
    const Matrix perp_op = visit(KeyLabel::perp());

    adv.canonical_ideal_accept =
        (1.0 - ideal.p_perp) * (average * ideal.rho_prime.matrix()).trace().real() +
        ideal.p_perp * (perp_op * ideal.rho_dblprime.matrix()).trace().real();
    const auto [key_min, key_max] = eigen_range(average);
    const auto [perp_min, perp_max] = eigen_range(perp_op);
    adv.ideal_accept_min = std::min(key_min, perp_min);
    adv.ideal_accept_max = std::max(key_max, perp_max);
    adv.advantage_vs_canonical = std::abs(adv.real_accept - adv.canonical_ideal_accept);
    adv.certified = std::clamp(std::max({0.0, adv.real_accept - adv.ideal_accept_max,
                                         adv.ideal_accept_min - adv.real_accept}),
                               0.0, 1.0);
    if (out.strategies.empty() || adv.certified > out.value) {
      out.value = adv.certified;
      out.best_strategy = adv.name;
    }
    out.strategies.push_back(std::move(adv));
  }
  return out;
}

DistinguishingStrategy helstrom_strategy(const CqState& cq) {
  auto state = std::make_shared<const CqState>(cq);
  auto ideal = std::make_shared<const IdealForm>(canonical_ideal(cq));
  const double q = (1.0 - ideal->p_perp) / std::ldexp(1.0, static_cast<int>(cq.key_len()));
  auto measurement = [state, ideal, q](const KeyLabel& label) {
    const auto d = static_cast<Eigen::Index>(state->dim());
    const CqBranch* br = state->find(label);
    const Matrix real_part = br ? Matrix(br->probability * br->rho.matrix()) : Matrix::Zero(d, d);
    const Matrix ideal_part = label.is_perp() ? Matrix(ideal->p_perp * ideal->rho_dblprime.matrix())
                                              : Matrix(q * ideal->rho_prime.matrix());
    const Matrix p = positive_part_projector(real_part - ideal_part);
    return Povm::from_effects({"1", "0"}, {p, Matrix::Identity(d, d) - p});
  };
  return DistinguishingStrategy{"helstrom", std::move(measurement),
                                [](const KeyLabel&, const std::string& z) { return z == "1"; }};
}

DistinguishingStrategy basis_parity_strategy(std::size_t qubits) {
  if (qubits == 0) throw std::invalid_argument("basis_parity_strategy: need at least one qubit");
  auto measurement = [qubits](const KeyLabel& label) {
    if (label.is_perp()) return Povm::computational(std::size_t{1} << qubits);
    std::vector<double> thetas(qubits);
    for (std::size_t i = 0; i < qubits; ++i) {
      thetas[i] = label.bit(i) == 1 ? std::numbers::pi / 4.0 : 0.0;
    }
    return Povm::projective(product_basis(thetas), qubits);
  };
  auto accept = [qubits](const KeyLabel& label, const std::string& z) {
    if (label.is_perp()) return false;
    int parity = 0;
    for (char c : z) parity ^= (c == '1');
    return parity == label.bit(qubits);
  };
  return DistinguishingStrategy{"basis_parity", std::move(measurement), std::move(accept)};
}

std::vector<DistinguishingStrategy> default_strategies(const CqState& cq) {
  std::vector<DistinguishingStrategy> out{helstrom_strategy(cq)};
  const std::size_t n = qubit_count(cq.dim());
  if (n > 0 && cq.key_len() == n + 1) out.push_back(basis_parity_strategy(n));
  return out;
}

// ---------------------------------------------------------------------------
// Accessible information

const FamilySearch* AccessibleInfoResult::family(const std::string& name) const {
  for (const auto& f : families) {
    if (f.family == name) return &f;
  }
  return nullptr;
}

double measured_information(const CqState& cq, const Povm& m) { return information_for(cq, m); }

AccessibleInfoResult accessible_info_lower(const CqState& cq, std::size_t search_budget,
                                           std::uint64_t seed, std::size_t max_dim) {
  if (search_budget == 0) throw std::invalid_argument("accessible_info_lower: budget must be positive");
  if (cq.dim() > max_dim) throw std::invalid_argument("accessible_info_lower: dimension above cap");

  AccessibleInfoResult result;
  result.budget = search_budget;
  result.seed = seed;
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(cq.dim());

  Matrix best_basis = Matrix::Identity(d, d);
  double best_basis_bits = -1.0;
  auto consider_basis = [&](const Matrix& basis, double bits) {
    if (bits > best_basis_bits) {
      best_basis_bits = bits;
      best_basis = basis;
    }
  };

  // (a) products of standard / diagonal / Breidbart bases on each qubit.
  if (const std::size_t n = qubit_count(cq.dim()); n > 0) {
    static constexpr double kAngles[3] = {0.0, std::numbers::pi / 4.0, std::numbers::pi / 8.0};
    FamilySearch fam{"per_qubit", 0.0, 0, false, {}};
    std::size_t total = 1;
    for (std::size_t i = 0; i < n && total <= kPerQubitExhaustiveLimit; ++i) total *= 3;
    fam.exhaustive = total <= kPerQubitExhaustiveLimit;
    const std::size_t runs = fam.exhaustive ? total : search_budget;
    std::uniform_int_distribution<int> pick(0, 2);
    for (std::size_t run = 0; run < runs; ++run) {
      std::vector<double> thetas(n);
      std::size_t code = run;
      for (std::size_t i = 0; i < n; ++i) {
        thetas[i] = fam.exhaustive ? kAngles[code % 3] : kAngles[pick(rng)];
        code /= 3;
      }
      const Matrix basis = product_basis(thetas);
      const double bits = information_for(cq, Povm::projective(basis, n));
      ++fam.evaluations;
      consider_basis(basis, bits);
      if (bits > fam.best_bits || fam.best_angles.empty()) {
        fam.best_bits = std::max(fam.best_bits, bits);
        fam.best_angles = thetas;
      }
    }
    result.families.push_back(std::move(fam));
  }

  // (b) seeded random measurements, alternating orthonormal bases and
  // overcomplete rank-one POVMs with 2·dim outcomes.
  {
    FamilySearch fam{"random_rank_one", 0.0, 0, false, {}};
    for (std::size_t run = 0; run < search_budget; ++run) {
      double bits = 0.0;
      if (run % 2 == 0) {
        const Matrix basis = haar_unitary(d, rng);
        bits = information_for(cq, Povm::projective(basis));
        consider_basis(basis, bits);
      } else {
        const Matrix v = random_rank_one_povm(d, 2 * d, rng);
        bits = information_for(cq, Povm::rank_one(decimal_labels(static_cast<std::size_t>(2 * d)), v));
      }
      ++fam.evaluations;
      fam.best_bits = std::max(fam.best_bits, bits);
    }
    result.families.push_back(std::move(fam));
  }

  // (c) hill climbing on the best basis found so far.
  {
    FamilySearch fam{"hill_climb", best_basis_bits, 0, false, {}};
    Matrix current = best_basis;
    double current_bits = best_basis_bits;
    double step = 0.3;
    std::size_t failures = 0;
    for (std::size_t run = 0; run < search_budget && d > 1; ++run) {
      const Matrix candidate = current * unitary_step(d, step, rng);
      const double bits = information_for(cq, Povm::projective(candidate));
      ++fam.evaluations;
      if (bits > current_bits) {
        current = candidate;
        current_bits = bits;
        failures = 0;
      } else if (++failures >= 8) {
        step *= 0.5;
        failures = 0;
      }
    }
    fam.best_bits = std::max(0.0, current_bits);
    result.families.push_back(std::move(fam));
  }

  for (const auto& f : result.families) {
    if (f.best_bits > result.bits || result.best_family.empty()) {
      result.bits = std::max(result.bits, f.best_bits);
      result.best_family = f.family;
    }
  }
  return result;
}

double ben_or_sufficient_eps(double iacc_bits, std::size_t key_len) {
  if (!(iacc_bits >= 0.0)) throw std::invalid_argument("ben_or_sufficient_eps: iacc must be >= 0");
  const double scaled = std::ldexp(iacc_bits, static_cast<int>(key_len) + 2);
  return std::min(1.0, std::sqrt(scaled));
}

double compose_report(double eps_c, double eps_s, double eps_r) {
  for (double e : {eps_c, eps_s, eps_r}) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("compose_report: ε outside [0,1]");
  }
  return std::min(1.0, eps_c + eps_s + eps_r);
}

SecurityReport make_security_report(const CqState& cq, const SecurityInputs& inputs) {
  SecurityReport r;
  r.eps_correct = inputs.outcomes ? correctness_eps(*inputs.outcomes) : 0.0;
  r.eps_robust = inputs.passive_outcomes ? robustness_eps(*inputs.passive_outcomes) : 0.0;
  r.eps_secret_upper = secrecy_eps_upper(cq);
  const SecrecyLowerBound lower = secrecy_eps_lower(cq, default_strategies(cq));
  r.eps_secret_lower = std::min(lower.value, r.eps_secret_upper);
  const AccessibleInfoResult iacc = accessible_info_lower(cq, inputs.search_budget, inputs.seed);
  r.iacc_lower_bits = iacc.bits;
  r.eps_total = compose_report(r.eps_correct, r.eps_secret_upper, r.eps_robust);

  Json strategies = Json::array();
  for (const auto& s : lower.strategies) {
    strategies.push_back({{"name", s.name},
                          {"real_accept", s.real_accept},
                          {"canonical_ideal_accept", s.canonical_ideal_accept},
                          {"ideal_accept_min", s.ideal_accept_min},
                          {"ideal_accept_max", s.ideal_accept_max},
                          {"advantage_vs_canonical", s.advantage_vs_canonical},
                          {"certified", s.certified}});
  }
  Json families = Json::array();
  for (const auto& f : iacc.families) {
    families.push_back({{"family", f.family},
                        {"best_bits", f.best_bits},
                        {"evaluations", f.evaluations},
                        {"exhaustive", f.exhaustive}});
  }
  r.provenance = {
      {"eps_correct_source", inputs.outcomes ? "outcomes" : "not_provided"},
      {"eps_robust_source", inputs.passive_outcomes ? "passive_outcomes" : "not_provided"},
      {"eps_total_uses", "eps_secret_upper"},
      {"secrecy_lower_strategy", lower.best_strategy},
      {"strategies", std::move(strategies)},
      {"iacc_best_family", iacc.best_family},
      {"iacc_families", std::move(families)},
      {"search_budget", inputs.search_budget},
      {"seed", inputs.seed},
  };
  return r;
}

Json to_json(const SecurityReport& r) {
  return Json{{"eps_correct", r.eps_correct},
              {"eps_robust", r.eps_robust},
              {"eps_secret_upper", r.eps_secret_upper},
              {"eps_secret_lower", r.eps_secret_lower},
              {"iacc_lower_bits", r.iacc_lower_bits},
              {"eps_total", r.eps_total},
              {"provenance", r.provenance}};
}

}  // namespace qkdlab
