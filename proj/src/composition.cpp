#include "qkdlab/composition.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qkdlab {

namespace {

constexpr double kZ995 = 2.5758293035489004;
constexpr std::size_t kMaxEnumeratedBits = 20;
// Floating-point slack for exact comparisons against a declared ε.
constexpr double kExactSlack = 1e-12;

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

Bits uniform_bits(std::size_t n, std::mt19937_64& rng) {
  Bits b(n);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) word = rng();
    b[i] = (word >> (i % 64)) & 1U;
  }
  return b;
}

Bits index_bits(std::uint64_t value, std::size_t width) {
  Bits out(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = (value >> (width - 1 - i)) & 1U;
  return out;
}

Bits concat(const Bits& a, const Bits& b) {
  Bits out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void require_key(const View& source, std::size_t bits, const std::string& who) {
  if (source.outputs.size() != bits) {
    throw std::length_error(who + ": key of " + std::to_string(source.outputs.size()) + " bits, expected " +
                            std::to_string(bits));
  }
}

// Splits a composed OTP view into the key candidate C ⊕ M.
Bits recovered_pad(const View& v) {
  const std::size_t m = v.outputs.size();
  if (v.adversary.size() < m) throw std::length_error("distinguisher: adversary view shorter than message");
  Bits pad(m);
  const std::size_t off = v.adversary.size() - m;
  for (std::size_t i = 0; i < m; ++i) pad[i] = v.adversary[off + i] ^ v.outputs[i];
  return pad;
}

std::optional<ViewDistribution> compose_exact(
    const std::optional<ViewDistribution>& source,
    const std::function<ViewDistribution(const View&)>& app) {
  if (!source || !app) return std::nullopt;
  ViewDistribution out;
  std::size_t work = 0;
  for (const auto& [sv, p] : *source) {
    const ViewDistribution inner = app(sv);
    work += inner.size();
    if (work > kEnumerationCap) return std::nullopt;
    for (const auto& [v, q] : inner) out[v] += p * q;
  }
  return out;
}

}  // namespace

double half_width_99(std::size_t accepted_real, std::size_t trials_real, std::size_t accepted_ideal,
                     std::size_t trials_ideal, bool* used_hoeffding) {
  if (trials_real == 0 || trials_ideal == 0) throw std::invalid_argument("half_width_99: no trials");
  const double tr = static_cast<double>(trials_real);
  const double ti = static_cast<double>(trials_ideal);
  const double pooled = static_cast<double>(accepted_real + accepted_ideal) / (tr + ti);
  const double inv = 1.0 / tr + 1.0 / ti;
  const double pr = static_cast<double>(accepted_real) / tr;
  const double pi = static_cast<double>(accepted_ideal) / ti;
  const bool small = tr * std::min(pr, 1.0 - pr) < 10.0 || ti * std::min(pi, 1.0 - pi) < 10.0;
  if (used_hoeffding) *used_hoeffding = small;
  if (small) return std::sqrt(std::log(200.0) * inv / 2.0);
  return kZ995 * std::sqrt(pooled * (1.0 - pooled) * inv);
}

double accept_probability(const ViewDistribution& dist, const DistinguisherDef& d) {
  double p = 0.0;
  for (const auto& [v, q] : dist) {
    if (d.decision(v)) p += q;
  }
  return p;
}

double total_variation(const ViewDistribution& a, const ViewDistribution& b) {
  double s = 0.0;
  for (const auto& [v, p] : a) {
    auto it = b.find(v);
    s += std::abs(p - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [v, q] : b) {
    if (!a.count(v)) s += q;
  }
  return 0.5 * s;
}

AdvantageEstimate estimate_advantage(const ProtocolPair& pair, const DistinguisherDef& d,
                                     std::size_t trials, std::uint64_t seed, bool enumerate) {
  if (trials < kMinTrials) {
    throw std::invalid_argument("estimate_advantage: need at least " + std::to_string(kMinTrials) + " trials");
  }
  AdvantageEstimate e;
  e.trials = trials;
  e.seed = seed;
  if (enumerate) {
    if (!pair.real_exact || !pair.ideal_exact) {
      throw std::invalid_argument("estimate_advantage: '" + pair.name + "' has no explicit distributions");
    }
    e.exact = true;
    e.real_accept = accept_probability(*pair.real_exact, d);
    e.ideal_accept = accept_probability(*pair.ideal_exact, d);
    e.point = e.real_accept - e.ideal_accept;
    return e;
  }
  auto real_rng = stream_rng(seed, 0);
  auto ideal_rng = stream_rng(seed, 1);
  std::size_t ar = 0;
  std::size_t ai = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    if (d.decision(pair.real_run(real_rng))) ++ar;
    if (d.decision(pair.ideal_run(ideal_rng))) ++ai;
  }
  e.real_accept = static_cast<double>(ar) / static_cast<double>(trials);
  e.ideal_accept = static_cast<double>(ai) / static_cast<double>(trials);
  e.point = e.real_accept - e.ideal_accept;
  e.half_width_99 = half_width_99(ar, trials, ai, trials, &e.hoeffding);
  return e;
}

namespace {

void check_pairing(const KeyedApplication& app, const ProtocolPair& source) {
  if (app.key_bits != source.output_bits) {
    throw std::length_error("compose: '" + app.name + "' needs " + std::to_string(app.key_bits) +
                            " key bits but '" + source.name + "' emits " + std::to_string(source.output_bits));
  }
}

}  // namespace

ProtocolPair compose(const KeyedApplication& app, const ProtocolPair& source) {
  check_pairing(app, source);
  ProtocolPair out;
  out.name = app.name + "∘" + source.name;
  out.real_run = [app, source](std::mt19937_64& rng) { return app.real(source.real_run(rng), rng); };
  out.ideal_run = [app, source](std::mt19937_64& rng) { return app.ideal(source.ideal_run(rng), rng); };
  out.real_exact = compose_exact(source.real_exact, app.real_exact);
  out.ideal_exact = compose_exact(source.ideal_exact, app.ideal_exact);
  out.declared_eps = std::min(1.0, app.declared_eps + source.declared_eps);
  return out;
}

ProtocolPair hybrid_source_gap(const KeyedApplication& app, const ProtocolPair& source) {
  check_pairing(app, source);
  ProtocolPair out;
  out.name = app.name + "∘" + source.name + " [source gap]";
  out.real_run = [app, source](std::mt19937_64& rng) { return app.real(source.real_run(rng), rng); };
  out.ideal_run = [app, source](std::mt19937_64& rng) { return app.real(source.ideal_run(rng), rng); };
  out.real_exact = compose_exact(source.real_exact, app.real_exact);
  out.ideal_exact = compose_exact(source.ideal_exact, app.real_exact);
  out.declared_eps = source.declared_eps;
  return out;
}

ProtocolPair hybrid_app_gap(const KeyedApplication& app, const ProtocolPair& source) {
  check_pairing(app, source);
  ProtocolPair out;
  out.name = app.name + "∘" + source.name + " [application gap]";
  out.real_run = [app, source](std::mt19937_64& rng) { return app.real(source.ideal_run(rng), rng); };
  out.ideal_run = [app, source](std::mt19937_64& rng) { return app.ideal(source.ideal_run(rng), rng); };
  out.real_exact = compose_exact(source.ideal_exact, app.real_exact);
  out.ideal_exact = compose_exact(source.ideal_exact, app.ideal_exact);
  out.declared_eps = app.declared_eps;
  return out;
}

KeyedApplication otp_application(const Bits& message) {
  for (auto b : message) {
    if (b > 1) throw std::invalid_argument("otp_application: message entries must be bits");
  }
  const std::size_t m = message.size();
  KeyedApplication app;
  app.name = "otp";
  app.key_bits = m;
  app.declared_eps = 0.0;
  auto encrypt = [message](const View& src) {
    require_key(src, message.size(), "otp");
    Bits c(message.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = message[i] ^ src.outputs[i];
    return View{message, concat(src.adversary, c)};
  };
  app.real = [encrypt](const View& src, std::mt19937_64&) { return encrypt(src); };
  app.ideal = [message](const View& src, std::mt19937_64& rng) {
    require_key(src, message.size(), "otp");
    return View{message, concat(src.adversary, uniform_bits(message.size(), rng))};
  };
  if (m <= kMaxEnumeratedBits) {
    app.real_exact = [encrypt](const View& src) { return ViewDistribution{{encrypt(src), 1.0}}; };
    app.ideal_exact = [message](const View& src) {
      require_key(src, message.size(), "otp");
      ViewDistribution d;
      const std::uint64_t count = std::uint64_t{1} << message.size();
      const double p = std::ldexp(1.0, -static_cast<int>(message.size()));
      for (std::uint64_t c = 0; c < count; ++c) {
        d.emplace(View{message, concat(src.adversary, index_bits(c, message.size()))}, p);
      }
      return d;
    };
  }
  return app;
}

ProtocolPair perfect_key_source(std::size_t bits) {
  if (bits == 0) throw std::invalid_argument("perfect_key_source: empty key");
  ProtocolPair s;
  s.name = "perfect_key";
  s.output_bits = bits;
  s.declared_eps = 0.0;
  s.real_run = [bits](std::mt19937_64& rng) { return View{uniform_bits(bits, rng), {}}; };
  s.ideal_run = s.real_run;
  if (bits <= kMaxEnumeratedBits) {
    ViewDistribution d;
    const double p = std::ldexp(1.0, -static_cast<int>(bits));
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << bits); ++k) d.emplace(View{index_bits(k, bits), {}}, p);
    s.real_exact = d;
    s.ideal_exact = d;
  }
  return s;
}

ProtocolPair biased_key_source(std::size_t bits, double delta) {
  if (bits == 0 || bits > kMaxEnumeratedBits) {
    throw std::invalid_argument("biased_key_source: bits must be in [1, 20]");
  }
  if (!(delta >= -0.5 && delta <= 0.5)) throw std::invalid_argument("biased_key_source: delta must be in [-1/2, 1/2]");
  const double p1 = 0.5 + delta;
  ProtocolPair s;
  s.name = "biased_key";
  s.output_bits = bits;
  s.real_run = [bits, p1](std::mt19937_64& rng) {
    std::bernoulli_distribution bit(p1);
    Bits k(bits);
    for (auto& b : k) b = bit(rng);
    return View{k, {}};
  };
  s.ideal_run = [bits](std::mt19937_64& rng) { return View{uniform_bits(bits, rng), {}}; };
  ViewDistribution real;
  ViewDistribution ideal;
  const double u = std::ldexp(1.0, -static_cast<int>(bits));
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << bits); ++k) {
    const Bits key = index_bits(k, bits);
    double p = 1.0;
    for (auto b : key) p *= b ? p1 : 1.0 - p1;
    real.emplace(View{key, {}}, p);
    ideal.emplace(View{key, {}}, u);
  }
  s.declared_eps = total_variation(real, ideal);
  s.real_exact = std::move(real);
  s.ideal_exact = std::move(ideal);
  return s;
}

ProtocolPair attack_key_source(std::size_t n, double declared_eps) {
  if (n < 2 || n > kAttackMaxQubits) {
    throw std::invalid_argument("attack_key_source: n must be in [2, " + std::to_string(kAttackMaxQubits) + "]");
  }
  if (!(declared_eps >= 0.0 && declared_eps <= 1.0)) {
    throw std::invalid_argument("attack_key_source: declared_eps must be in [0, 1]");
  }
  ProtocolPair s;
  s.name = "attack_key";
  s.output_bits = n + 1;
  s.declared_eps = declared_eps;
  s.real_run = [n](std::mt19937_64& rng) {
    Bits key = uniform_bits(n + 1, rng);
    Bits r = uniform_bits(n, rng);
    std::uint8_t par = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) par ^= r[i];
    r[n - 1] = key[n] ^ par;
    Vector reg = attack_register(key, r).amplitudes();
    static const Matrix standard = qubit_basis(0.0);
    static const Matrix diagonal = qubit_basis(std::numbers::pi / 4.0);
    Bits outcomes(n);
    for (std::size_t i = 0; i < n; ++i) {
      outcomes[i] = static_cast<std::uint8_t>(measure_qubit(reg, i, n, key[i] ? diagonal : standard, rng));
    }
    return View{key, outcomes};
  };
  s.ideal_run = [n](std::mt19937_64& rng) {
    Bits key = uniform_bits(n + 1, rng);
    return View{key, uniform_bits(n, rng)};
  };
  ViewDistribution real;
  ViewDistribution ideal;
  const double p_real = std::ldexp(1.0, -static_cast<int>(2 * n));
  const double p_ideal = std::ldexp(1.0, -static_cast<int>(2 * n + 1));
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << (n + 1)); ++k) {
    const Bits key = index_bits(k, n + 1);
    for (std::uint64_t rv = 0; rv < (std::uint64_t{1} << n); ++rv) {
      const Bits r = index_bits(rv, n);
      std::uint8_t par = 0;
      for (auto b : r) par ^= b;
      if (par == key[n]) real.emplace(View{key, r}, p_real);
      ideal.emplace(View{key, r}, p_ideal);
    }
  }
  s.real_exact = std::move(real);
  s.ideal_exact = std::move(ideal);
  return s;
}

DistinguisherDef majority_distinguisher() {
  return {"majority", [](const View& v) {
            const Bits pad = recovered_pad(v);
            std::size_t ones = 0;
            for (auto b : pad) ones += b;
            return 2 * ones > pad.size();
          }};
}

DistinguisherDef first_bit_distinguisher() {
  return {"first_bit", [](const View& v) {
            const Bits pad = recovered_pad(v);
            return !pad.empty() && pad[0] == 1;
          }};
}

DistinguisherDef parity_distinguisher(std::size_t n) {
  return {"parity", [n](const View& v) {
            if (v.outputs.size() != n + 1 || v.adversary.size() != 2 * n + 1) {
              throw std::length_error("parity distinguisher: view does not match n = " + std::to_string(n));
            }
            std::uint8_t par = 0;
            for (std::size_t i = 0; i < n; ++i) par ^= v.adversary[i];
            return (par ^ v.adversary[2 * n]) == v.outputs[n];
          }};
}

CompositionReport verify_composition_bound(const KeyedApplication& app, const ProtocolPair& source,
                                           const std::vector<DistinguisherDef>& distinguishers,
                                           std::size_t trials, std::uint64_t seed, bool enumerate) {
  const ProtocolPair composed = compose(app, source);
  const ProtocolPair source_gap = hybrid_source_gap(app, source);
  const ProtocolPair app_gap = hybrid_app_gap(app, source);
  CompositionReport r;
  r.app = app.name;
  r.source = source.name;
  r.eps_app = app.declared_eps;
  r.eps_source = source.declared_eps;
  r.declared_eps = composed.declared_eps;
  r.trials = trials;
  r.seed = seed;
  r.enumerate = enumerate;
  r.pass = true;
  for (const auto& d : distinguishers) {
    DistinguisherReport dr;
    dr.name = d.name;
    dr.total = estimate_advantage(composed, d, trials, seed, enumerate);
    dr.source_gap = estimate_advantage(source_gap, d, trials, seed + 1, enumerate);
    dr.app_gap = estimate_advantage(app_gap, d, trials, seed + 2, enumerate);
    dr.telescope_residual = dr.total.point - (dr.source_gap.point + dr.app_gap.point);
    const double slack = enumerate ? kExactSlack : dr.total.half_width_99;
    dr.within_bound = std::abs(dr.total.point) <= r.declared_eps + slack;
    r.pass = r.pass && dr.within_bound;
    r.distinguishers.push_back(dr);
  }
  return r;
}

Json to_json(const AdvantageEstimate& e) {
  return Json{{"point", e.point},         {"half_width_99", e.half_width_99}, {"trials", e.trials},
              {"real_accept", e.real_accept}, {"ideal_accept", e.ideal_accept}, {"exact", e.exact},
              {"hoeffding", e.hoeffding}, {"seed", e.seed}};
}

Json to_json(const CompositionReport& r) {
  Json ds = Json::array();
  for (const auto& d : r.distinguishers) {
    ds.push_back({{"name", d.name},
                  {"total", to_json(d.total)},
                  {"source_gap", to_json(d.source_gap)},
                  {"app_gap", to_json(d.app_gap)},
                  {"telescope_residual", d.telescope_residual},
                  {"within_bound", d.within_bound}});
  }
  return Json{{"app", r.app},
              {"source", r.source},
              {"eps_app", r.eps_app},
              {"eps_source", r.eps_source},
              {"declared_eps", r.declared_eps},
              {"trials", r.trials},
              {"seed", r.seed},
              {"enumerate", r.enumerate},
              {"distinguishers", ds},
              {"pass", r.pass}};
}

}  // namespace qkdlab
