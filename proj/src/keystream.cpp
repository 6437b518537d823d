#include "qkdlab/keystream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace qkdlab {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

// 1 − e^{−x} without cancellation for small x.
double one_minus_exp_neg(double x) { return -std::expm1(-x); }

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void validate(const StreamParams& p) {
  if (!finite_positive(p.gamma) || !finite_positive(p.rate_rho) || !finite_positive(p.nu)) {
    throw std::invalid_argument("StreamParams: gamma, rate_rho and nu must be finite and positive");
  }
  if (!finite_positive(p.c)) throw std::invalid_argument("StreamParams: c must be finite and positive");
  if (p.n0 == 0 || p.ell == 0 || p.ell0 == 0) {
    throw std::invalid_argument("StreamParams: n0, ell and ell0 must be positive");
  }
  if (!(p.eps0 >= 0.0 && p.eps0 <= 1.0)) throw std::invalid_argument("StreamParams: eps0 must be in [0, 1]");
}

RoundEps round_eps(const StreamParams& p, std::uint64_t i, double ell_prev, double n_i, double ell_i) {
  if (i == 0) throw std::invalid_argument("round_eps: round index starts at 1");
  if (!finite_positive(ell_prev) || !finite_positive(n_i) || !finite_positive(ell_i)) {
    throw std::invalid_argument("round_eps: ell_prev, n_i and ell_i must be positive");
  }
  RoundEps r;
  r.first_term = std::exp(-p.gamma * (p.rate_rho * n_i - ell_i - static_cast<double>(p.ell)));
  r.second_term = std::exp(-p.nu * ell_prev + std::log(n_i));
  const double raw = r.first_term + r.second_term;
  r.clamped = !(raw <= 1.0);
  r.value = std::clamp(std::isnan(raw) ? 1.0 : raw, 0.0, 1.0);
  return r;
}

double schedule_n(const StreamParams& p, std::uint64_t i, ScheduleMode mode) {
  const double grow = p.c * static_cast<double>(i);
  return static_cast<double>(p.n0) + (mode == ScheduleMode::kRounded ? std::ceil(grow) : grow);
}

double schedule_ell(const StreamParams& p, std::uint64_t i, ScheduleMode mode) {
  if (i == 0) return static_cast<double>(p.ell0);
  const double grow = p.c * p.rate_rho * static_cast<double>(i) / 2.0;
  return static_cast<double>(p.ell) + (mode == ScheduleMode::kRounded ? std::ceil(grow) : grow);
}

std::vector<RoundRecord> schedule(const StreamParams& p, std::uint64_t rounds, ScheduleMode mode) {
  validate(p);
  if (rounds == 0) throw std::invalid_argument("schedule: rounds must be at least 1");
  std::vector<RoundRecord> out;
  out.reserve(rounds);
  double ell_prev = static_cast<double>(p.ell0);
  for (std::uint64_t i = 1; i <= rounds; ++i) {
    RoundRecord rec;
    rec.i = i;
    rec.n_i = schedule_n(p, i, mode);
    rec.ell_i = schedule_ell(p, i, mode);
    const RoundEps e = round_eps(p, i, ell_prev, rec.n_i, rec.ell_i);
    rec.eps_i = e.value;
    rec.first_term = e.first_term;
    rec.second_term = e.second_term;
    rec.clamped = e.clamped;
    out.push_back(rec);
    ell_prev = rec.ell_i;
  }
  return out;
}

StreamBudget total_eps(const StreamParams& p, std::uint64_t horizon, ScheduleMode mode) {
  if (horizon == 0) throw std::invalid_argument("total_eps: horizon must be at least 1");
  StreamBudget b;
  b.mode = mode;
  if (!(p.gamma * p.c * p.rate_rho > 0.0) || !(p.nu * p.c * p.rate_rho > 0.0)) {
    b.divergent = true;
    b.eps_total = 1.0;
    b.tail_bound = std::numeric_limits<double>::infinity();
    b.tail_first = b.tail_bound;
    b.tail_second = b.tail_bound;
    return b;
  }
  b.rounds = schedule(p, horizon, mode);
  for (const auto& r : b.rounds) b.partial_sum += r.eps_i;

  const double rounded = mode == ScheduleMode::kRounded ? 1.0 : 0.0;
  const double n0 = static_cast<double>(p.n0);
  const double ell = static_cast<double>(p.ell);
  const auto next = static_cast<double>(horizon + 1);

  // First terms: ρ n_i − ℓ_i − ℓ ≥ ρ n0 − 2ℓ + cρi/2 − [rounded], a geometric
  // series in i with ratio e^{−γcρ/2}.
  const double first_rate = p.gamma * p.c * p.rate_rho / 2.0;
  const double first_next = std::exp(-p.gamma * (p.rate_rho * n0 - 2.0 * ell + p.c * p.rate_rho * next / 2.0 - rounded));
  b.tail_first = first_next / one_minus_exp_neg(first_rate);

  // Second terms for i ≥ J = horizon + 1 ≥ 2: ℓ_{i−1} ≥ ℓ + cρ(i−1)/2 and
  // n_i ≤ A + c i, so the tail is at most Σ_{i≥J} (A + c i) q^{i−1} e^{−νℓ}.
  const double second_rate = p.nu * p.c * p.rate_rho / 2.0;
  const double q_jm1 = std::exp(-second_rate * (next - 1.0));
  const double q_j = std::exp(-second_rate * next);
  const double one_minus_q = one_minus_exp_neg(second_rate);
  const double a = n0 + rounded;
  const double sum_geo = q_jm1 / one_minus_q;
  const double sum_lin = next * q_jm1 / one_minus_q + q_j / (one_minus_q * one_minus_q);
  b.tail_second = std::exp(-p.nu * ell) * (a * sum_geo + p.c * sum_lin);

  b.tail_bound = b.tail_first + b.tail_second;
  const double total = p.eps0 + b.partial_sum + b.tail_bound;
  b.eps_total = std::isnan(total) ? 1.0 : std::min(1.0, total);
  return b;
}

std::vector<double> default_c_grid() {
  std::vector<double> grid;
  double decade = 1.0;
  for (int k = 0; k <= 9; ++k) {
    for (double m : {1.0, 2.0, 5.0}) {
      const double c = m * decade;
      if (c <= 1e9) grid.push_back(c);
    }
    decade *= 10.0;
  }
  return grid;
}

PlanResult plan(double target_eps, double gamma, double rate_rho, double nu, double eps0,
                const PlanOptions& options) {
  if (!(target_eps > eps0)) throw std::invalid_argument("plan: target_eps must exceed eps0");
  if (!(target_eps <= 1.0)) throw std::invalid_argument("plan: target_eps must be at most 1");
  StreamParams base;
  base.gamma = gamma;
  base.rate_rho = rate_rho;
  base.nu = nu;
  base.eps0 = eps0;
  base.ell = options.ell;
  base.n0 = 1;
  base.ell0 = 1;
  validate(base);
  const std::vector<double> grid = options.c_grid.empty() ? default_c_grid() : options.c_grid;

  // Least n0 with ρ n0 > 2ℓ, so the first-term exponent decays from round 1.
  std::uint64_t n_lo = static_cast<std::uint64_t>(std::floor(2.0 * static_cast<double>(base.ell) / rate_rho));
  while (rate_rho * static_cast<double>(n_lo) <= 2.0 * static_cast<double>(base.ell)) ++n_lo;
  if (n_lo > options.max_n0) throw std::invalid_argument("plan: max_n0 below the decay threshold");

  PlanResult result;
  bool found = false;
  StreamParams best_seen = base;
  StreamBudget best_seen_budget;
  best_seen_budget.eps_total = 2.0;

  auto evaluate = [&](std::uint64_t n0, double c, std::uint64_t ell0) {
    StreamParams p = base;
    p.n0 = n0;
    p.c = c;
    p.ell0 = ell0;
    ++result.configurations_tried;
    StreamBudget b = total_eps(p, options.horizon, ScheduleMode::kRounded);
    if (b.eps_total < best_seen_budget.eps_total) {
      best_seen = p;
      best_seen_budget = b;
    }
    return !b.divergent && b.eps_total <= target_eps;
  };

  for (double c : grid) {
    std::uint64_t n0 = 0;
    if (evaluate(n_lo, c, options.max_ell0)) {
      n0 = n_lo;
    } else if (evaluate(options.max_n0, c, options.max_ell0)) {
      std::uint64_t lo = n_lo;  // infeasible
      std::uint64_t hi = options.max_n0;  // feasible
      while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (evaluate(mid, c, options.max_ell0)) hi = mid;
        else lo = mid;
      }
      n0 = hi;
    } else {
      continue;
    }
    if (found && n0 >= result.params.n0) continue;

    std::uint64_t ell_hi = options.max_ell0;  // feasible
    std::uint64_t ell0 = 1;
    if (!evaluate(n0, c, 1)) {
      std::uint64_t ell_lo = 1;  // infeasible
      while (ell_hi - ell_lo > 1) {
        const std::uint64_t mid = ell_lo + (ell_hi - ell_lo) / 2;
        if (evaluate(n0, c, mid)) ell_hi = mid;
        else ell_lo = mid;
      }
      ell0 = ell_hi;
    }
    StreamParams p = base;
    p.n0 = n0;
    p.c = c;
    p.ell0 = ell0;
    result.params = p;
    found = true;
    if (n0 == n_lo) break;
  }
  if (!found) {
    throw PlanError("plan: target " + fmt(target_eps) + " unreachable within the search bounds; best eps_total " +
                        fmt(best_seen_budget.eps_total),
                    best_seen, best_seen_budget);
  }
  result.budget = total_eps(result.params, options.horizon, ScheduleMode::kRounded);
  if (result.budget.eps_total > target_eps) {
    throw std::logic_error("plan: selected configuration fails its own target on re-evaluation");
  }
  return result;
}

SimulationResult simulate_stream(const StreamParams& p, const MockKeySource& source,
                                 const SimulationOptions& options, std::mt19937_64& rng) {
  validate(p);
  if (!(source.abort_prob >= 0.0 && source.abort_prob < 1.0)) {
    throw std::invalid_argument("simulate_stream: abort probability must be in [0, 1)");
  }
  if (options.rounds == 0) throw std::invalid_argument("simulate_stream: rounds must be at least 1");

  SimulationResult r;
  r.initial_bits = p.ell0 + options.reserve_bits;
  r.bits_stored = r.initial_bits;
  if (options.keep_stream) r.stream.reserve(options.rounds * p.ell);
  r.log.reserve(options.rounds);
  std::bernoulli_distribution abort(source.abort_prob);

  std::uint64_t auth = p.ell0;
  for (std::uint64_t i = 1; i <= options.rounds; ++i) {
    const auto ell_i = static_cast<std::uint64_t>(schedule_ell(p, i));
    SimRoundLog entry;
    entry.i = i;
    while (true) {
      ++entry.attempts;
      if (entry.attempts == 1 || options.charging == AuthCharging::kPerAttempt) {
        if (r.bits_stored < auth) {
          throw StreamUnderflow("simulate_stream: round " + std::to_string(i) + " attempt " +
                                std::to_string(entry.attempts) + " needs " + std::to_string(auth) +
                                " stored bits, only " + std::to_string(r.bits_stored) + " left");
        }
        r.bits_stored -= auth;
        r.bits_consumed += auth;
        entry.consumed += auth;
      }
      if (!abort(rng)) break;
    }
    r.attempts += entry.attempts;
    r.retries += entry.attempts - 1;

    r.bits_produced += ell_i + p.ell;
    r.bits_stored += ell_i;
    r.bits_emitted += p.ell;
    if (options.keep_stream) {
      std::uint64_t word = 0;
      for (std::uint64_t k = 0; k < p.ell; ++k) {
        if (k % 64 == 0) word = rng();
        r.stream.push_back(static_cast<std::uint8_t>((word >> (k % 64)) & 1U));
      }
    }
    if (r.bits_emitted + r.bits_stored + r.bits_consumed != r.bits_produced + r.initial_bits) {
      throw std::logic_error("simulate_stream: conservation violated at round " + std::to_string(i));
    }
    entry.stored_after = r.bits_stored;
    entry.emitted_total = r.bits_emitted;
    r.log.push_back(entry);
    auth = ell_i;
  }
  return r;
}

std::string schedule_csv(const std::vector<RoundRecord>& rounds) {
  std::string out = "i,n_i,ell_i,eps_i,cumulative_eps\r\n";
  double cumulative = 0.0;
  for (const auto& r : rounds) {
    cumulative += r.eps_i;
    out += std::to_string(r.i) + "," + fmt(r.n_i) + "," + fmt(r.ell_i) + "," + fmt(r.eps_i) + "," +
           fmt(cumulative) + "\r\n";
  }
  return out;
}

const char* to_string(ScheduleMode m) { return m == ScheduleMode::kRounded ? "rounded" : "real"; }

const char* to_string(AuthCharging c) {
  return c == AuthCharging::kOncePerRound ? "once_per_round" : "per_attempt";
}

Json to_json(const StreamParams& p) {
  return Json{{"gamma", p.gamma}, {"rate_rho", p.rate_rho}, {"nu", p.nu}, {"n0", p.n0},
              {"c", p.c},         {"ell", p.ell},           {"ell0", p.ell0}, {"eps0", p.eps0}};
}

StreamParams stream_params_from_json(const Json& j) {
  StreamParams p;
  try {
    p.gamma = j.at("gamma").get<double>();
    p.rate_rho = j.at("rate_rho").get<double>();
    p.nu = j.at("nu").get<double>();
    p.n0 = j.at("n0").get<std::uint64_t>();
    p.c = j.at("c").get<double>();
    p.ell = j.at("ell").get<std::uint64_t>();
    p.ell0 = j.at("ell0").get<std::uint64_t>();
    p.eps0 = j.at("eps0").get<double>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("stream params: ") + e.what());
  }
  validate(p);
  return p;
}

Json to_json(const StreamBudget& b, bool include_rounds) {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json j{{"partial_sum", b.partial_sum}, {"tail_first", num(b.tail_first)},
         {"tail_second", num(b.tail_second)}, {"tail_bound", num(b.tail_bound)},
         {"eps_total", b.eps_total},     {"divergent", b.divergent},
         {"mode", to_string(b.mode)},    {"horizon", b.rounds.size()}};
  std::size_t clamped = 0;
  for (const auto& r : b.rounds) clamped += r.clamped ? 1 : 0;
  j["clamped_rounds"] = clamped;
  if (include_rounds) {
    Json rows = Json::array();
    for (const auto& r : b.rounds) {
      rows.push_back({{"i", r.i}, {"n_i", r.n_i}, {"ell_i", r.ell_i}, {"eps_i", r.eps_i}, {"clamped", r.clamped}});
    }
    j["rounds"] = rows;
  }
  return j;
}

Json to_json(const SimulationResult& r, bool include_log) {
  Json j{{"bits_emitted", r.bits_emitted},   {"bits_stored", r.bits_stored},
         {"bits_consumed", r.bits_consumed}, {"bits_produced", r.bits_produced},
         {"initial_bits", r.initial_bits},   {"attempts", r.attempts},
         {"retries", r.retries},             {"rounds", r.log.size()},
         {"ledger_balanced", r.bits_emitted + r.bits_stored + r.bits_consumed == r.bits_produced + r.initial_bits}};
  if (include_log) {
    Json rows = Json::array();
    for (const auto& e : r.log) {
      rows.push_back({{"i", e.i}, {"attempts", e.attempts}, {"consumed", e.consumed},
                      {"stored_after", e.stored_after}, {"emitted_total", e.emitted_total}});
    }
    j["log"] = rows;
  }
  return j;
}

}  // namespace qkdlab
