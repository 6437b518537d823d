#include "commands.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "qkdlab/attack_lab.hpp"
#include "qkdlab/composition.hpp"
#include "qkdlab/keystream.hpp"
#include "qkdlab/rsa_demo.hpp"
#include "qkdlab/security_metrics.hpp"
#include "qkdlab/serialization.hpp"
#include "qkdlab/version.hpp"

namespace qkdlab::cli {

namespace {

using Json = nlohmann::json;

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
  bool timestamp = false;
};

struct Outcome {
  Json params;
  Json result;
  bool ok = true;
  std::string failure;
  /// Command-specific CSV; empty means flatten the JSON report.
  std::string csv;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed (default from QKDLAB_SEED, else 1)")->envname("QKDLAB_SEED");
  sub->add_option("--out", c.out, "Write the report to this file instead of stdout");
  sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  sub->add_flag("--timestamp", c.timestamp, "Add a UTC timestamp to the report");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void flatten(const Json& j, const std::string& path, std::string& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    out += csv_field(path) + "," + csv_field(j.is_string() ? j.get<std::string>() : j.dump()) + "\r\n";
  }
}

Bits bits_option(const std::string& s, std::size_t expected, const std::string& flag) {
  const Bits b = bits_from_string(s);
  if (b.size() != expected) {
    throw std::invalid_argument(flag + " must have " + std::to_string(expected) + " bits");
  }
  return b;
}

Bits seeded_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bits b(n);
  for (auto& x : b) x = rng() & 1U;
  return b;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": not valid JSON: " + e.what());
  }
}

// Stream constants shared by the keystream subcommands.
struct StreamFlags {
  double gamma = 1e-3;
  double rho = 1e-2;
  double nu = 1e-3;
  double eps0 = 0.0;
  std::uint64_t ell = 256;
  std::optional<std::uint64_t> n0;
  std::optional<double> c;
  std::optional<std::uint64_t> ell0;
  double plan_target = 1e-9;
};

void add_stream_flags(CLI::App* sub, StreamFlags& f, bool with_schedule) {
  sub->add_option("--gamma", f.gamma, "γ")->capture_default_str();
  sub->add_option("--rho", f.rho, "ρ, key rate per signal")->capture_default_str();
  sub->add_option("--nu", f.nu, "ν")->capture_default_str();
  sub->add_option("--eps0", f.eps0, "Security of the initial key")->capture_default_str();
  sub->add_option("--ell", f.ell, "Bits emitted per round")->capture_default_str();
  if (with_schedule) {
    sub->add_option("--n0", f.n0, "Base signal count (default: planner output)");
    sub->add_option("--c", f.c, "Growth constant (default: planner output)");
    sub->add_option("--ell0", f.ell0, "Initial key length (default: planner output)");
    sub->add_option("--plan-target", f.plan_target, "Target used to fill unset constants")->capture_default_str();
  }
}

// Fills n0, c and ℓ_0 from the planner when they are not given.
std::pair<StreamParams, std::string> resolve_stream(const StreamFlags& f) {
  StreamParams p;
  p.gamma = f.gamma;
  p.rate_rho = f.rho;
  p.nu = f.nu;
  p.eps0 = f.eps0;
  p.ell = f.ell;
  std::string source = "flags";
  if (!f.n0 || !f.c || !f.ell0) {
    PlanOptions opt;
    opt.ell = f.ell;
    const PlanResult planned = plan(f.plan_target, f.gamma, f.rho, f.nu, f.eps0, opt);
    p = planned.params;
    source = "plan";
  }
  if (f.n0) p.n0 = *f.n0;
  if (f.c) p.c = *f.c;
  if (f.ell0) p.ell0 = *f.ell0;
  validate(p);
  return {p, source};
}

Outcome cmd_attack_demo(std::size_t n, std::size_t trials, std::size_t budget, bool control,
                        const std::string& message_flag, const std::string& state_out, std::uint64_t seed) {
  Outcome o;
  const Bits message = message_flag.empty() ? seeded_bits(n + 1, seed ^ 0x9e3779b97f4a7c15ULL)
                                            : bits_option(message_flag, n + 1, "--message");
  o.params = {{"n", n}, {"trials", trials}, {"search_budget", budget}, {"control", control},
              {"message", bits_to_string(message)}};

  const AttackTrialSummary attack = run_otp_attack_trials(n, message, trials, seed);
  o.result["attack"] = {{"trials", attack.trials}, {"successes", attack.successes},
                        {"success_rate", attack.success_rate()}};
  if (control) {
    const AttackTrialSummary wrong =
        run_otp_attack_trials(n, message, trials, seed + 1, AdversaryBases::kComplement);
    o.result["control_complement_bases"] = {{"trials", wrong.trials}, {"successes", wrong.successes},
                                            {"success_rate", wrong.success_rate()}, {"seed", seed + 1}};
  }
  const AttackState state = build_attack_state(n);
  if (!state_out.empty()) write_atomically(state_out, Json{{"cq_state", to_json(state.cq)}}.dump(2) + "\n");
  const MarginalCheck marginal = fully_mixed_marginal_check(state);
  o.result["marginal"] = {{"pass", marginal.pass}, {"max_deviation", marginal.max_deviation}, {"tolerance", 1e-9}};
  o.result["secrecy_gap"] = to_json(secrecy_gap_report(state, budget, seed));
  const GuessOracle oracle = single_qubit_guess_oracle();
  Json curve = Json::array();
  for (const auto& pt : parity_guess_curve(n, oracle.p_star)) curve.push_back({{"n", pt.n}, {"probability", pt.probability}});
  o.result["guess_oracle"] = {{"p_star", oracle.p_star}, {"angle", oracle.angle}, {"parity_curve", curve}};

  if (attack.successes != attack.trials) {
    o.ok = false;
    o.failure = "attack recovered the target bit in " + std::to_string(attack.successes) + " of " +
                std::to_string(attack.trials) + " trials";
  } else if (!marginal.pass) {
    o.ok = false;
    o.failure = "prefix-conditioned marginal deviates from I/2^n";
  }
  return o;
}

Outcome cmd_secrecy(const std::string& path, std::size_t budget, std::uint64_t seed) {
  Outcome o;
  const Json doc = load_json_file(path);
  if (!doc.is_object() || !doc.contains("cq_state")) throw SchemaError(path + ": missing \"cq_state\"");
  const CqState cq = cq_state_from_json(doc.at("cq_state"));
  SecurityInputs in;
  in.search_budget = budget;
  in.seed = seed;
  if (doc.contains("outcomes")) in.outcomes = joint_from_json(doc.at("outcomes"));
  if (doc.contains("passive_outcomes")) {
    const Json& po = doc.at("passive_outcomes");
    if (!po.is_object()) throw SchemaError(path + ": \"passive_outcomes\" must be an object of label: probability");
    Distribution d;
    for (const auto& [label, p] : po.items()) {
      if (!p.is_number()) throw SchemaError(path + ": passive_outcomes." + label + " must be a number");
      d[label] = p.get<double>();
    }
    in.passive_outcomes = d;
  }
  o.params = {{"state", path}, {"search_budget", budget}};
  const SecurityReport r = make_security_report(cq, in);
  o.result = to_json(r);
  if (r.eps_secret_lower > r.eps_secret_upper + 1e-9) {
    o.ok = false;
    o.failure = "secrecy lower bound exceeds the trace-distance upper bound";
  }
  return o;
}

Outcome cmd_keystream_plan(double target, const StreamFlags& f, std::uint64_t horizon) {
  Outcome o;
  o.params = {{"target_eps", target}, {"gamma", f.gamma}, {"rate_rho", f.rho}, {"nu", f.nu},
              {"eps0", f.eps0},       {"ell", f.ell},     {"horizon", horizon}};
  PlanOptions opt;
  opt.ell = f.ell;
  opt.horizon = horizon;
  try {
    const PlanResult r = plan(target, f.gamma, f.rho, f.nu, f.eps0, opt);
    o.result = {{"params", to_json(r.params)},
                {"budget", to_json(r.budget)},
                {"configurations_tried", r.configurations_tried},
                {"verified", r.budget.eps_total <= target}};
    o.ok = r.budget.eps_total <= target && !r.budget.divergent;
    if (!o.ok) o.failure = "planned configuration misses its target";
  } catch (const PlanError& e) {
    o.result = {{"best_params", to_json(e.best())}, {"best_budget", to_json(e.best_budget())}, {"error", e.what()}};
    o.ok = false;
    o.failure = e.what();
  }
  return o;
}

Outcome cmd_keystream_schedule(const StreamFlags& f, std::uint64_t rounds, bool real) {
  Outcome o;
  const auto [p, source] = resolve_stream(f);
  const ScheduleMode mode = real ? ScheduleMode::kReal : ScheduleMode::kRounded;
  o.params = {{"stream", to_json(p)}, {"params_source", source}, {"rounds", rounds}, {"mode", to_string(mode)}};
  const auto records = schedule(p, rounds, mode);
  Json rows = Json::array();
  double cumulative = 0.0;
  for (const auto& r : records) {
    cumulative += r.eps_i;
    rows.push_back({{"i", r.i}, {"n_i", r.n_i}, {"ell_i", r.ell_i}, {"eps_i", r.eps_i},
                    {"cumulative_eps", cumulative}, {"clamped", r.clamped}});
  }
  o.result = {{"rounds", rows}, {"budget", to_json(total_eps(p, rounds, mode))}};
  o.csv = schedule_csv(records);
  return o;
}

Outcome cmd_keystream_simulate(const StreamFlags& f, std::uint64_t rounds, double abort_prob,
                               const std::string& charging, std::uint64_t reserve, bool log,
                               std::uint64_t seed) {
  Outcome o;
  const auto [p, source] = resolve_stream(f);
  SimulationOptions opt;
  opt.rounds = rounds;
  opt.charging = charging == "per-attempt" ? AuthCharging::kPerAttempt : AuthCharging::kOncePerRound;
  opt.reserve_bits = reserve;
  opt.keep_stream = false;
  o.params = {{"stream", to_json(p)}, {"params_source", source}, {"rounds", rounds},
              {"abort_prob", abort_prob}, {"charging", to_string(opt.charging)}, {"reserve_bits", reserve}};
  std::mt19937_64 rng(seed);
  try {
    const SimulationResult r = simulate_stream(p, MockKeySource{abort_prob}, opt, rng);
    o.result = to_json(r, log);
    const double mean = abort_prob / (1.0 - abort_prob);
    const double var = abort_prob / ((1.0 - abort_prob) * (1.0 - abort_prob));
    const double expected = mean * static_cast<double>(rounds);
    const double sd = std::sqrt(var * static_cast<double>(rounds));
    o.result["retry_statistics"] = {{"expected", expected}, {"sd", sd},
                                    {"z", sd > 0 ? (static_cast<double>(r.retries) - expected) / sd : 0.0}};
    std::string csv = "i,attempts,consumed,stored_after,emitted_total\r\n";
    for (const auto& e : r.log) {
      csv += std::to_string(e.i) + "," + std::to_string(e.attempts) + "," + std::to_string(e.consumed) + "," +
             std::to_string(e.stored_after) + "," + std::to_string(e.emitted_total) + "\r\n";
    }
    o.csv = csv;
  } catch (const StreamUnderflow& e) {
    o.result = {{"error", e.what()}};
    o.ok = false;
    o.failure = e.what();
  }
  return o;
}

Outcome cmd_verify_composition(const std::string& source_kind, double delta, std::size_t n,
                               const std::string& message_flag, std::size_t trials, bool enumerate,
                               std::optional<double> declared, std::size_t budget, bool expect_violation,
                               std::uint64_t seed) {
  Outcome o;
  ProtocolPair source;
  std::vector<DistinguisherDef> ds;
  Bits message;
  if (source_kind == "attack") {
    message = message_flag.empty() ? seeded_bits(n + 1, seed ^ 0x9e3779b97f4a7c15ULL)
                                   : bits_option(message_flag, n + 1, "--message");
    const double eps = declared ? *declared : accessible_info_lower(build_attack_state(n).cq, budget, seed).bits;
    source = attack_key_source(n, std::min(1.0, eps));
    ds = {parity_distinguisher(n), majority_distinguisher()};
  } else {
    message = message_flag.empty() ? bits_from_string("101") : bits_from_string(message_flag);
    if (message.empty()) throw std::invalid_argument("--message must not be empty");
    source = source_kind == "biased" ? biased_key_source(message.size(), delta) : perfect_key_source(message.size());
    if (declared) source.declared_eps = *declared;
    ds = {majority_distinguisher(), first_bit_distinguisher()};
  }
  o.params = {{"source", source_kind}, {"message", bits_to_string(message)}, {"trials", trials},
              {"enumerate", enumerate}, {"expect_violation", expect_violation}};
  if (source_kind == "biased") o.params["delta"] = delta;
  if (source_kind == "attack") o.params["n"] = n;
  const CompositionReport r = verify_composition_bound(otp_application(message), source, ds, trials, seed, enumerate);
  o.result = to_json(r);
  if (expect_violation) {
    o.ok = !r.pass;
    if (!o.ok) o.failure = "expected the declared epsilon to be violated, but every advantage is within bound";
  } else {
    o.ok = r.pass;
    if (!o.ok) {
      for (const auto& d : r.distinguishers) {
        if (!d.within_bound) {
          o.failure = "distinguisher '" + d.name + "' exceeds declared epsilon (seed " + std::to_string(d.total.seed) + ")";
          break;
        }
      }
    }
  }
  return o;
}

Outcome cmd_rsa_demo(unsigned bits, std::optional<std::uint64_t> bid, std::size_t auctions, std::uint64_t seed) {
  Outcome o;
  if (auctions == 0) throw std::invalid_argument("--auctions must be positive");
  o.params = {{"modulus_bits", bits}, {"auctions", auctions}};
  if (bid) o.params["bid"] = *bid;
  std::mt19937_64 bid_rng(seed);
  std::size_t wins = 0, ties = 0, failures = 0;
  Json first;
  for (std::size_t k = 0; k < auctions; ++k) {
    const std::uint64_t key_seed = seed + k;
    std::uint64_t m;
    if (bid) {
      m = *bid;
    } else {
      std::mt19937_64 key_rng(key_seed);
      const RsaKey key = generate_rsa_key(bits, key_rng);
      m = std::uniform_int_distribution<std::uint64_t>(1, (key.n - 1) / 2)(bid_rng);
    }
    const AuctionTranscript t = rsa_malleability_demo(bits, m, key_seed);
    if (k == 0) first = to_json(t);
    wins += t.bob_wins;
    ties += t.tie;
    failures += !(t.roundtrip_ok && t.doubling_ok);
  }
  o.result = {{"auctions", auctions}, {"bob_wins", wins}, {"ties", ties}, {"identity_failures", failures},
              {"first_transcript", first}};
  if (failures > 0 || wins + ties != auctions) {
    o.ok = false;
    o.failure = "forged ciphertext did not decrypt to twice the bid in every auction";
  }
  return o;
}

}  // namespace

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

std::string flatten_csv(const Json& j) {
  std::string out = "path,value\r\n";
  flatten(j, "", out);
  return out;
}

void write_atomically(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path + ": " + ec.message());
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Composable-security laboratory for quantum key distribution", "qkdlab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  std::function<Outcome()> action;
  std::string command;

  auto* attack = app.add_subcommand("attack-demo", "One-time pad attack on the parity-encoded key");
  std::size_t attack_n = 4, attack_trials = 10000, attack_budget = 16;
  bool attack_control = false;
  std::string attack_message, state_out;
  attack->add_option("--n", attack_n, "Qubits in E")->check(CLI::Range(2, 7))->capture_default_str();
  attack->add_option("--trials", attack_trials, "Attack runs")->check(CLI::PositiveNumber)->capture_default_str();
  attack->add_option("--budget", attack_budget, "Accessible-information search budget")
      ->check(CLI::PositiveNumber)->capture_default_str();
  attack->add_option("--message", attack_message, "n+1 message bits (default: derived from the seed)");
  attack->add_option("--state-out", state_out, "Also write the attack cq-state as a secrecy state file");
  attack->add_flag("--control", attack_control, "Also run the adversary with complemented bases");
  add_common(attack, common);
  attack->callback([&] {
    command = "attack-demo";
    action = [&] {
      return cmd_attack_demo(attack_n, attack_trials, attack_budget, attack_control, attack_message, state_out,
                             common.seed);
    };
  });

  auto* secrecy = app.add_subcommand("secrecy", "Security report for a cq-state file");
  std::string state_path;
  std::size_t secrecy_budget = 64;
  secrecy->add_option("--state", state_path, "State file (see docs/schema.md)")->required();
  secrecy->add_option("--budget", secrecy_budget, "Accessible-information search budget")
      ->check(CLI::PositiveNumber)->capture_default_str();
  add_common(secrecy, common);
  secrecy->callback([&] {
    command = "secrecy";
    action = [&] { return cmd_secrecy(state_path, secrecy_budget, common.seed); };
  });

  StreamFlags stream;
  auto* kplan = app.add_subcommand("keystream-plan", "Find stream constants meeting a total epsilon");
  double target = 1e-9;
  std::uint64_t horizon = 200;
  kplan->add_option("--target", target, "Target total epsilon")->capture_default_str();
  kplan->add_option("--horizon", horizon, "Rounds summed explicitly")->check(CLI::PositiveNumber)->capture_default_str();
  add_stream_flags(kplan, stream, false);
  add_common(kplan, common);
  kplan->callback([&] {
    command = "keystream-plan";
    action = [&] { return cmd_keystream_plan(target, stream, horizon); };
  });

  auto* ksched = app.add_subcommand("keystream-schedule", "Per-round schedule and epsilon bounds");
  std::uint64_t sched_rounds = 50;
  bool real_mode = false;
  ksched->add_option("--rounds", sched_rounds, "Rounds")->check(CLI::PositiveNumber)->capture_default_str();
  ksched->add_flag("--real", real_mode, "Keep n_i and ell_i real-valued");
  add_stream_flags(ksched, stream, true);
  add_common(ksched, common);
  ksched->callback([&] {
    command = "keystream-schedule";
    action = [&] { return cmd_keystream_schedule(stream, sched_rounds, real_mode); };
  });

  auto* ksim = app.add_subcommand("keystream-simulate", "Mock key stream with bit accounting");
  std::uint64_t sim_rounds = 10000, reserve = 0;
  double abort_prob = 0.1;
  std::string charging = "once";
  bool sim_log = false;
  ksim->add_option("--rounds", sim_rounds, "Rounds")->check(CLI::PositiveNumber)->capture_default_str();
  ksim->add_option("--abort-prob", abort_prob, "Abort probability per attempt")
      ->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  ksim->add_option("--charging", charging, "Authentication charge on retries")
      ->check(CLI::IsMember({"once", "per-attempt"}))->capture_default_str();
  ksim->add_option("--reserve", reserve, "Extra initial key for per-attempt charging")->capture_default_str();
  ksim->add_flag("--log", sim_log, "Include the per-round log in JSON output");
  add_stream_flags(ksim, stream, true);
  add_common(ksim, common);
  ksim->callback([&] {
    command = "keystream-simulate";
    action = [&] {
      return cmd_keystream_simulate(stream, sim_rounds, abort_prob, charging, reserve, sim_log, common.seed);
    };
  });

  auto* vc = app.add_subcommand("verify-composition", "Distinguish one-time pad composed with a key source");
  std::string source_kind = "biased", vc_message;
  double delta = 0.1;
  std::size_t vc_n = 4, vc_trials = 100000, vc_budget = 16;
  bool enumerate = false, expect_violation = false;
  std::optional<double> declared;
  vc->add_option("--source", source_kind, "Key source")
      ->check(CLI::IsMember({"perfect", "biased", "attack"}))->capture_default_str();
  vc->add_option("--delta", delta, "Bias of the biased source")->check(CLI::Range(-0.5, 0.5))->capture_default_str();
  vc->add_option("--n", vc_n, "Qubits for the attack source")->check(CLI::Range(2, 7))->capture_default_str();
  vc->add_option("--message", vc_message, "Message bits");
  vc->add_option("--trials", vc_trials, "Trials per world")->capture_default_str();
  vc->add_option("--declared-eps", declared, "Override the source's declared epsilon");
  vc->add_option("--budget", vc_budget, "Search budget for the attack source's accessible information")
      ->check(CLI::PositiveNumber)->capture_default_str();
  vc->add_flag("--enumerate", enumerate, "Exact enumeration instead of sampling");
  vc->add_flag("--expect-violation", expect_violation, "Succeed only if some distinguisher beats the bound");
  add_common(vc, common);
  vc->callback([&] {
    command = "verify-composition";
    action = [&] {
      return cmd_verify_composition(source_kind, delta, vc_n, vc_message, vc_trials, enumerate, declared, vc_budget,
                                    expect_violation, common.seed);
    };
  });

  auto* rsa = app.add_subcommand("rsa-demo", "Textbook RSA auction forgery");
  unsigned rsa_bits = 32;
  std::optional<std::uint64_t> bid;
  std::size_t auctions = 1;
  rsa->add_option("--bits", rsa_bits, "Modulus bits")->check(CLI::Range(16, 64))->capture_default_str();
  rsa->add_option("--bid", bid, "Alice's bid (default: random below n/2)");
  rsa->add_option("--auctions", auctions, "Auctions, each with a fresh key")->check(CLI::PositiveNumber)->capture_default_str();
  add_common(rsa, common);
  rsa->callback([&] {
    command = "rsa-demo";
    action = [&] { return cmd_rsa_demo(rsa_bits, bid, auctions, common.seed); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  Outcome outcome;
  try {
    outcome = action();
  } catch (const SchemaError& e) {
    err << "qkdlab " << command << ": schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "qkdlab " << command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::length_error& e) {
    err << "qkdlab " << command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "qkdlab " << command << ": " << e.what() << "\n";
    return kExitInvariant;
  }

  Json report{{"command", command}, {"version", kVersion}, {"seed", common.seed},
              {"params", outcome.params}, {"result", outcome.result}, {"ok", outcome.ok}};
  if (common.timestamp) report["timestamp"] = utc_now();
  std::string text;
  if (common.format == "csv") {
    text = outcome.csv.empty() ? flatten_csv(report) : outcome.csv;
  } else {
    text = report.dump(2) + "\n";
  }
  try {
    if (common.out.empty()) {
      out << text;
    } else {
      write_atomically(common.out, text);
    }
  } catch (const std::exception& e) {
    err << "qkdlab " << command << ": " << e.what() << "\n";
    return kExitInvariant;
  }
  if (!outcome.ok) {
    err << "qkdlab " << command << ": " << outcome.failure << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}

}  // namespace qkdlab::cli
