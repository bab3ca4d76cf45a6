#include "nuts_gauss/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "nuts_gauss/coupling.hpp"
#include "nuts_gauss/experiments.hpp"
#include "nuts_gauss/geometry.hpp"
#include "nuts_gauss/parallel.hpp"
#include "nuts_gauss/records_io.hpp"

#ifndef NUTS_GAUSS_VERSION
#define NUTS_GAUSS_VERSION "0.0.0"
#endif

namespace nuts_gauss {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view version() { return NUTS_GAUSS_VERSION; }

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("NUTS_GAUSS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("NUTS_GAUSS_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

struct SamplerFlags {
  long d = 10000;
  double h = 0.11;
  int k_max = 10;
  std::string kernel = "nuts";
  int fixed_k = -1;
  std::string jitter = "none";
  double jitter_width = 0.1;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out_dir = ".";

  SamplerConfig config() const {
    SamplerConfig cfg;
    cfg.h = h;
    cfg.k_max = k_max;
    cfg.kernel = parse_kernel(kernel);
    cfg.fixed_k = fixed_k;
    cfg.jitter = parse_jitter(jitter);
    cfg.jitter_width = jitter_width;
    cfg.seed = seed;
    cfg.validate();
    if (d < 1) throw std::invalid_argument("--d must be >= 1");
    return cfg;
  }
};

void add_common(CLI::App* sub, SamplerFlags& f) {
  sub->add_option("--d", f.d, "dimension")->check(CLI::PositiveNumber);
  sub->add_option("--h", f.h, "leapfrog step size");
  sub->add_option("--kmax", f.k_max, "maximal doubling depth");
  sub->add_option("--kernel", f.kernel, "nuts | multinoulli | uniform");
  sub->add_option("--fixed-k", f.fixed_k, "orbit exponent of the reduced kernels (default k*)");
  sub->add_option("--jitter", f.jitter, "none | transition | leapfrog");
  sub->add_option("--jitter-width", f.jitter_width, "relative half-width of the step-size jitter");
  sub->add_option("--seed", f.seed, "random seed (default $NUTS_GAUSS_SEED or 0)");
  sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out_dir, "output directory");
}

json config_echo(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      std::string joined;
      for (const std::string& r : opt->results()) joined += (joined.empty() ? "" : " ") + r;
      cfg[name] = opt->get_type_size() == 0 && joined.empty() ? "true" : joined;
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

class Run {
 public:
  Run(const CLI::App* sub, std::uint64_t seed) : sub_(sub), seed_(seed), start_(std::chrono::steady_clock::now()) {}

  fs::path output(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    outputs_.push_back(name);
    return dir / name;
  }

  void write_manifest(const fs::path& dir, json extra = json::object()) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["command"] = sub_->get_name();
    m["config"] = config_echo(sub_);
    m["seed"] = seed_;
    m["version"] = std::string(version());
    m["duration_seconds"] = seconds;
    m["outputs"] = outputs_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    fs::create_directories(dir);
    std::ofstream(dir / (sub_->get_name() + ".manifest.json")) << m.dump(2) << '\n';
  }

 private:
  const CLI::App* sub_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> outputs_;
};

std::ofstream open_csv(const fs::path& path, std::string_view header) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << header << '\n';
  return f;
}

std::pair<int, int> parse_k_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const int k = std::stoi(s);
      return {k, k};
    }
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("--k-range must look like LO:HI, got '" + s + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Reads key=value lines and appends --key=value for every key the command
/// line does not already set and the chosen subcommand understands.
std::vector<std::string> merge_config(std::vector<std::string> args, const CLI::App& app) {
  std::optional<std::string> path;
  std::string sub_name;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (sub_name.empty() && !args[i].empty() && args[i][0] != '-') sub_name = args[i];
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw std::invalid_argument("cannot read config file " + *path);
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == sub_name) sub = s;
  }
  if (sub == nullptr) return args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(*path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    const std::string flag = "--" + key;
    if (sub->get_option_no_throw(flag) == nullptr) continue;
    const bool on_command_line = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!on_command_line) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sampler laboratory for NUTS and its reduced kernels on the canonical Gaussian", "nuts-gauss"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));
  app.option_defaults()->always_capture_default();
  std::string config_path;

  std::uint64_t seed0 = 0;
  try {
    seed0 = default_seed();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  // simulate
  SamplerFlags sim;
  sim.seed = seed0;
  sim.workers = default_workers();
  long sim_chains = 100;
  long sim_iters = 50;
  long sim_burn = 0;
  std::string sim_start = "fixed";
  CLI::App* simulate = app.add_subcommand("simulate", "run independent chains and record |x|^2 per iteration");
  add_common(simulate, sim);
  simulate->add_option("--n-chains", sim_chains)->check(CLI::PositiveNumber);
  simulate->add_option("--n-iters", sim_iters)->check(CLI::NonNegativeNumber);
  simulate->add_option("--burn-in", sim_burn, "drop iterations 1..burn-in")->check(CLI::NonNegativeNumber);
  simulate->add_option("--start", sim_start, "fixed (one shared draw) | gaussian (independent draws)")
      ->check(CLI::IsMember({"fixed", "gaussian"}));
  simulate->add_option("--config", config_path, "key=value config file");

  // couple
  SamplerFlags cpl;
  cpl.seed = seed0;
  cpl.workers = default_workers();
  long cpl_pairs = 100;
  long cpl_iters = 50;
  long cpl_epoch = 0;
  int cpl_one_shot_k = -1;
  double cpl_cutoff = 0.05;
  CLI::App* couple = app.add_subcommand("couple", "synchronously coupled chains: distance trace and path lengths");
  add_common(couple, cpl);
  couple->add_option("--n-pairs", cpl_pairs)->check(CLI::PositiveNumber);
  couple->add_option("--n-iters", cpl_iters)->check(CLI::NonNegativeNumber);
  couple->add_option("--epoch", cpl_epoch, "one-shot step every EPOCH transitions (0: never)")
      ->check(CLI::NonNegativeNumber);
  couple->add_option("--one-shot-k", cpl_one_shot_k, "orbit exponent of one-shot steps (default k*)");
  couple->add_option("--b-cutoff", cpl_cutoff, "|sin(beta t)| cutoff defining the fallback set B");
  couple->add_option("--config", config_path, "key=value config file");

  // uturn-scan
  long scan_d = 10000;
  double scan_h = 0.11;
  double scan_alpha = -1;
  double scan_r = -1;
  std::string scan_range = "1:8";
  long scan_draws = 1;
  bool scan_event_only = false;
  std::uint64_t scan_seed = seed0;
  std::string scan_out = ".";
  CLI::App* scan = app.add_subcommand("uturn-scan", "U-turn dot products against sin(time)");
  scan->add_option("--d", scan_d)->check(CLI::PositiveNumber);
  scan->add_option("--h", scan_h);
  scan->add_option("--alpha", scan_alpha, "shell width (default 3 sqrt d)");
  scan->add_option("--r", scan_r, "velocity event width (default 3 sqrt d)");
  scan->add_option("--k-range", scan_range, "LO:HI");
  scan->add_option("--n-draws", scan_draws)->check(CLI::PositiveNumber);
  scan->add_flag("--event-only", scan_event_only, "redraw until x is in the shell and (x, v) in the event");
  scan->add_option("--seed", scan_seed);
  scan->add_option("--out", scan_out, "output directory");
  scan->add_option("--config", config_path, "key=value config file");

  // check-stepsize
  double cs_h = 0.11;
  double cs_delta = 0;
  int cs_kmax = 10;
  long cs_d = 0;
  std::string cs_out;
  CLI::App* check = app.add_subcommand("check-stepsize", "flag doubling exponents too close to 0 or pi");
  check->add_option("--h", cs_h);
  auto* cs_delta_opt = check->add_option("--delta", cs_delta);
  check->add_option("--kmax", cs_kmax);
  check->add_option("--d", cs_d, "derive delta from the shell 3 sqrt d when --delta is absent");
  check->add_option("--out", cs_out, "also write JSON and manifest to this directory");
  check->add_option("--config", config_path, "key=value config file");

  // kstar
  double ks_h = 0.11;
  double ks_delta = 0;
  std::string ks_out;
  CLI::App* kstar = app.add_subcommand("kstar", "doubling exponent landing in (pi + delta, 2 pi - delta)");
  kstar->add_option("--h", ks_h);
  kstar->add_option("--delta", ks_delta);
  kstar->add_option("--out", ks_out);
  kstar->add_option("--config", config_path, "key=value config file");

  // bound
  MixingBoundParams bp;
  bp.epoch = 10;
  bp.b = 0.1;
  double bp_reject = 0;
  std::string bp_out;
  CLI::App* bound = app.add_subcommand("bound", "mixing-time horizon and feasibility");
  bound->add_option("--epoch", bp.epoch)->check(CLI::PositiveNumber);
  bound->add_option("--b", bp.b);
  bound->add_option("--eps", bp.epsilon);
  bound->add_option("--rho", bp.rho);
  bound->add_option("--c-reg", bp.c_reg);
  bound->add_option("--c", bp.c);
  bound->add_option("--diameter", bp.diameter);
  bound->add_option("--p-reject", bp_reject);
  bound->add_option("--out", bp_out);
  bound->add_option("--config", config_path, "key=value config file");

  // fix
  SamplerFlags fx;
  fx.h = 0.1;
  fx.jitter = "transition";
  fx.seed = seed0;
  fx.workers = default_workers();
  long fx_chains = 50;
  long fx_iters = 100;
  CLI::App* fix = app.add_subcommand("fix", "orbit lengths with and without step-size jitter");
  add_common(fix, fx);
  fix->add_option("--n-chains", fx_chains)->check(CLI::PositiveNumber);
  fix->add_option("--n-iters", fx_iters)->check(CLI::NonNegativeNumber);
  fix->add_option("--config", config_path, "key=value config file");

  std::vector<std::string> args;
  try {
    args = merge_config(raw_args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (simulate->parsed()) {
      const SamplerConfig cfg = sim.config();
      Run run(simulate, cfg.seed);
      SimulateOptions opts;
      opts.dimension = sim.d;
      opts.n_chains = sim_chains;
      opts.n_iters = sim_iters;
      opts.burn_in = sim_burn;
      opts.start = sim_start == "fixed" ? StartMode::Fixed : StartMode::Gaussian;
      opts.workers = sim.workers;
      const std::vector<ChainRow> rows = simulate_chains(cfg, opts);
      std::ofstream f = open_csv(run.output(sim.out_dir, "simulate.csv"), kSimulateHeader);
      for (const ChainRow& r : rows) {
        f << r.chain << ',' << r.iter << ',' << format_real(r.norm_sq) << ',' << to_string(r.stop_reason) << ','
          << r.orbit_k << ',' << r.grad_evals << '\n';
      }
      f.close();
      json extra;
      if (cfg.kernel != Kernel::NUTS) extra["fixed_k"] = resolve_fixed_k(cfg, sim.d);
      run.write_manifest(sim.out_dir, extra);
      return 0;
    }

    if (couple->parsed()) {
      const SamplerConfig cfg = cpl.config();
      Run run(couple, cfg.seed);
      CoupledExperimentOptions opts;
      opts.dimension = cpl.d;
      opts.workers = cpl.workers;
      opts.epoch = cpl_epoch;
      opts.one_shot_k = cpl_one_shot_k;
      opts.b_cutoff = cpl_cutoff;
      const CoupledTrace trace = coupled_experiment<double>(cpl_pairs, cpl_iters, cfg, opts);
      std::ofstream t(run.output(cpl.out_dir, "couple_trace.csv"));
      write_trace(t, trace);
      t.close();
      std::ofstream hist(run.output(cpl.out_dir, "couple_histogram.csv"));
      write_histogram(hist, trace);
      hist.close();
      run.write_manifest(cpl.out_dir);
      return 0;
    }

    if (scan->parsed()) {
      Run run(scan, scan_seed);
      const auto [k_lo, k_hi] = parse_k_range(scan_range);
      if (k_lo < 0 || k_hi < k_lo || k_hi > 24) throw std::invalid_argument("--k-range must satisfy 0 <= LO <= HI <= 24");
      const double dd = static_cast<double>(scan_d);
      const double alpha = scan_alpha >= 0 ? scan_alpha : std::min(3.0 * std::sqrt(dd), dd);
      const double r = scan_r >= 0 ? scan_r : std::min(3.0 * std::sqrt(dd), dd);
      const LeapfrogConfig<double> lf(scan_h);
      const GaussianTarget<double> target(scan_d);
      std::ofstream f = open_csv(run.output(scan_out, "uturn_scan.csv"), kSineScanHeader);
      long in_event = 0;
      for (long i = 0; i < scan_draws; ++i) {
        RandomStream rng(scan_seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd x;
        Eigen::VectorXd v;
        bool event = false;
        for (int attempt = 0; attempt < 100000; ++attempt) {
          x = rng.standard_normal(scan_d);
          v = rng.standard_normal(scan_d);
          event = in_shell(x, alpha) && concentration_event(x, v, alpha, r);
          if (event || !scan_event_only) break;
        }
        if (scan_event_only && !event) throw std::runtime_error("no draw landed in the concentration event");
        if (event) ++in_event;
        write_sine_scan_rows(f, uturn_sine_scan(PhasePoint<double>(x, v), lf, k_lo, k_hi, target));
      }
      f.close();
      json extra;
      extra["delta"] = shell_delta(alpha, r, dd, scan_h);
      extra["draws_in_event"] = in_event;
      run.write_manifest(scan_out, extra);
      return 0;
    }

    if (check->parsed()) {
      double delta = cs_delta;
      if (cs_delta_opt->count() == 0 && cs_d > 0) {
        const double dd = static_cast<double>(cs_d);
        const double w = std::min(3.0 * std::sqrt(dd), dd);
        delta = shell_delta(w, w, dd, cs_h);
      }
      const StepsizeReport rep = stepsize_condition_check(cs_h, delta, cs_kmax);
      json j;
      j["h"] = rep.h;
      j["delta"] = rep.delta;
      j["k_max"] = rep.k_max;
      j["offending_k"] = rep.offending_k;
      j["k_star"] = rep.k_star ? json(*rep.k_star) : json(nullptr);
      j["pass"] = rep.pass;
      out << j.dump() << '\n';
      if (!cs_out.empty()) {
        Run run(check, 0);
        std::ofstream(run.output(cs_out, "check_stepsize.json")) << j.dump(2) << '\n';
        run.write_manifest(cs_out);
      }
      return 0;
    }

    if (kstar->parsed()) {
      const std::optional<int> k = k_star(ks_h, ks_delta);
      json j;
      j["h"] = ks_h;
      j["delta"] = ks_delta;
      j["k_star"] = k ? json(*k) : json(nullptr);
      j["time"] = k ? json(ks_h * (std::ldexp(1.0, *k) - 1.0)) : json(nullptr);
      out << j.dump() << '\n';
      if (!ks_out.empty()) {
        Run run(kstar, 0);
        std::ofstream(run.output(ks_out, "kstar.json")) << j.dump(2) << '\n';
        run.write_manifest(ks_out);
      }
      return 0;
    }

    if (bound->parsed()) {
      const MixingBoundResult res = mixing_bound(bp, bp_reject);
      json j;
      j["feasible"] = res.feasible;
      j["lhs"] = res.lhs;
      j["rhs"] = res.rhs;
      j["epochs"] = res.epochs;
      j["horizon"] = res.horizon;
      out << j.dump() << '\n';
      if (!bp_out.empty()) {
        Run run(bound, 0);
        std::ofstream(run.output(bp_out, "bound.json")) << j.dump(2) << '\n';
        run.write_manifest(bp_out);
      }
      return 0;
    }

    if (fix->parsed()) {
      const SamplerConfig cfg = fx.config();
      Run run(fix, cfg.seed);
      SimulateOptions opts;
      opts.dimension = fx.d;
      opts.n_chains = fx_chains;
      opts.n_iters = fx_iters;
      opts.start = StartMode::Gaussian;
      opts.workers = fx.workers;
      const std::vector<ChainRow> rows = simulate_chains(cfg, opts);
      std::ofstream f = open_csv(run.output(fx.out_dir, "fix.csv"), kFixHeader);
      long max_depth = 0;
      for (const ChainRow& r : rows) {
        f << r.chain << ',' << r.iter << ',' << (1L << r.orbit_k) << ',' << to_string(r.stop_reason) << '\n';
        if (r.stop_reason == StopReason::MaxDepth) ++max_depth;
      }
      f.close();
      json extra;
      extra["max_depth_fraction"] = rows.empty() ? 0.0 : static_cast<double>(max_depth) / rows.size();
      run.write_manifest(fx.out_dir, extra);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace nuts_gauss
