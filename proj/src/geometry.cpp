#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nuts_gauss/geometry.hpp"
#include "nuts_gauss/samplers.hpp"

namespace nuts_gauss {

bool in_shell(const VectorRef& x, double alpha) {
  if (alpha < 0) throw std::invalid_argument("in_shell: alpha must be >= 0");
  const double d = static_cast<double>(x.size());
  return std::abs(x.squaredNorm() - d) <= alpha;
}

bool concentration_event(const VectorRef& x, const VectorRef& v, double alpha, double r) {
  const double d = static_cast<double>(x.size());
  if (x.size() != v.size()) throw std::invalid_argument("concentration_event: dimension mismatch");
  if (alpha < 0 || r < 0 || alpha > d || r > d) {
    throw std::invalid_argument("concentration_event: need 0 <= alpha, r <= d");
  }
  return std::abs(v.squaredNorm() - d) <= r && std::abs(x.dot(v)) <= r;
}

double shell_delta(double alpha, double r, double d, double h) {
  return std::numbers::pi / 2.0 * (5.0 * std::max(alpha, r) / d + h * h);
}

double ShellParams::event_probability_bound() const { return 1.0 - 4.0 * std::exp(-r * r / (8.0 * d)); }

double ShellParams::index_rejection_bound() const {
  return h * h * std::max(alpha, r) + std::pow(h, 4) * d / 4.0;
}

std::optional<int> k_star(double h, double delta) {
  if (!(h > 0)) throw std::invalid_argument("k_star: h must be positive");
  const double lo = std::numbers::pi + delta;
  const double hi = 2.0 * std::numbers::pi - delta;
  for (int k = 1; k < 62; ++k) {
    const double t = h * (std::ldexp(1.0, k) - 1.0);
    if (t >= hi) break;
    if (t > lo) return k;
  }
  return std::nullopt;
}

StepsizeReport stepsize_condition_check(double h, double delta, int k_max) {
  if (!(h > 0)) throw std::invalid_argument("stepsize_condition_check: h must be positive");
  if (delta < 0) throw std::invalid_argument("stepsize_condition_check: delta must be >= 0");
  StepsizeReport report;
  report.h = h;
  report.delta = delta;
  report.k_max = k_max;
  for (int k = 1; k <= k_max; ++k) {
    const double t = h * (std::ldexp(1.0, k) - 1.0);
    const bool near_zero = t > 0 && t < delta;
    const bool near_pi = t > std::numbers::pi - delta && t <= std::numbers::pi + delta;
    if (near_zero || near_pi) report.offending_k.push_back(k);
  }
  report.k_star = k_star(h, delta);
  report.pass = report.offending_k.empty();
  return report;
}

MixingBoundResult mixing_bound(const MixingBoundParams& p, double p_reject) {
  if (!(p.b > 0) || !(p.epsilon > 0 && p.epsilon < 1) || p.epoch < 1) {
    throw std::invalid_argument("mixing_bound: need b > 0, epsilon in (0,1), epoch >= 1");
  }
  MixingBoundResult out;
  out.lhs = 2.0 * static_cast<double>(p.epoch) * p_reject +
            p.c_reg * p.diameter * std::exp(-p.rho * static_cast<double>(p.epoch - 1)) + p.b;
  out.rhs = 1.0 - p.c;
  out.feasible = out.lhs <= out.rhs;
  // Guard against log(2/eps)/b landing a hair above an integer from rounding.
  const double raw = std::log(2.0 / p.epsilon) / p.b;
  out.epochs = static_cast<long>(std::ceil(raw - 1e-12 * std::max(1.0, raw)));
  out.horizon = p.epoch * out.epochs;
  return out;
}

ExitTimeResult exit_time_experiment(StartLaw law, double alpha0, double r, int n_steps, const SamplerConfig& cfg,
                                    long d, long replicas) {
  cfg.validate();
  if (alpha0 < 0 || r < 0 || n_steps < 0 || d < 1 || replicas < 1) {
    throw std::invalid_argument("exit_time_experiment: invalid arguments");
  }
  const double dd = static_cast<double>(d);
  const double growth = r + cfg.h * cfg.h * dd;
  const double base = std::max(alpha0, r);
  if (n_steps >= 1 && base + (n_steps - 1) * growth > dd) {
    throw std::invalid_argument("exit_time_experiment: need max(alpha0, r) + (n - 1)(r + h^2 d) <= d");
  }
  ExitTimeResult out;
  out.replicas = replicas;
  out.alpha_n = base + n_steps * growth;
  out.bound = 4.0 * n_steps * std::exp(-r * r / (8.0 * dd));

  const GaussianTarget<double> target(d);
  Eigen::VectorXd point_mass;
  if (law == StartLaw::PointMass) {
    RandomStream init(cfg.seed, 0x706f696e74ULL);
    point_mass = init.standard_normal(d);
    point_mass *= std::sqrt(dd) / point_mass.norm();
  }
  const int k = cfg.kernel == Kernel::NUTS ? 0 : resolve_fixed_k(cfg, d);
  const bool closed_form = cfg.kernel == Kernel::UniformHMC && cfg.jitter == Jitter::None;
  const LeapfrogConfig<double> lf(cfg.h);

  for (long rep = 0; rep < replicas; ++rep) {
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(rep) + 1);
    Eigen::VectorXd x;
    if (law == StartLaw::PointMass) {
      x = point_mass;
    } else {
      RandomStream init = rng.substream(0x696e6974ULL);
      do {
        x = init.standard_normal(d);
      } while (!in_shell(x, alpha0));
    }
    bool exited = !in_shell(x, out.alpha_n);
    if (closed_form) {
      for (int step = 0; step < n_steps && !exited; ++step) {
        const Eigen::VectorXd v = rng.standard_normal(d);
        long min_index = 0;
        for (int j = 0; j < k; ++j) {
          if (!rng.bit()) min_index -= 1L << j;
        }
        const long len = 1L << k;
        const double u_index = rng.uniform01();
        rng.uniform01();  // uniform-part event draw, unused here
        const long L = min_index + std::min<long>(len - 1, static_cast<long>(u_index * static_cast<double>(len)));
        x = gaussian_leapfrog(PhasePoint<double>(x, v), lf, L).position;
        exited = !in_shell(x, out.alpha_n);
      }
    } else if (!exited && n_steps > 0) {
      ChainRunner<double, GaussianTarget<double>> runner(target, cfg, x, rng);
      for (int step = 0; step < n_steps && !exited; ++step) {
        exited = !in_shell(runner.step().end_position, out.alpha_n);
      }
    }
    if (exited) ++out.exits;
  }
  out.estimate = static_cast<double>(out.exits) / static_cast<double>(replicas);
  return out;
}

}  // namespace nuts_gauss
