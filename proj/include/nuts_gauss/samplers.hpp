#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nuts_gauss/geometry.hpp"
#include "nuts_gauss/orbit.hpp"

namespace nuts_gauss {

enum class Kernel { NUTS, MultinoulliHMC, UniformHMC };
enum class Jitter { None, PerTransition, PerLeapfrogStep };

std::string_view to_string(Kernel k);
std::string_view to_string(Jitter j);
Kernel parse_kernel(std::string_view name);
Jitter parse_jitter(std::string_view name);

struct SamplerConfig {
  double h = 0.11;
  int k_max = 10;
  Kernel kernel = Kernel::NUTS;
  int fixed_k = -1;  // negative: resolve to k* for the reduced kernels
  Jitter jitter = Jitter::None;
  double jitter_width = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(h > 0 && h < 2)) throw std::invalid_argument("h must lie in (0, 2)");
    if (k_max < 1 || k_max > 30) throw std::invalid_argument("k_max must lie in [1, 30]");
    if (!(jitter_width >= 0 && jitter_width < 0.5)) throw std::invalid_argument("jitter_width must lie in [0, 0.5)");
    if (fixed_k > 30) throw std::invalid_argument("fixed_k must be <= 30");
  }
};

/// Orbit exponent for the reduced kernels: the configured fixed_k, or else k*
/// for the shell (alpha, r) = (3 sqrt d, 3 sqrt d), falling back to delta = 0.
int resolve_fixed_k(const SamplerConfig& cfg, long d);

template <typename S>
struct TransitionRecord {
  Vec<S> start_position;
  Vec<S> velocity;
  IndexOrbit orbit;
  StopReason stop_reason = StopReason::MaxDepth;
  long L = 0;
  double path_length_time = 0;
  Vec<S> end_position;
  double max_abs_energy_error = 0;
  bool a_index_accept = false;
  long gradient_evals = 0;
  double step_size = 0;
  std::vector<bool> direction_bits;

  double norm_sq() const { return static_cast<double>(end_position.squaredNorm()); }
};

/// Index drawn with probability exp(w_i) / sum_j exp(w_j), using
/// max-shifted exponentials and one cumulative scan against u.
template <typename S>
std::size_t multinoulli_sample(std::span<const S> log_weights, double u) {
  if (log_weights.empty()) throw std::invalid_argument("multinoulli_sample: empty weights");
  S top = -std::numeric_limits<S>::infinity();
  for (S w : log_weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("multinoulli_sample: non-finite log weight");
    top = std::max(top, w);
  }
  S total = 0;
  for (S w : log_weights) total += std::exp(w - top);
  const S threshold = static_cast<S>(u) * total;
  S cum = 0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    const S p = std::exp(log_weights[i] - top);
    if (p > 0) last_positive = i;
    cum += p;
    if (cum > threshold) return i;
  }
  return last_positive;
}

/// Same scan over non-negative linear weights (some may be zero).
template <typename S>
std::size_t multinoulli_sample_linear(std::span<const S> weights, double u) {
  if (weights.empty()) throw std::invalid_argument("multinoulli_sample_linear: empty weights");
  S total = 0;
  for (S w : weights) total += w;
  const S threshold = static_cast<S>(u) * total;
  S cum = 0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0) last_positive = i;
    cum += weights[i];
    if (cum > threshold && weights[i] > 0) return i;
  }
  return last_positive;
}

/// |I| min_i w_i / sum_i w_i with w_i = exp(-(E_i - H0)): the mass of the
/// maximal uniform part of the Boltzmann index law.
template <typename S>
double a_index_threshold(std::span<const S> energies, S base_energy) {
  if (energies.empty()) throw std::invalid_argument("a_index_threshold: empty orbit");
  S lo = std::numeric_limits<S>::infinity();
  S hi = -std::numeric_limits<S>::infinity();
  for (S e : energies) {
    lo = std::min(lo, -(e - base_energy));
    hi = std::max(hi, -(e - base_energy));
  }
  S total = 0;
  for (S e : energies) total += std::exp(-(e - base_energy) - hi);
  const double log_threshold = std::log(static_cast<double>(energies.size())) + static_cast<double>(lo - hi) -
                               std::log(static_cast<double>(total));
  return std::min(1.0, std::exp(log_threshold));
}

template <typename S>
bool a_index_event(std::span<const S> energies, S base_energy, double u) {
  return u <= a_index_threshold(energies, base_energy);
}

struct IndexChoice {
  long L = 0;
  bool accept = false;
};

/// Boltzmann index selection realized as the uniform/residual split: with
/// probability equal to the threshold the index is uniform on the orbit,
/// otherwise it is drawn from the residual weights w_i - min w. The mixture
/// is exactly Multinoulli(w).
template <typename S>
IndexChoice select_index_boltzmann(std::span<const S> energies, S base_energy, const IndexOrbit& orbit,
                                   double u_index, double u_accept) {
  IndexChoice out;
  out.accept = a_index_event(energies, base_energy, u_accept);
  const long n = orbit.length();
  if (out.accept) {
    out.L = orbit.min_index + std::min<long>(n - 1, static_cast<long>(u_index * static_cast<double>(n)));
    return out;
  }
  S hi = -std::numeric_limits<S>::infinity();
  S lo = std::numeric_limits<S>::infinity();
  for (S e : energies) {
    hi = std::max(hi, -(e - base_energy));
    lo = std::min(lo, -(e - base_energy));
  }
  std::vector<S> residual(energies.size());
  const S floor = std::exp(lo - hi);
  for (std::size_t i = 0; i < energies.size(); ++i) {
    residual[i] = std::max(S(0), std::exp(-(energies[i] - base_energy) - hi) - floor);
  }
  out.L = orbit.min_index + static_cast<long>(multinoulli_sample_linear<S>(residual, u_index));
  return out;
}

/// Step sizes for one transition: the effective fixed step and, for
/// per-leapfrog-step jitter, a per-edge schedule.
template <typename S>
struct StepPlan {
  S h;
  StepSchedule<S> schedule;
};

/// Draws the step plan for one transition from the jitter stream. Per-step
/// sizes are a hash of (transition key, edge index), so the same edge always
/// gets the same size regardless of materialization order.
template <typename S>
StepPlan<S> make_step_plan(const SamplerConfig& cfg, RandomStream& jitter_stream) {
  const S h = static_cast<S>(cfg.h);
  const S w = static_cast<S>(cfg.jitter_width);
  switch (cfg.jitter) {
    case Jitter::None:
      return {h, {}};
    case Jitter::PerTransition:
      return {h * (1 + w * (2 * static_cast<S>(jitter_stream.uniform01()) - 1)), {}};
    case Jitter::PerLeapfrogStep: {
      const std::uint64_t key = jitter_stream.next_u64();
      return {h, [key, h, w](long edge) {
                const double u = unit_from_bits(splitmix64(key ^ splitmix64(static_cast<std::uint64_t>(edge))));
                return h * (1 + w * (2 * static_cast<S>(u) - 1));
              }};
    }
  }
  return {h, {}};
}

/// One transition of NUTS, Multinoulli HMC or Uniform HMC.
///
/// Randomness is drawn in a fixed order: d Gaussians for the velocity (unless
/// supplied), one uniform per attempted doubling, one uniform for the index,
/// one uniform for the uniform-part event. The reduced kernels draw their
/// orbit from k direction bits the same way NUTS does, so all three kernels
/// agree pathwise whenever NUTS stops at length 2^k and the event holds.
template <typename S, TargetModel<S> T>
class TransitionKernel {
 public:
  explicit TransitionKernel(const T& target) : target_(target) {}

  const T& target() const { return target_; }
  const OrbitStates<S>& states() const { return states_; }

  TransitionRecord<S> nuts(const Vec<S>& x, const SamplerConfig& cfg, RandomStream& rng,
                           const StepPlan<S>& plan) {
    Vec<S> v = rng.standard_normal<S>(x.size());
    return nuts_with_velocity(x, std::move(v), cfg, rng, plan);
  }

  TransitionRecord<S> nuts_with_velocity(const Vec<S>& x, Vec<S> v, const SamplerConfig& cfg, RandomStream& rng,
                                         const StepPlan<S>& plan) {
    TransitionRecord<S> rec = begin(x, std::move(v), plan);
    OrbitSelectionOptions<S> opts;
    opts.schedule = plan.schedule;
    const OrbitSelectionResult sel =
        select_orbit(states_, PhasePoint<S>(rec.start_position, rec.velocity), plan.h, cfg.k_max,
                     [&rng] { return rng.bit(); }, target_, opts);
    rec.orbit = sel.orbit;
    rec.stop_reason = sel.stop_reason;
    rec.direction_bits = sel.direction_bits;
    rec.gradient_evals = sel.gradient_evals;
    finish(rec, rng, plan, /*uniform_index=*/false);
    return rec;
  }

  TransitionRecord<S> uniform_hmc(const Vec<S>& x, int k, RandomStream& rng, const StepPlan<S>& plan) {
    Vec<S> v = rng.standard_normal<S>(x.size());
    return reduced(x, std::move(v), k, rng, plan, true);
  }

  TransitionRecord<S> multinoulli_hmc(const Vec<S>& x, int k, RandomStream& rng, const StepPlan<S>& plan) {
    Vec<S> v = rng.standard_normal<S>(x.size());
    return reduced(x, std::move(v), k, rng, plan, false);
  }

  TransitionRecord<S> reduced(const Vec<S>& x, Vec<S> v, int k, RandomStream& rng, const StepPlan<S>& plan,
                              bool uniform_index) {
    if (k < 0) throw std::invalid_argument("orbit exponent k must be >= 0");
    TransitionRecord<S> rec = begin(x, std::move(v), plan);
    states_.reset(PhasePoint<S>(rec.start_position, rec.velocity), target_);
    IndexOrbit orbit{0, 0};
    for (int j = 0; j < k; ++j) {
      const bool forward = rng.bit();
      rec.direction_bits.push_back(forward);
      if (!forward) orbit.min_index -= orbit.length();
      orbit.log2_length += 1;
    }
    states_.materialize(orbit, plan.h, target_, plan.schedule);
    rec.orbit = orbit;
    rec.stop_reason = StopReason::FixedLength;
    rec.gradient_evals = states_.size() - 1;
    finish(rec, rng, plan, uniform_index);
    return rec;
  }

  TransitionRecord<S> transition(const Vec<S>& x, const SamplerConfig& cfg, int fixed_k, RandomStream& rng,
                                 const StepPlan<S>& plan) {
    switch (cfg.kernel) {
      case Kernel::NUTS: return nuts(x, cfg, rng, plan);
      case Kernel::MultinoulliHMC: return multinoulli_hmc(x, fixed_k, rng, plan);
      case Kernel::UniformHMC: return uniform_hmc(x, fixed_k, rng, plan);
    }
    throw std::logic_error("unknown kernel");
  }

 private:
  TransitionRecord<S> begin(const Vec<S>& x, Vec<S> v, const StepPlan<S>& plan) {
    if (x.size() != target_.dimension() || v.size() != x.size()) {
      throw std::invalid_argument("transition: dimension mismatch");
    }
    TransitionRecord<S> rec;
    rec.start_position = x;
    rec.velocity = std::move(v);
    rec.step_size = static_cast<double>(plan.h);
    return rec;
  }

  void finish(TransitionRecord<S>& rec, RandomStream& rng, const StepPlan<S>& plan, bool uniform_index) {
    const IndexOrbit& orbit = rec.orbit;
    energies_.resize(static_cast<std::size_t>(orbit.length()));
    const S h0 = states_.base_energy();
    double worst = 0;
    for (long i = orbit.min_index; i <= orbit.max_index(); ++i) {
      const S e = states_.energy(i);
      energies_[static_cast<std::size_t>(i - orbit.min_index)] = e;
      worst = std::max(worst, static_cast<double>(std::abs(e - h0)));
    }
    rec.max_abs_energy_error = worst;

    const double u_index = rng.uniform01();
    const double u_accept = rng.uniform01();
    const std::span<const S> en(energies_);
    if (uniform_index) {
      rec.a_index_accept = a_index_event(en, h0, u_accept);
      rec.L = orbit.min_index +
              std::min<long>(orbit.length() - 1, static_cast<long>(u_index * static_cast<double>(orbit.length())));
    } else {
      const IndexChoice choice = select_index_boltzmann(en, h0, orbit, u_index, u_accept);
      rec.a_index_accept = choice.accept;
      rec.L = choice.L;
    }
    rec.end_position = states_.position(rec.L);
    rec.path_length_time = path_time(rec.L, plan);
  }

  static double path_time(long L, const StepPlan<S>& plan) {
    if (!plan.schedule) return static_cast<double>(plan.h) * static_cast<double>(L);
    double t = 0;
    for (long e = 0; e < L; ++e) t += static_cast<double>(plan.schedule(e));
    for (long e = -1; e >= L; --e) t -= static_cast<double>(plan.schedule(e));
    return t;
  }

  T target_;
  OrbitStates<S> states_;
  std::vector<S> energies_;
};

template <typename S, TargetModel<S> T>
TransitionRecord<S> nuts_transition(const Vec<S>& x, const SamplerConfig& cfg, RandomStream& rng, const T& target) {
  TransitionKernel<S, T> kernel(target);
  return kernel.nuts(x, cfg, rng, StepPlan<S>{static_cast<S>(cfg.h), {}});
}

template <typename S, TargetModel<S> T>
TransitionRecord<S> uniform_hmc_transition(const Vec<S>& x, int k, const SamplerConfig& cfg, RandomStream& rng,
                                           const T& target) {
  TransitionKernel<S, T> kernel(target);
  return kernel.uniform_hmc(x, k, rng, StepPlan<S>{static_cast<S>(cfg.h), {}});
}

template <typename S, TargetModel<S> T>
TransitionRecord<S> multinoulli_hmc_transition(const Vec<S>& x, int k, const SamplerConfig& cfg, RandomStream& rng,
                                               const T& target) {
  TransitionKernel<S, T> kernel(target);
  return kernel.multinoulli_hmc(x, k, rng, StepPlan<S>{static_cast<S>(cfg.h), {}});
}

/// Stream tag for the jitter substream of a chain.
inline constexpr std::uint64_t kJitterStreamTag = 0x6a6974746572ULL;

/// Runs one chain of the configured kernel, applying step-size jitter per
/// cfg. Keeps one orbit workspace alive across transitions.
template <typename S, TargetModel<S> T>
class ChainRunner {
 public:
  ChainRunner(const T& target, SamplerConfig cfg, Vec<S> x0, RandomStream rng)
      : cfg_(cfg),
        kernel_(target),
        x_(std::move(x0)),
        rng_(std::move(rng)),
        jitter_rng_(rng_.substream(kJitterStreamTag)) {
    cfg_.validate();
    fixed_k_ = cfg_.kernel == Kernel::NUTS ? 0 : resolve_fixed_k(cfg_, static_cast<long>(target.dimension()));
  }

  const TransitionRecord<S>& step() {
    const StepPlan<S> plan = make_step_plan<S>(cfg_, jitter_rng_);
    last_ = kernel_.transition(x_, cfg_, fixed_k_, rng_, plan);
    x_ = last_.end_position;
    return last_;
  }

  const Vec<S>& position() const { return x_; }
  int fixed_k() const { return fixed_k_; }

 private:
  SamplerConfig cfg_;
  TransitionKernel<S, T> kernel_;
  Vec<S> x_;
  RandomStream rng_;
  RandomStream jitter_rng_;
  int fixed_k_ = 0;
  TransitionRecord<S> last_;
};

/// Iterates the configured kernel n times, calling visit(iter, record) after
/// each transition (iter counts from 1).
template <typename S, TargetModel<S> T, typename Visitor>
void run_chain(const Vec<S>& x0, long n, const SamplerConfig& cfg, RandomStream rng, const T& target,
               Visitor&& visit) {
  if (n < 0) throw std::invalid_argument("run_chain: n must be >= 0");
  ChainRunner<S, T> runner(target, cfg, x0, std::move(rng));
  for (long it = 1; it <= n; ++it) visit(it, runner.step());
}

template <typename S, TargetModel<S> T>
std::vector<TransitionRecord<S>> run_chain(const Vec<S>& x0, long n, const SamplerConfig& cfg, RandomStream rng,
                                           const T& target) {
  if (n < 1) throw std::invalid_argument("run_chain: n must be >= 1");
  std::vector<TransitionRecord<S>> out;
  out.reserve(static_cast<std::size_t>(n));
  run_chain(x0, n, cfg, std::move(rng), target, [&](long, const TransitionRecord<S>& r) { out.push_back(r); });
  return out;
}

/// Path-length law of Uniform HMC: tau_k({t}) = (2^k - |t/h|) / 4^k at
/// t = h n, |n| <= 2^k - 1. Indexed by n + 2^k - 1.
inline std::vector<double> triangular_pmf(int k) {
  const long n = 1L << k;
  std::vector<double> pmf(static_cast<std::size_t>(2 * n - 1));
  const double denom = static_cast<double>(n) * static_cast<double>(n);
  for (long i = -(n - 1); i <= n - 1; ++i) {
    pmf[static_cast<std::size_t>(i + n - 1)] = static_cast<double>(n - std::abs(i)) / denom;
  }
  return pmf;
}

}  // namespace nuts_gauss
