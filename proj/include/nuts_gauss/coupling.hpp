#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <vector>

#include "nuts_gauss/parallel.hpp"
#include "nuts_gauss/samplers.hpp"

namespace nuts_gauss {

/// Two chains driven by one shared stream. Once met, they stay equal.
template <typename S>
struct CoupledPair {
  Vec<S> state_a;
  Vec<S> state_b;
  RandomStream shared_stream;
  bool met = false;

  double distance() const { return static_cast<double>((state_a - state_b).norm()); }
};

/// Set B of path lengths on which the one-shot coupling falls back to
/// synchronous velocities.
using PathSet = std::function<bool(double t)>;

/// B = {t : |sin(beta_h t)| < cutoff}, which covers every multiple of pi.
inline PathSet sine_cutoff_path_set(double h, double cutoff = 0.05) {
  const double beta = LeapfrogConfig<double>(h).beta();
  return [beta, cutoff](double t) { return std::abs(std::sin(beta * t)) < cutoff; };
}

/// sum_t |cos(beta_h t)| tau_k({t}) over the triangular path-length law.
inline double contraction_factor(double h, int k) {
  if (k < 0) throw std::invalid_argument("contraction_factor: k must be >= 0");
  const double beta = LeapfrogConfig<double>(h).beta();
  const std::vector<double> pmf = triangular_pmf(k);
  const long n = 1L << k;
  double total = 0;
  for (long i = -(n - 1); i <= n - 1; ++i) {
    total += std::abs(std::cos(beta * h * static_cast<double>(i))) * pmf[static_cast<std::size_t>(i + n - 1)];
  }
  return total;
}

/// sum_{t not in B} |cot(beta_h t)| tau_k({t}) |x - x~| + tau_k(B).
inline double one_shot_failure_bound(double h, int k, double distance, const PathSet& in_b) {
  const double beta = LeapfrogConfig<double>(h).beta();
  const std::vector<double> pmf = triangular_pmf(k);
  const long n = 1L << k;
  double cot_part = 0;
  double mass_b = 0;
  for (long i = -(n - 1); i <= n - 1; ++i) {
    const double t = h * static_cast<double>(i);
    const double p = pmf[static_cast<std::size_t>(i + n - 1)];
    if (in_b(t)) {
      mass_b += p;
    } else {
      cot_part += std::abs(std::cos(beta * t) / std::sin(beta * t)) * p;
    }
  }
  return cot_part * distance + mass_b;
}

/// P(meet) of a maximal coupling of N(0, I) and N(m, I): 1 - TV = 2 Phi(-|m|/2).
inline double maximal_meeting_probability(double shift_norm) { return 2.0 * normal_cdf(-shift_norm / 2.0); }

template <typename S>
struct CoupledVelocity {
  Vec<S> velocity;
  bool met = false;
};

/// Reflection-maximal coupling: given v ~ N(0, I), returns v~ ~ N(0, I) with
/// v~ = v + m on the largest possible event. The candidate v + m is kept with
/// probability min(1, phi(v + m) / phi(v)); otherwise v + m is reflected
/// across the hyperplane through m/2 orthogonal to m.
template <typename S>
CoupledVelocity<S> maximal_reflection_coupling(const Vec<S>& v, const Vec<S>& m, double u) {
  CoupledVelocity<S> out;
  out.velocity = v + m;
  const S m_sq = m.squaredNorm();
  if (m_sq == 0) {
    out.met = true;
    return out;
  }
  const double log_ratio = -static_cast<double>(v.dot(m) + m_sq / 2);
  if (u <= 0 || std::log(u) <= log_ratio) {
    out.met = true;
    return out;
  }
  const Vec<S> e = m / std::sqrt(m_sq);
  const S offset = (out.velocity - m / 2).dot(e);
  out.velocity -= (2 * offset) * e;
  return out;
}

struct SyncStepInfo {
  double distance_before = 0;
  double distance_after = 0;
  long L_a = 0;
  long L_b = 0;
  double path_time_a = 0;
  double path_time_b = 0;
  long gradient_evals_a = 0;
  long gradient_evals_b = 0;
  bool a_index_accept_a = false;
  bool a_index_accept_b = false;
  StopReason stop_a = StopReason::MaxDepth;
  StopReason stop_b = StopReason::MaxDepth;
};

struct OneShotInfo {
  double path_time = 0;
  long L = 0;
  bool in_b = false;
  bool met = false;
  double shift_norm = 0;
};

/// Coupled transitions of two chains under one SamplerConfig.
template <typename S, TargetModel<S> T>
class CoupledSampler {
 public:
  CoupledSampler(const T& target, SamplerConfig cfg) : cfg_(cfg), kernel_a_(target), kernel_b_(target) {
    cfg_.validate();
    fixed_k_ = cfg_.kernel == Kernel::NUTS ? 0 : resolve_fixed_k(cfg_, static_cast<long>(target.dimension()));
  }

  int fixed_k() const { return fixed_k_; }

  /// Both chains consume identical copies of one child stream: the same
  /// velocity, direction bits, index and event uniforms, and step plan.
  SyncStepInfo synchronous_step(CoupledPair<S>& pair) {
    SyncStepInfo info;
    info.distance_before = pair.distance();
    RandomStream child = pair.shared_stream.fork();
    RandomStream jitter = child.substream(kJitterStreamTag);
    const StepPlan<S> plan = make_step_plan<S>(cfg_, jitter);
    RandomStream stream_a = child;
    RandomStream stream_b = child;
    TransitionRecord<S> rec_a = kernel_a_.transition(pair.state_a, cfg_, fixed_k_, stream_a, plan);
    fill(info, rec_a, true);
    if (pair.met) {
      fill(info, rec_a, false);
      pair.state_a = rec_a.end_position;
      pair.state_b = pair.state_a;
    } else {
      TransitionRecord<S> rec_b = kernel_b_.transition(pair.state_b, cfg_, fixed_k_, stream_b, plan);
      fill(info, rec_b, false);
      pair.state_a = std::move(rec_a.end_position);
      pair.state_b = std::move(rec_b.end_position);
    }
    info.distance_after = pair.distance();
    return info;
  }

  /// One-shot Uniform HMC transition with orbit exponent k (Gaussian target):
  /// both chains share T ~ tau_k; off B the velocities are maximally coupled
  /// so that the chains land on the same point.
  OneShotInfo one_shot_step(CoupledPair<S>& pair, int k, const PathSet& in_b) {
    OneShotInfo info;
    RandomStream child = pair.shared_stream.fork();
    const Index d = pair.state_a.size();
    const Vec<S> v = child.standard_normal<S>(d);
    long min_index = 0;
    for (int j = 0; j < k; ++j) {
      if (!child.bit()) min_index -= 1L << j;
    }
    const long len = 1L << k;
    const double u_index = child.uniform01();
    const double u_couple = child.uniform01();
    info.L = min_index + std::min<long>(len - 1, static_cast<long>(u_index * static_cast<double>(len)));
    info.path_time = cfg_.h * static_cast<double>(info.L);

    const LeapfrogConfig<S> lf(static_cast<S>(cfg_.h));
    const PhasePoint<S> start_a(pair.state_a, v);
    const Vec<S> next_a = gaussian_leapfrog(start_a, lf, info.L).position;
    if (pair.met) {
      pair.state_a = next_a;
      pair.state_b = next_a;
      info.met = true;
      return info;
    }
    const double angle = static_cast<double>(lf.beta()) * info.path_time;
    info.in_b = in_b(info.path_time) || std::sin(angle) == 0.0;
    Vec<S> v_b = v;
    if (!info.in_b) {
      const Vec<S> shift =
          static_cast<S>(std::cos(angle) / std::sin(angle)) * lf.aspect() * (pair.state_a - pair.state_b);
      info.shift_norm = static_cast<double>(shift.norm());
      CoupledVelocity<S> coupled = maximal_reflection_coupling(v, shift, u_couple);
      v_b = std::move(coupled.velocity);
      info.met = coupled.met;
    }
    if (info.met) {
      pair.state_b = next_a;
      pair.met = true;
    } else {
      pair.state_b = gaussian_leapfrog(PhasePoint<S>(pair.state_b, v_b), lf, info.L).position;
    }
    pair.state_a = next_a;
    return info;
  }

 private:
  static void fill(SyncStepInfo& info, const TransitionRecord<S>& rec, bool chain_a) {
    if (chain_a) {
      info.L_a = rec.L;
      info.path_time_a = rec.path_length_time;
      info.gradient_evals_a = rec.gradient_evals;
      info.a_index_accept_a = rec.a_index_accept;
      info.stop_a = rec.stop_reason;
    } else {
      info.L_b = rec.L;
      info.path_time_b = rec.path_length_time;
      info.gradient_evals_b = rec.gradient_evals;
      info.a_index_accept_b = rec.a_index_accept;
      info.stop_b = rec.stop_reason;
    }
  }

  SamplerConfig cfg_;
  TransitionKernel<S, T> kernel_a_;
  TransitionKernel<S, T> kernel_b_;
  int fixed_k_ = 0;
};

struct TraceRow {
  long iter = 0;
  double mean_distance = 0;
  double mean_cum_leapfrog = 0;
  double met_fraction = 0;
};

struct CoupledExperimentOptions {
  long dimension = 100;
  unsigned workers = 1;
  /// Epoch length E > 0: every E-th transition is a one-shot Uniform HMC step
  /// at orbit exponent one_shot_k; 0 disables one-shot steps.
  long epoch = 0;
  int one_shot_k = -1;
  double b_cutoff = 0.05;
};

struct CoupledTrace {
  std::vector<TraceRow> rows;          // iter 0 .. n_iters
  std::map<long, long> index_counts;   // L of chain a -> count
  double h = 0;
};

/// Pairs started from independent Gaussian draws and run synchronously.
/// Reports mean distance, mean cumulative leapfrog steps per chain and the
/// met fraction per iteration, plus the histogram of chain a's indices L.
template <typename S = double>
CoupledTrace coupled_experiment(long n_pairs, long n_iters, const SamplerConfig& cfg,
                                const CoupledExperimentOptions& opts) {
  if (n_pairs < 1) throw std::invalid_argument("coupled_experiment: n_pairs must be >= 1");
  if (n_iters < 0) throw std::invalid_argument("coupled_experiment: n_iters must be >= 0");
  const GaussianTarget<S> target(opts.dimension);
  const std::size_t rows = static_cast<std::size_t>(n_iters + 1);
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(n_pairs), std::vector<double>(rows));
  std::vector<std::vector<double>> cum(static_cast<std::size_t>(n_pairs), std::vector<double>(rows));
  std::vector<std::vector<char>> met(static_cast<std::size_t>(n_pairs), std::vector<char>(rows));
  std::vector<std::map<long, long>> counts(static_cast<std::size_t>(n_pairs));

  parallel_for(n_pairs, opts.workers, [&](long p) {
    const auto pi = static_cast<std::size_t>(p);
    RandomStream root(cfg.seed, static_cast<std::uint64_t>(p));
    RandomStream init_a = root.substream(1);
    RandomStream init_b = root.substream(2);
    CoupledPair<S> pair{init_a.standard_normal<S>(opts.dimension), init_b.standard_normal<S>(opts.dimension),
                        root.substream(3), false};
    CoupledSampler<S, GaussianTarget<S>> sampler(target, cfg);
    const int os_k = opts.epoch <= 0            ? 0
                     : opts.one_shot_k >= 0     ? opts.one_shot_k
                                                : resolve_fixed_k(cfg, opts.dimension);
    const PathSet in_b = sine_cutoff_path_set(cfg.h, opts.b_cutoff);
    double steps = 0;
    dist[pi][0] = pair.distance();
    for (long it = 1; it <= n_iters; ++it) {
      const auto ii = static_cast<std::size_t>(it);
      if (opts.epoch > 0 && it % opts.epoch == 0) {
        const OneShotInfo os = sampler.one_shot_step(pair, os_k, in_b);
        steps += static_cast<double>(std::abs(os.L));
        counts[pi][os.L] += 1;
      } else {
        const SyncStepInfo info = sampler.synchronous_step(pair);
        steps += 0.5 * static_cast<double>(info.gradient_evals_a + info.gradient_evals_b);
        counts[pi][info.L_a] += 1;
      }
      dist[pi][ii] = pair.distance();
      cum[pi][ii] = steps;
      met[pi][ii] = pair.met ? 1 : 0;
    }
  });

  CoupledTrace trace;
  trace.h = cfg.h;
  for (std::size_t it = 0; it < rows; ++it) {
    TraceRow row;
    row.iter = static_cast<long>(it);
    for (long p = 0; p < n_pairs; ++p) {
      const auto pi = static_cast<std::size_t>(p);
      row.mean_distance += dist[pi][it];
      row.mean_cum_leapfrog += cum[pi][it];
      row.met_fraction += met[pi][it];
    }
    row.mean_distance /= static_cast<double>(n_pairs);
    row.mean_cum_leapfrog /= static_cast<double>(n_pairs);
    row.met_fraction /= static_cast<double>(n_pairs);
    trace.rows.push_back(row);
  }
  for (const auto& c : counts) {
    for (const auto& [L, n] : c) trace.index_counts[L] += n;
  }
  return trace;
}

}  // namespace nuts_gauss
