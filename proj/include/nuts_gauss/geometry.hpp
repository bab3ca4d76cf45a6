#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nuts_gauss {

struct SamplerConfig;

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// x in D_alpha, i.e. ||x|^2 - d| <= alpha.
bool in_shell(const VectorRef& x, double alpha);

/// Velocity concentration event at the realized position:
/// ||v|^2 - d| <= r and |x.v| <= r.
bool concentration_event(const VectorRef& x, const VectorRef& v, double alpha, double r);

/// delta = (pi/2)(5 max(alpha, r)/d + h^2).
double shell_delta(double alpha, double r, double d, double h);

/// Gaussian-shell geometry (alpha, r) at dimension d and step size h.
struct ShellParams {
  double alpha;
  double r;
  double d;
  double h;

  double delta() const { return shell_delta(alpha, r, d, h); }
  /// Probability lower bound for the concentration event, 1 - 4 exp(-r^2/8d).
  double event_probability_bound() const;
  /// Upper bound on the rejection probability h^2 max(alpha, r) + h^4 d / 4
  /// (index part only; add 1 - event_probability_bound() for the full bound).
  double index_rejection_bound() const;
};

/// The k with h(2^k - 1) in (pi + delta, 2 pi - delta), if any.
std::optional<int> k_star(double h, double delta);

struct StepsizeReport {
  double h = 0;
  double delta = 0;
  int k_max = 0;
  std::vector<int> offending_k;
  std::optional<int> k_star;
  bool pass = true;
};

/// Flags every k in 1..k_max with h(2^k - 1) in (0, delta) or (pi - delta, pi + delta].
StepsizeReport stepsize_condition_check(double h, double delta, int k_max);

struct MixingBoundParams {
  double rho = 0;
  double c_reg = 0;
  double c = 0;
  double b = 0;
  long epoch = 1;
  double epsilon = 0.01;
  double diameter = 0;
};

struct MixingBoundResult {
  bool feasible = false;
  double lhs = 0;  // 2 E p + C_reg diam exp(-rho (E - 1)) + b
  double rhs = 0;  // 1 - c
  long epochs = 0; // ceil(log(2/eps) / b)
  long horizon = 0;
};

MixingBoundResult mixing_bound(const MixingBoundParams& params, double p_reject);

// Chi-squared and Kolmogorov-Smirnov machinery.

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double chi_squared_cdf(double x, double dof);
double normal_cdf(double z);
/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_survival(double lambda);
/// Asymptotic p-value of a one-sample KS distance over n samples.
double ks_p_value(double distance, std::size_t n);

template <typename Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf);

struct ChiSquaredStats {
  double ks_distance = 0;
  double p_value = 0;
  double mean = 0;
  double variance = 0;
  std::size_t n = 0;
};

ChiSquaredStats chi_squared_stats(std::span<const double> samples, double dof);

/// KS distance of the samples against N(0, 1).
double gaussian_ks_distance(std::span<const double> samples);

enum class StartLaw { PointMass, Gaussian };

struct ExitTimeResult {
  long replicas = 0;
  long exits = 0;
  double estimate = 0;
  double bound = 0;    // 4 n exp(-r^2 / 8d)
  double alpha_n = 0;  // max(alpha0, r) + n (r + h^2 d)
};

/// Monte Carlo estimate of P(T <= n) for exit from D_{max(alpha0,r) + n(r + h^2 d)}.
ExitTimeResult exit_time_experiment(StartLaw law, double alpha0, double r, int n_steps, const SamplerConfig& cfg,
                                    long d, long replicas);

// Template definitions.

template <typename Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    worst = std::max({worst, f - lo, hi - f});
  }
  return worst;
}

}  // namespace nuts_gauss
