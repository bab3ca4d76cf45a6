#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nuts_gauss/geometry.hpp"

namespace nuts_gauss {

namespace {

constexpr int kMaxIterations = 1000000;
constexpr double kEps = 1e-15;

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * sum;
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double chi_squared_cdf(double x, double dof) { return regularized_gamma_p(dof / 2.0, x / 2.0); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 0.3) {
    // Small-lambda form of the same series, which converges fast there.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double sum = 0;
    for (int j = 1; j <= 50; ++j) {
      const double odd = 2.0 * j - 1.0;
      sum += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
  }
  double sum = 0;
  double sign = 1;
  for (int j = 1; j <= 200; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double distance, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * distance);
}

ChiSquaredStats chi_squared_stats(std::span<const double> samples, double dof) {
  if (samples.empty()) throw std::invalid_argument("chi_squared_stats: no samples");
  ChiSquaredStats out;
  out.n = samples.size();
  for (double s : samples) out.mean += s;
  out.mean /= static_cast<double>(out.n);
  for (double s : samples) out.variance += (s - out.mean) * (s - out.mean);
  out.variance = out.n > 1 ? out.variance / static_cast<double>(out.n - 1) : 0.0;
  out.ks_distance = ks_distance(std::vector<double>(samples.begin(), samples.end()),
                                [dof](double x) { return chi_squared_cdf(x, dof); });
  out.p_value = ks_p_value(out.ks_distance, out.n);
  return out;
}

double gaussian_ks_distance(std::span<const double> samples) {
  return ks_distance(std::vector<double>(samples.begin(), samples.end()), [](double z) { return normal_cdf(z); });
}

}  // namespace nuts_gauss
