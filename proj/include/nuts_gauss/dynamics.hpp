#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "nuts_gauss/random.hpp"

namespace nuts_gauss {

/// Position/velocity pair in 2d-dimensional phase space.
template <typename S>
struct PhasePoint {
  Vec<S> position;
  Vec<S> velocity;

  PhasePoint() = default;
  PhasePoint(Vec<S> x, Vec<S> v) : position(std::move(x)), velocity(std::move(v)) {
    if (position.size() != velocity.size() || position.size() < 1) {
      throw std::invalid_argument("PhasePoint: position and velocity must have equal length >= 1");
    }
  }

  Index dimension() const { return position.size(); }

  bool finite() const { return position.allFinite() && velocity.allFinite(); }
};

/// Canonical Gaussian target U(x) = |x|^2 / 2.
template <typename S>
struct GaussianTarget {
  Index dim;

  static constexpr bool closed_form_flow_available = true;

  explicit GaussianTarget(Index d) : dim(d) {
    if (d < 1) throw std::invalid_argument("GaussianTarget: dimension must be positive");
  }
  Index dimension() const { return dim; }
  S potential(const Vec<S>& x) const { return S(0.5) * x.squaredNorm(); }
  template <typename Out>
  void gradient(const Vec<S>& x, Out&& grad) const { grad = x; }
};

/// Target given by user-supplied potential and gradient callables.
template <typename S>
struct FunctionTarget {
  Index dim;
  std::function<S(const Vec<S>&)> potential_fn;
  std::function<Vec<S>(const Vec<S>&)> gradient_fn;

  static constexpr bool closed_form_flow_available = false;

  Index dimension() const { return dim; }
  S potential(const Vec<S>& x) const { return potential_fn(x); }
  template <typename Out>
  void gradient(const Vec<S>& x, Out&& grad) const { grad = gradient_fn(x); }
};

template <typename T, typename S>
concept TargetModel = requires(const T& t, const Vec<S>& x, Vec<S>& g) {
  { t.dimension() } -> std::convertible_to<Index>;
  { t.potential(x) } -> std::convertible_to<S>;
  t.gradient(x, g);
};

/// Largest relative discrepancy between the target's gradient and central
/// finite differences of its potential at x.
template <typename S, TargetModel<S> T>
S gradient_check(const T& target, const Vec<S>& x, S eps = S(1e-6)) {
  Vec<S> grad(x.size());
  target.gradient(x, grad);
  Vec<S> xp = x;
  S worst = 0;
  for (Index i = 0; i < x.size(); ++i) {
    const S xi = xp[i];
    xp[i] = xi + eps;
    const S up = target.potential(xp);
    xp[i] = xi - eps;
    const S down = target.potential(xp);
    xp[i] = xi;
    const S fd = (up - down) / (2 * eps);
    const S scale = std::max({std::abs(fd), std::abs(grad[i]), S(1)});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

/// arccos with the argument clamped to [-1, 1] when it overshoots by at most
/// 1e-15; anything further out is a domain error.
template <typename S>
S clamped_acos(S arg) {
  constexpr S slack = S(1e-15);
  if (arg > S(1)) {
    if (arg - S(1) > slack) throw std::domain_error("acos argument above 1");
    arg = S(1);
  } else if (arg < S(-1)) {
    if (S(-1) - arg > slack) throw std::domain_error("acos argument below -1");
    arg = S(-1);
  }
  return std::acos(arg);
}

/// Leapfrog step size together with the angular rate of the Gaussian
/// leapfrog rotation, beta_h = arccos(1 - h^2/2) / h.
template <typename S>
struct LeapfrogConfig {
  S h;

  explicit LeapfrogConfig(S step) : h(step) {
    if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("step size must be positive and finite");
  }

  bool gaussian_stable() const { return h < S(2); }

  S beta() const {
    if (!gaussian_stable()) throw std::domain_error("closed-form Gaussian leapfrog requires h < 2");
    return clamped_acos(S(1) - h * h / 2) / h;
  }

  /// sqrt(1 - h^2/4), the aspect ratio of the leapfrog ellipse.
  S aspect() const { return std::sqrt(S(1) - h * h / 4); }
};

template <typename S, TargetModel<S> T>
S hamiltonian(const PhasePoint<S>& p, const T& target) {
  if (p.dimension() != target.dimension()) throw std::invalid_argument("hamiltonian: dimension mismatch");
  return target.potential(p.position) + S(0.5) * p.velocity.squaredNorm();
}

template <typename S>
S hamiltonian(const PhasePoint<S>& p) {
  return S(0.5) * (p.position.squaredNorm() + p.velocity.squaredNorm());
}

/// In-place leapfrog step of (signed) size h. `grad` is scratch space.
template <typename S, TargetModel<S> T, typename XType, typename VType>
void leapfrog_inplace(XType&& x, VType&& v, S h, const T& target, Vec<S>& grad) {
  const S half = h / 2;
  if constexpr (std::is_same_v<T, GaussianTarget<S>>) {
    v.noalias() -= half * x;
    x.noalias() += h * v;
    v.noalias() -= half * x;
  } else {
    Vec<S> xv = x;
    target.gradient(xv, grad);
    if (!grad.allFinite()) throw std::domain_error("leapfrog: non-finite gradient");
    v.noalias() -= half * grad;
    x.noalias() += h * v;
    xv = x;
    target.gradient(xv, grad);
    if (!grad.allFinite()) throw std::domain_error("leapfrog: non-finite gradient");
    v.noalias() -= half * grad;
  }
}

/// One leapfrog step: velocity half step, position step, velocity half step.
template <typename S, TargetModel<S> T>
PhasePoint<S> leapfrog_step(const PhasePoint<S>& p, const LeapfrogConfig<S>& cfg, const T& target) {
  if (p.dimension() != target.dimension()) throw std::invalid_argument("leapfrog_step: dimension mismatch");
  PhasePoint<S> out = p;
  Vec<S> grad(p.dimension());
  leapfrog_inplace(out.position, out.velocity, cfg.h, target, grad);
  return out;
}

/// Closed-form Gaussian leapfrog iterate after `steps` steps (negative steps
/// run backward in time). The leapfrog map is an elliptical rotation with
/// angle beta_h * steps * h.
template <typename S>
PhasePoint<S> gaussian_leapfrog(const PhasePoint<S>& p, const LeapfrogConfig<S>& cfg, long steps) {
  const S t = static_cast<S>(steps) * cfg.h;
  const S angle = cfg.beta() * t;
  const S c = std::cos(angle);
  const S s = std::sin(angle);
  const S a = cfg.aspect();
  PhasePoint<S> out;
  out.position = c * p.position + (s / a) * p.velocity;
  out.velocity = (-s * a) * p.position + c * p.velocity;
  return out;
}

/// Exact Hamiltonian flow of the canonical Gaussian over time t.
template <typename S>
PhasePoint<S> exact_gaussian_flow(const PhasePoint<S>& p, S t) {
  const S c = std::cos(t);
  const S s = std::sin(t);
  PhasePoint<S> out;
  out.position = c * p.position + s * p.velocity;
  out.velocity = -s * p.position + c * p.velocity;
  return out;
}

/// H_h(x, v) = H(x, v) - h^2 |x|^2 / 8, preserved exactly by the Gaussian
/// leapfrog.
template <typename S>
S modified_hamiltonian(const PhasePoint<S>& p, const LeapfrogConfig<S>& cfg) {
  return hamiltonian(p) - cfg.h * cfg.h * p.position.squaredNorm() / 8;
}

/// |a|^2 - |b|^2 as (a - b).(a + b), which avoids cancellation.
template <typename A, typename B>
auto squared_norm_difference(const A& a, const B& b) {
  return (a - b).dot(a + b);
}

/// (H o Phi_h^i - H)(x, v) for the canonical Gaussian, evaluated directly.
template <typename S>
S energy_error(const PhasePoint<S>& p, const LeapfrogConfig<S>& cfg, long i) {
  if (i == 0) return S(0);
  const PhasePoint<S> q = gaussian_leapfrog(p, cfg, i);
  return S(0.5) * (squared_norm_difference(q.position, p.position) +
                   squared_norm_difference(q.velocity, p.velocity));
}

/// Right-hand side of the Gaussian energy-error identity,
/// (h^2/8)(|Pi Phi_h^i(x, v)|^2 - |x|^2).
template <typename S>
S energy_error_from_positions(const PhasePoint<S>& p, const LeapfrogConfig<S>& cfg, long i) {
  if (i == 0) return S(0);
  const PhasePoint<S> q = gaussian_leapfrog(p, cfg, i);
  return cfg.h * cfg.h / 8 * squared_norm_difference(q.position, p.position);
}

}  // namespace nuts_gauss
