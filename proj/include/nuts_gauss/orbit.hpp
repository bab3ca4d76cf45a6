#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nuts_gauss/dynamics.hpp"

namespace nuts_gauss {

/// Contiguous integer interval {min_index, ..., min_index + 2^k - 1}.
struct IndexOrbit {
  long min_index = 0;
  int log2_length = 0;

  long length() const { return 1L << log2_length; }
  long max_index() const { return min_index + length() - 1; }
  bool contains(long i) const { return i >= min_index && i <= max_index(); }
  bool contains_zero() const { return contains(0); }
  /// Physical time from the first to the last iterate, h(|I| - 1).
  double time(double h) const { return h * static_cast<double>(length() - 1); }

  /// m-th member at halving level j: length 2^(k-j).
  IndexOrbit sub_orbit(int level, long m) const {
    return IndexOrbit{min_index + m * (1L << (log2_length - level)), log2_length - level};
  }

  friend bool operator==(const IndexOrbit&, const IndexOrbit&) = default;
};

/// All 2^k orbits of length 2^k that contain 0, ordered by min_index.
inline std::vector<IndexOrbit> orbits_containing_zero(int k) {
  std::vector<IndexOrbit> out;
  const long n = 1L << k;
  out.reserve(static_cast<std::size_t>(n));
  for (long m = -(n - 1); m <= 0; ++m) out.push_back(IndexOrbit{m, k});
  return out;
}

enum class StopReason { ExtensionSubUTurn, DoubledOrbitUTurn, MaxDepth, FixedLength };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::ExtensionSubUTurn: return "ExtensionSubUTurn";
    case StopReason::DoubledOrbitUTurn: return "DoubledOrbitUTurn";
    case StopReason::MaxDepth: return "MaxDepth";
    case StopReason::FixedLength: return "FixedLength";
  }
  return "Unknown";
}

class NonFiniteStateError : public std::runtime_error {
 public:
  explicit NonFiniteStateError(long index)
      : std::runtime_error("non-finite state at leapfrog index " + std::to_string(index)), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

/// Signed step size used on the edge between indices i and i+1. Empty means
/// the fixed step of the LeapfrogConfig.
template <typename S>
using StepSchedule = std::function<S(long edge)>;

/// Cache of leapfrog iterates over a contiguous index span around 0.
///
/// Storage is a pair of d x capacity matrices addressed modulo the capacity
/// (a power of two), so indices on either side of 0 share one allocation that
/// is reused across transitions.
template <typename S>
class OrbitStates {
 public:
  OrbitStates() = default;

  template <TargetModel<S> T>
  void reset(const PhasePoint<S>& base, const T& target) {
    dim_ = base.dimension();
    if (positions_.rows() != dim_) {
      positions_.resize(dim_, 0);
      velocities_.resize(dim_, 0);
      energies_.clear();
    }
    ensure_capacity(1);
    min_ = max_ = 0;
    positions_.col(0) = base.position;
    velocities_.col(0) = base.velocity;
    energies_[0] = hamiltonian(base, target);
    if (!std::isfinite(energies_[0])) throw NonFiniteStateError(0);
  }

  /// Replaces the cache with explicit iterates: column j of the matrices is
  /// index min_index + j. Energies are evaluated on `target`.
  template <TargetModel<S> T>
  void load(long min_index, const Matrix<S>& positions, const Matrix<S>& velocities, const T& target) {
    if (positions.cols() < 1 || positions.rows() != velocities.rows() || positions.cols() != velocities.cols()) {
      throw std::invalid_argument("OrbitStates::load: shape mismatch");
    }
    dim_ = positions.rows();
    positions_.resize(dim_, 0);
    velocities_.resize(dim_, 0);
    capacity_ = 0;
    ensure_capacity(positions.cols());
    min_ = min_index;
    max_ = min_index + positions.cols() - 1;
    for (long i = min_; i <= max_; ++i) {
      positions_.col(slot(i)) = positions.col(i - min_);
      velocities_.col(slot(i)) = velocities.col(i - min_);
      energies_[static_cast<std::size_t>(slot(i))] =
          hamiltonian(PhasePoint<S>(positions.col(i - min_), velocities.col(i - min_)), target);
    }
  }

  Index dimension() const { return dim_; }
  long min_index() const { return min_; }
  long max_index() const { return max_; }
  long size() const { return max_ - min_ + 1; }
  bool contains(long i) const { return i >= min_ && i <= max_; }
  bool contains(const IndexOrbit& orbit) const { return contains(orbit.min_index) && contains(orbit.max_index()); }

  auto position(long i) const { return positions_.col(slot_checked(i)); }
  auto velocity(long i) const { return velocities_.col(slot_checked(i)); }
  S energy(long i) const { return energies_[static_cast<std::size_t>(slot_checked(i))]; }
  S base_energy() const { return energy(0); }

  PhasePoint<S> state(long i) const { return PhasePoint<S>(Vec<S>(position(i)), Vec<S>(velocity(i))); }

  /// Materialize `count` further iterates after max_index (forward in time).
  template <TargetModel<S> T>
  void extend_forward(long count, S h, const T& target, const StepSchedule<S>& schedule = {}) {
    ensure_capacity(size() + count);
    for (long n = 0; n < count; ++n) {
      const long from = max_;
      const S step = schedule ? schedule(from) : h;
      advance(from, from + 1, step, target);
      max_ = from + 1;
    }
  }

  /// Materialize `count` further iterates before min_index (backward in time).
  template <TargetModel<S> T>
  void extend_backward(long count, S h, const T& target, const StepSchedule<S>& schedule = {}) {
    ensure_capacity(size() + count);
    for (long n = 0; n < count; ++n) {
      const long from = min_;
      const S step = schedule ? schedule(from - 1) : h;
      advance(from, from - 1, -step, target);
      min_ = from - 1;
    }
  }

  /// Extend as needed so that `orbit` is fully materialized.
  template <TargetModel<S> T>
  void materialize(const IndexOrbit& orbit, S h, const T& target, const StepSchedule<S>& schedule = {}) {
    if (orbit.max_index() > max_) extend_forward(orbit.max_index() - max_, h, target, schedule);
    if (orbit.min_index < min_) extend_backward(min_ - orbit.min_index, h, target, schedule);
  }

 private:
  long slot(long i) const { return i & (capacity_ - 1); }

  long slot_checked(long i) const {
    if (!contains(i)) throw std::out_of_range("orbit index " + std::to_string(i) + " not materialized");
    return slot(i);
  }

  template <TargetModel<S> T>
  void advance(long from, long to, S step, const T& target) {
    const long src = slot(from);
    const long dst = slot(to);
    positions_.col(dst) = positions_.col(src);
    velocities_.col(dst) = velocities_.col(src);
    try {
      leapfrog_inplace(positions_.col(dst), velocities_.col(dst), step, target, grad_);
    } catch (const std::domain_error&) {
      throw NonFiniteStateError(to);
    }
    const S potential = potential_of(positions_.col(dst), target);
    const S energy = potential + S(0.5) * velocities_.col(dst).squaredNorm();
    if (!std::isfinite(energy)) throw NonFiniteStateError(to);
    energies_[static_cast<std::size_t>(dst)] = energy;
  }

  template <typename Col, TargetModel<S> T>
  S potential_of(const Col& x, const T& target) {
    if constexpr (std::is_same_v<T, GaussianTarget<S>>) {
      return S(0.5) * x.squaredNorm();
    } else {
      scratch_ = x;
      return target.potential(scratch_);
    }
  }

  void ensure_capacity(long needed) {
    if (needed <= capacity_ && positions_.cols() == capacity_) return;
    long cap = std::max<long>(capacity_, 1);
    while (cap < needed) cap <<= 1;
    Matrix<S> pos(dim_, cap);
    Matrix<S> vel(dim_, cap);
    std::vector<S> en(static_cast<std::size_t>(cap));
    if (positions_.cols() == capacity_ && capacity_ > 0) {
      for (long i = min_; i <= max_; ++i) {
        const long dst = i & (cap - 1);
        pos.col(dst) = positions_.col(slot(i));
        vel.col(dst) = velocities_.col(slot(i));
        en[static_cast<std::size_t>(dst)] = energies_[static_cast<std::size_t>(slot(i))];
      }
    }
    positions_ = std::move(pos);
    velocities_ = std::move(vel);
    energies_ = std::move(en);
    capacity_ = cap;
    grad_.resize(dim_);
  }

  Index dim_ = 0;
  long capacity_ = 0;
  long min_ = 0;
  long max_ = 0;
  Matrix<S> positions_;
  Matrix<S> velocities_;
  std::vector<S> energies_;
  Vec<S> grad_;
  Vec<S> scratch_;
};

/// Endpoint U-turn test: v+.(x+ - x-) < 0 or v-.(x+ - x-) < 0, strict.
template <typename S>
bool uturn_check(const OrbitStates<S>& states, const IndexOrbit& orbit) {
  const long lo = orbit.min_index;
  const long hi = orbit.max_index();
  const auto x_minus = states.position(lo);
  const auto x_plus = states.position(hi);
  const S dot_plus = states.velocity(hi).dot(x_plus - x_minus);
  const S dot_minus = states.velocity(lo).dot(x_plus - x_minus);
  return dot_plus < 0 || dot_minus < 0;
}

template <typename S>
using UTurnRule = std::function<bool(const OrbitStates<S>&, const IndexOrbit&)>;

/// True iff some member of the halving family of `orbit` (the orbit itself at
/// level 0 down to length-2 pieces) has the U-turn property. Singletons never
/// do, so they are skipped. Levels are scanned top-down with short-circuit.
template <typename S>
bool sub_uturn_check(const OrbitStates<S>& states, const IndexOrbit& orbit, const UTurnRule<S>& rule = {}) {
  if (!states.contains(orbit)) throw std::out_of_range("sub_uturn_check: orbit not materialized");
  for (int level = 0; level < orbit.log2_length; ++level) {
    const long members = 1L << level;
    for (long m = 0; m < members; ++m) {
      const IndexOrbit sub = orbit.sub_orbit(level, m);
      if (rule ? rule(states, sub) : uturn_check(states, sub)) return true;
    }
  }
  return false;
}

struct OrbitSelectionResult {
  IndexOrbit orbit;
  StopReason stop_reason = StopReason::MaxDepth;
  std::vector<bool> direction_bits;  // true = forward in time
  long gradient_evals = 0;
};

template <typename S>
struct OrbitSelectionOptions {
  UTurnRule<S> rule;        // empty: endpoint U-turn test on the states
  StepSchedule<S> schedule; // empty: fixed step size
};

/// Doubling orbit selection starting from I_0 = {0}.
///
/// Each round draws one direction bit, materializes the adjacent extension I'
/// of the current length, stops with the current orbit if I' has the sub-U-turn
/// property, and otherwise doubles; the doubled orbit is selected if it has the
/// U-turn property or reaches 2^k_max. The iterates live in `states`, which on
/// return spans exactly the indices that were materialized.
template <typename S, TargetModel<S> T, typename DirectionFn>
OrbitSelectionResult select_orbit(OrbitStates<S>& states, const PhasePoint<S>& base, S h, int k_max,
                                  DirectionFn&& next_direction, const T& target,
                                  const OrbitSelectionOptions<S>& opts = {}) {
  if (k_max < 1) throw std::invalid_argument("select_orbit: k_max must be >= 1");
  states.reset(base, target);
  OrbitSelectionResult result;
  IndexOrbit current{0, 0};
  while (true) {
    const bool forward = next_direction();
    result.direction_bits.push_back(forward);
    const long len = current.length();
    const IndexOrbit extension{forward ? current.max_index() + 1 : current.min_index - len, current.log2_length};
    states.materialize(extension, h, target, opts.schedule);

    if (sub_uturn_check(states, extension, opts.rule)) {
      result.orbit = current;
      result.stop_reason = StopReason::ExtensionSubUTurn;
      break;
    }
    const IndexOrbit doubled{std::min(current.min_index, extension.min_index), current.log2_length + 1};
    const bool uturn = opts.rule ? opts.rule(states, doubled) : uturn_check(states, doubled);
    if (uturn || doubled.log2_length == k_max) {
      result.orbit = doubled;
      result.stop_reason = uturn ? StopReason::DoubledOrbitUTurn : StopReason::MaxDepth;
      break;
    }
    current = doubled;
  }
  result.gradient_evals = states.size() - 1;
  return result;
}

template <typename S, TargetModel<S> T>
OrbitSelectionResult select_orbit(OrbitStates<S>& states, const PhasePoint<S>& base, const LeapfrogConfig<S>& cfg,
                                  int k_max, RandomStream& rng, const T& target,
                                  const OrbitSelectionOptions<S>& opts = {}) {
  return select_orbit(states, base, cfg.h, k_max, [&rng] { return rng.bit(); }, target, opts);
}

/// U-turn rule that looks only at the orbit's physical time: a U-turn iff
/// h(|I| - 1) lies in (pi + delta, 2 pi - delta).
template <typename S>
UTurnRule<S> length_only_uturn_rule(S h, S delta) {
  return [h, delta](const OrbitStates<S>&, const IndexOrbit& orbit) {
    const S t = h * static_cast<S>(orbit.length() - 1);
    return t > std::numbers::pi_v<S> + delta && t < 2 * std::numbers::pi_v<S> - delta;
  };
}

struct SineScanRow {
  int k;
  double time;
  double dot_plus_over_d;
  double dot_minus_over_d;
  double sine;
  double deviation;  // the scaled dot product farther from sin(time), signed
};

/// For each k in [k_lo, k_hi], the U-turn dot products of the orbit
/// {0, ..., 2^k - 1} scaled by 1/d, compared against sin(h(2^k - 1)).
template <typename S, TargetModel<S> T>
std::vector<SineScanRow> uturn_sine_scan(const PhasePoint<S>& base, const LeapfrogConfig<S>& cfg, int k_lo, int k_hi,
                                         const T& target) {
  if (k_lo < 0 || k_hi < k_lo) throw std::invalid_argument("uturn_sine_scan: invalid k range");
  OrbitStates<S> states;
  states.reset(base, target);
  states.extend_forward((1L << k_hi) - 1, cfg.h, target);
  const double d = static_cast<double>(base.dimension());
  std::vector<SineScanRow> rows;
  for (int k = k_lo; k <= k_hi; ++k) {
    const IndexOrbit orbit{0, k};
    const double t = orbit.time(static_cast<double>(cfg.h));
    const double sine = std::sin(t);
    double plus = 0;
    double minus = 0;
    if (k > 0) {
      const auto diff = (states.position(orbit.max_index()) - states.position(0)).eval();
      plus = static_cast<double>(states.velocity(orbit.max_index()).dot(diff)) / d;
      minus = static_cast<double>(states.velocity(0).dot(diff)) / d;
    }
    const double dev_plus = plus - sine;
    const double dev_minus = minus - sine;
    rows.push_back({k, t, plus, minus, sine, std::abs(dev_plus) >= std::abs(dev_minus) ? dev_plus : dev_minus});
  }
  return rows;
}

}  // namespace nuts_gauss
