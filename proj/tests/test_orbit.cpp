#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "nuts_gauss/geometry.hpp"
#include "nuts_gauss/orbit.hpp"

using namespace nuts_gauss;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

OrbitStates<double> two_point_states(VectorXd x_minus, VectorXd v_minus, VectorXd x_plus, VectorXd v_plus) {
  const Index d = x_minus.size();
  MatrixXd pos(d, 2);
  MatrixXd vel(d, 2);
  pos << x_minus, x_plus;
  vel << v_minus, v_plus;
  OrbitStates<double> states;
  states.load(0, pos, vel, GaussianTarget<double>(d));
  return states;
}

// Scripted direction bits, least significant bit first.
struct ScriptedBits {
  unsigned bits;
  int pos = 0;
  bool operator()() { return (bits >> pos++) & 1u; }
};

}  // namespace

TEST_CASE("index orbit basics") {
  const IndexOrbit orbit{-3, 2};
  CHECK(orbit.length() == 4);
  CHECK(orbit.max_index() == 0);
  CHECK(orbit.contains_zero());
  CHECK(orbit.sub_orbit(1, 1) == IndexOrbit{-1, 1});
  CHECK(orbit.time(0.5) == doctest::Approx(1.5));
  const auto family = orbits_containing_zero(3);
  CHECK(family.size() == 8);
  for (const auto& o : family) CHECK(o.contains_zero());
}

TEST_CASE("u-turn check by hand") {
  {
    auto states = two_point_states(VectorXd{{1, 0}}, VectorXd{{0, 1}}, VectorXd{{0, 1}}, VectorXd{{-1, 0}});
    CHECK_FALSE(uturn_check(states, IndexOrbit{0, 1}));
  }
  {
    auto states = two_point_states(VectorXd{{1, 0}}, VectorXd{{0, 1}}, VectorXd{{0, 1}}, VectorXd{{1, -1}});
    CHECK(uturn_check(states, IndexOrbit{0, 1}));
  }
  {
    // Zero dot products are not a U-turn.
    auto states = two_point_states(VectorXd{{0, 0}}, VectorXd{{0, 1}}, VectorXd{{1, 0}}, VectorXd{{0, 1}});
    CHECK_FALSE(uturn_check(states, IndexOrbit{0, 1}));
  }
}

TEST_CASE("u-turn on the sphere follows the orbit time") {
  const Index d = 6;
  VectorXd x = VectorXd::Zero(d);
  VectorXd v = VectorXd::Zero(d);
  x[0] = std::sqrt(6.0);
  v[1] = std::sqrt(6.0);
  const PhasePoint<double> base(x, v);
  for (double t : {0.3, 1.0, 2.0, 3.0, 3.3, 4.0, 5.5, 6.2}) {
    const auto end = exact_gaussian_flow(base, t);
    auto states = two_point_states(x, v, end.position, end.velocity);
    CHECK(uturn_check(states, IndexOrbit{0, 1}) == (t > std::numbers::pi));
  }
}

TEST_CASE("missing endpoints are an error") {
  OrbitStates<double> states;
  states.reset(PhasePoint<double>(VectorXd::Ones(2), VectorXd::Ones(2)), GaussianTarget<double>(2));
  CHECK_THROWS_AS(uturn_check(states, IndexOrbit{0, 1}), std::out_of_range);
  CHECK_THROWS_AS(sub_uturn_check(states, IndexOrbit{0, 2}), std::out_of_range);
}

TEST_CASE("sub-u-turn: singleton never, left half only, smooth short arc never") {
  OrbitStates<double> single;
  single.reset(PhasePoint<double>(VectorXd{{1, 0}}, VectorXd{{0, 1}}), GaussianTarget<double>(2));
  CHECK_FALSE(sub_uturn_check(single, IndexOrbit{0, 0}));

  // Four states where only the left half {0,1} turns back.
  MatrixXd pos(2, 4);
  MatrixXd vel(2, 4);
  pos << 0, 1, 2, 3,  //
      0, 0, 0, 0;
  vel << 1, -1, 1, 1,  //
      0, 0, 0, 0;
  OrbitStates<double> states;
  states.load(0, pos, vel, GaussianTarget<double>(2));
  CHECK(uturn_check(states, IndexOrbit{0, 1}));
  CHECK_FALSE(uturn_check(states, IndexOrbit{2, 1}));
  CHECK_FALSE(uturn_check(states, IndexOrbit{0, 2}));
  CHECK(sub_uturn_check(states, IndexOrbit{0, 2}));
  CHECK_FALSE(sub_uturn_check(states, IndexOrbit{2, 1}));

  // Exact-flow arc on the sphere of total time below pi.
  const Index d = 4;
  VectorXd x = VectorXd::Zero(d);
  VectorXd v = VectorXd::Zero(d);
  x[0] = 2;
  v[1] = 2;
  const int n = 16;
  MatrixXd arc_pos(d, n);
  MatrixXd arc_vel(d, n);
  for (int i = 0; i < n; ++i) {
    const auto p = exact_gaussian_flow(PhasePoint<double>(x, v), 3.0 * i / (n - 1));
    arc_pos.col(i) = p.position;
    arc_vel.col(i) = p.velocity;
  }
  OrbitStates<double> arc;
  arc.load(0, arc_pos, arc_vel, GaussianTarget<double>(d));
  CHECK_FALSE(sub_uturn_check(arc, IndexOrbit{0, 4}));
}

TEST_CASE("sub-u-turn is implied by the whole-orbit u-turn") {
  RandomStream rng(12);
  const GaussianTarget<double> target(3);
  for (int rep = 0; rep < 200; ++rep) {
    OrbitStates<double> states;
    states.reset(PhasePoint<double>(rng.standard_normal(3), rng.standard_normal(3)), target);
    states.extend_forward(15, 0.4, target);
    const IndexOrbit orbit{0, 4};
    if (uturn_check(states, orbit)) CHECK(sub_uturn_check(states, orbit));
  }
}

TEST_CASE("orbit states match iterated leapfrog steps") {
  RandomStream rng(7);
  const GaussianTarget<double> target(5);
  const PhasePoint<double> base(rng.standard_normal(5), rng.standard_normal(5));
  const LeapfrogConfig<double> cfg(0.2);
  OrbitStates<double> states;
  states.reset(base, target);
  states.materialize(IndexOrbit{-8, 4}, 0.2, target);
  CHECK(states.min_index() == -8);
  CHECK(states.max_index() == 7);
  PhasePoint<double> fwd = base;
  for (long i = 1; i <= 7; ++i) {
    fwd = leapfrog_step(fwd, cfg, target);
    CHECK((states.position(i) - fwd.position).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(states.energy(i) == doctest::Approx(hamiltonian(fwd, target)).epsilon(1e-14));
  }
  const auto back = gaussian_leapfrog(base, cfg, -8);
  CHECK((states.position(-8) - back.position).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(states.base_energy() == hamiltonian(base, target));
  CHECK_THROWS_AS(states.position(8), std::out_of_range);
}

TEST_CASE("non-finite states are reported with their index") {
  FunctionTarget<double> blowup{1, [](const VectorXd& x) { return 1e300 * x.squaredNorm(); },
                                [](const VectorXd& x) { return VectorXd(2e300 * x); }};
  OrbitStates<double> states;
  states.reset(PhasePoint<double>(VectorXd::Ones(1), VectorXd::Ones(1)), blowup);
  try {
    states.extend_forward(10, 1.0, blowup);
    FAIL("expected NonFiniteStateError");
  } catch (const NonFiniteStateError& e) {
    CHECK(e.index() >= 1);
    CHECK(e.index() <= 10);
  }
}

TEST_CASE("select_orbit with no u-turns enumerates the doubling tree") {
  const GaussianTarget<double> target(2);
  const PhasePoint<double> base(VectorXd{{1, 0}}, VectorXd{{0, 1}});
  OrbitSelectionOptions<double> opts;
  opts.rule = [](const OrbitStates<double>&, const IndexOrbit&) { return false; };
  std::set<long> minima;
  for (unsigned bits = 0; bits < 8; ++bits) {
    OrbitStates<double> states;
    const auto res = select_orbit(states, base, 0.1, 3, ScriptedBits{bits}, target, opts);
    CHECK(res.stop_reason == StopReason::MaxDepth);
    CHECK(res.orbit.length() == 8);
    CHECK(res.direction_bits.size() == 3);
    long expected_min = 0;
    for (int j = 0; j < 3; ++j) {
      if (!((bits >> j) & 1u)) expected_min -= 1L << j;
    }
    CHECK(res.orbit.min_index == expected_min);
    CHECK(res.gradient_evals == 7);
    CHECK(states.size() == 8);
    minima.insert(res.orbit.min_index);
  }
  // Each of the 8 equally likely bit strings gives a distinct orbit, so
  // every member of the family has probability 1/8.
  CHECK(minima.size() == 8);
}

TEST_CASE("length-only oracle picks 2^6 at h=0.09 and 2^5 at h=0.11") {
  const GaussianTarget<double> target(3);
  RandomStream rng(99);
  for (auto [h, k] : {std::pair{0.09, 6}, std::pair{0.11, 5}}) {
    OrbitSelectionOptions<double> opts;
    opts.rule = length_only_uturn_rule(h, 0.05);
    for (int rep = 0; rep < 200; ++rep) {
      OrbitStates<double> states;
      const PhasePoint<double> base(rng.standard_normal(3), rng.standard_normal(3));
      const auto res = select_orbit(states, base, LeapfrogConfig<double>(h), 10, rng, target, opts);
      CHECK(res.stop_reason == StopReason::DoubledOrbitUTurn);
      CHECK(res.orbit.log2_length == k);
      CHECK(res.orbit.contains_zero());
      CHECK(res.gradient_evals == states.size() - 1);
    }
  }
  CHECK(0.09 * 63 == doctest::Approx(5.67));
  CHECK(0.11 * 31 == doctest::Approx(3.41));
}

TEST_CASE("length-only oracle selects a uniform member of the family") {
  const GaussianTarget<double> target(1);
  const double h = 0.11;
  OrbitSelectionOptions<double> opts;
  opts.rule = length_only_uturn_rule(h, 0.05);
  RandomStream rng(2024);
  const int runs = 20000;
  std::map<long, int> counts;
  OrbitStates<double> states;
  const PhasePoint<double> base(VectorXd::Ones(1), VectorXd::Ones(1));
  for (int rep = 0; rep < runs; ++rep) {
    const auto res = select_orbit(states, base, LeapfrogConfig<double>(h), 10, rng, target, opts);
    REQUIRE(res.stop_reason != StopReason::ExtensionSubUTurn);
    counts[res.orbit.min_index] += 1;
  }
  CHECK(counts.size() == 32);
  const double expected = runs / 32.0;
  double stat = 0;
  for (const auto& [m, c] : counts) stat += (c - expected) * (c - expected) / expected;
  const double p_value = 1.0 - chi_squared_cdf(stat, 31);
  CHECK(p_value > 0.001);
}

TEST_CASE("select_orbit rejects k_max below one") {
  const GaussianTarget<double> target(1);
  OrbitStates<double> states;
  RandomStream rng(1);
  CHECK_THROWS_AS(select_orbit(states, PhasePoint<double>(VectorXd::Ones(1), VectorXd::Ones(1)),
                               LeapfrogConfig<double>(0.1), 0, rng, target),
                  std::invalid_argument);
}

TEST_CASE("real u-turn at d=1e4 from a typical state stops at k*") {
  const long d = 10000;
  const GaussianTarget<double> target(d);
  RandomStream rng(5);
  OrbitStates<double> states;
  for (auto [h, k] : {std::pair{0.09, 6}, std::pair{0.11, 5}}) {
    int hits = 0;
    for (int rep = 0; rep < 20; ++rep) {
      const PhasePoint<double> base(rng.standard_normal(d), rng.standard_normal(d));
      const auto res = select_orbit(states, base, LeapfrogConfig<double>(h), 10, rng, target);
      if (res.orbit.log2_length == k && res.stop_reason == StopReason::DoubledOrbitUTurn) ++hits;
    }
    CHECK(hits >= 19);
  }
}

TEST_CASE("sine scan") {
  SUBCASE("singleton convention") {
    const GaussianTarget<double> target(3);
    const auto rows = uturn_sine_scan(PhasePoint<double>(VectorXd::Ones(3), VectorXd::Ones(3)),
                                      LeapfrogConfig<double>(0.1), 0, 0, target);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].time == 0.0);
    CHECK(rows[0].sine == 0.0);
    CHECK(rows[0].deviation == 0.0);
  }
  SUBCASE("d=1e4, h=0.11: deviations small and within (2/pi) delta") {
    const long d = 10000;
    const GaussianTarget<double> target(d);
    RandomStream rng(17);
    const double w = 3 * std::sqrt(static_cast<double>(d));
    const double bound = 2 / std::numbers::pi * shell_delta(w, w, static_cast<double>(d), 0.11);
    const int draws = 100;
    int all_small = 0;
    for (int rep = 0; rep < draws; ++rep) {
      const VectorXd x = rng.standard_normal(d);
      const VectorXd v = rng.standard_normal(d);
      const auto rows = uturn_sine_scan(PhasePoint<double>(x, v), LeapfrogConfig<double>(0.11), 1, 8, target);
      const bool event = in_shell(x, w) && concentration_event(x, v, w, w);
      bool small = true;
      for (const auto& row : rows) {
        small = small && std::abs(row.deviation) < 0.05;
        if (event) CHECK(std::abs(row.deviation) <= bound);
        CHECK(row.time == doctest::Approx(0.11 * ((1 << row.k) - 1)));
      }
      all_small += small;
    }
    // Roughly one draw in ten crosses 0.05 at k = 8.
    CHECK(all_small >= 0.8 * draws);
  }
  SUBCASE("small h limit") {
    const long d = 10000;
    const GaussianTarget<double> target(d);
    RandomStream rng(3);
    const PhasePoint<double> base(rng.standard_normal(d), rng.standard_normal(d));
    for (const auto& row : uturn_sine_scan(base, LeapfrogConfig<double>(0.001), 1, 5, target)) {
      CHECK(std::abs(row.dot_plus_over_d - row.sine) < 1e-3);
      CHECK(std::abs(row.dot_minus_over_d - row.sine) < 1e-3);
    }
  }
}
