#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qprep/mlp.hpp"
#include "qprep/trajectory.hpp"

using namespace qprep;

namespace {

constexpr double kPi = std::numbers::pi;
const BlochVector kExampleTarget{-std::sin(2.0 * kPi / 3.0), 0.0, -0.5};

BlochVector random_pure(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return BlochVector{n(rng), n(rng), n(rng)}.normalized();
}

/// Random pairs with a solvable, capped drive.
std::vector<BoundaryPair> random_pairs(std::size_t n, std::uint64_t seed, bool ground_start) {
  std::mt19937_64 rng(seed);
  std::vector<BoundaryPair> out;
  while (out.size() < n) {
    BoundaryPair b{ground_start ? BlochVector::ground() : random_pure(rng), random_pure(rng)};
    const double dx = b.target.x - b.initial.x;
    if (std::abs(dx) < 1e-3 || std::abs(b.target.z - b.initial.z) > 20.0 * std::abs(dx)) continue;
    out.push_back(b);
  }
  return out;
}

Errc error_code(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

double endpoint_fidelity(const BoundaryPair& b, const MlpControl& c) {
  const auto q = exact_rotation_step(b.initial, 0.0, c.omega, SystemParams::from_gamma(1.0, 0.0), c.time);
  return fidelity(q, b.target);
}

}  // namespace

TEST(OptimalRabi, Examples) {
  EXPECT_NEAR(optimal_rabi({BlochVector::ground(), {1, 0, 0}}), 1.0, 1e-15);
  EXPECT_NEAR(optimal_rabi({BlochVector::ground(), kExampleTarget}), -1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(optimal_rabi({BlochVector::ground(), kExampleTarget}), -0.5774, 5e-5);
  EXPECT_EQ(optimal_rabi({{0.6, 0, 0.8}, {-0.6, 0, 0.8}}), 0.0);
  EXPECT_NEAR(optimal_rabi({BlochVector::ground(), {1, 0, 0}}, 2.5), 2.5, 1e-15);
}

TEST(OptimalRabi, Errors) {
  EXPECT_EQ(error_code([] { optimal_rabi({BlochVector::ground(), {0, 0, 1}}); }), Errc::divergent_control);
  EXPECT_EQ(error_code([] { optimal_rabi({BlochVector::ground(), {0, 1, 0}}); }), Errc::divergent_control);
  EXPECT_EQ(error_code([] { optimal_rabi({BlochVector::ground(), {0.5e-6, 0, 1}}); }), Errc::divergent_control);
  // |Omega| = 1.9 / 0.05 = 38 > 20
  const BlochVector steep = BlochVector{0.05, std::sqrt(1 - 0.05 * 0.05 - 0.9 * 0.9), 0.9};
  EXPECT_EQ(error_code([&] { optimal_rabi({BlochVector::ground(), steep}); }), Errc::control_cap_exceeded);
  MlpLimits wide;
  wide.omega_cap = 50.0;
  EXPECT_NEAR(optimal_rabi({BlochVector::ground(), steep}, 1.0, wide), 38.0, 1e-9);
  EXPECT_EQ(error_code([] { optimal_rabi({BlochVector::ground(), {0.5, 0, 0.5}}); }), Errc::non_pure_target);
}

TEST(OptimalTime, Examples) {
  EXPECT_NEAR(optimal_time({BlochVector::ground(), kExampleTarget}), kPi * std::sqrt(3.0) / 2.0, 1e-12);
  EXPECT_NEAR(optimal_time({BlochVector::ground(), kExampleTarget}), 2.7207, 5e-5);
  EXPECT_NEAR(optimal_time({BlochVector::ground(), {1, 0, 0}}), kPi / std::sqrt(2.0), 1e-12);
}

TEST(OptimalTime, FullRevolutionReturnsToStart) {
  const auto c = solve_mlp({BlochVector::ground(), {1, 0, 0}});
  const double w = std::hypot(c.omega, 1.0);
  const auto q = exact_rotation_step(BlochVector::ground(), 0.0, c.omega, SystemParams::from_gamma(1.0, 0.0),
                                     2.0 * kPi / w);
  EXPECT_LT(distance(q, BlochVector::ground()), 1e-12);
}

TEST(OptimalTime, GroundStateClosedForm) {
  // T = arccos(1 - x_F w^2 / (eps Omega)) / w in the second and fourth
  // quadrants, 2 pi - (...) in the first and third.
  std::mt19937_64 rng(3);
  for (const auto& b : random_pairs(500, 21, true)) {
    const double omega = (b.target.z + 1.0) / b.target.x;
    const double w = std::hypot(omega, 1.0);
    double theta = std::acos(std::clamp(1.0 - b.target.x * w * w / omega, -1.0, 1.0));
    const bool corrected = b.target.x * b.target.y > 0.0;
    if (corrected) theta = 2.0 * kPi - theta;
    const auto c = solve_mlp(b);
    EXPECT_NEAR(c.time, theta / w, 1e-6);
    EXPECT_EQ(c.quadrant_corrected, corrected);
  }
}

TEST(SolveMlp, QuadrantCorrectionFlag) {
  const auto q1 = state_on_plane(-0.5, 0.25 * kPi);
  const auto q2 = state_on_plane(-0.5, 0.75 * kPi);
  EXPECT_TRUE(solve_mlp({BlochVector::ground(), q1}).quadrant_corrected);
  EXPECT_FALSE(solve_mlp({BlochVector::ground(), q2}).quadrant_corrected);
  EXPECT_FALSE(solve_mlp({BlochVector::ground(), kExampleTarget}).quadrant_corrected);
}

TEST(SolveMlp, EndpointExactness) {
  for (bool ground : {true, false}) {
    for (const auto& b : random_pairs(1000, 5, ground)) {
      const auto c = solve_mlp(b);
      EXPECT_GT(c.time, 0.0);
      EXPECT_GE(endpoint_fidelity(b, c), 1.0 - 1e-9);
    }
  }
}

TEST(SolveMlp, IndependentOfDephasing) {
  // The control is a function of the boundary states and eps only; the
  // solver API does not even take g or kappa.
  const BoundaryPair b{BlochVector::ground(), kExampleTarget};
  const auto c = solve_mlp(b, 1.0);
  for (double gamma : {0.0, 0.1, 0.8}) {
    VariationalOptions o;
    const auto rep = check_variational_solution(b, 1.0, SystemParams::from_gamma(1.0, gamma), o);
    EXPECT_LT(rep.endpoint_miss, 1e-9);
  }
  EXPECT_EQ(c.omega, solve_mlp(b, 1.0).omega);
}

TEST(SolveMlp, MirrorSymmetry) {
  for (const auto& b : random_pairs(300, 8, true)) {
    const BoundaryPair m{b.initial, {-b.target.x, -b.target.y, b.target.z}};
    const auto c = solve_mlp(b);
    const auto cm = solve_mlp(m);
    EXPECT_NEAR(cm.omega, -c.omega, 1e-12);
    EXPECT_NEAR(cm.time, c.time, 1e-9);
  }
}

TEST(GeometricSolve, Examples) {
  const auto c = geometric_solve({BlochVector::ground(), {1, 0, 0}});
  EXPECT_NEAR(c.omega, 1.0, 1e-15);  // phi = pi/4
  EXPECT_NEAR(c.time, kPi / std::sqrt(2.0), 1e-12);
  const auto f = geometric_solve({BlochVector::ground(), kExampleTarget});
  EXPECT_NEAR(f.omega, -1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(f.time, kPi * std::sqrt(3.0) / 2.0, 1e-12);
}

TEST(GeometricSolve, PrintedAngleFormulaForPositiveDrive) {
  // theta = arccos((-z sin phi - x cos phi) / sqrt(1 + cos^2 phi + 2 cos phi (z cos phi - x sin phi)))
  // for targets in the x-z plane reached with Omega > 0.
  for (double x : {0.2, 0.5, 0.8, 0.99}) {
    for (double sz : {-1.0, 1.0}) {
      const BlochVector t{x, 0.0, sz * std::sqrt(1.0 - x * x)};
      const BoundaryPair b{BlochVector::ground(), t};
      const double phi = std::atan((t.z + 1.0) / t.x);
      const double num = -t.z * std::sin(phi) - t.x * std::cos(phi);
      const double den = std::sqrt(1.0 + std::cos(phi) * std::cos(phi) +
                                   2.0 * std::cos(phi) * (t.z * std::cos(phi) - t.x * std::sin(phi)));
      const double theta = std::acos(std::clamp(num / den, -1.0, 1.0));
      const auto c = geometric_solve(b);
      ASSERT_GT(c.omega, 0.0);
      EXPECT_NEAR(c.time * std::hypot(c.omega, 1.0), theta, 1e-7) << x << " " << sz;
    }
  }
}

TEST(GeometricSolve, AgreesWithClosedForm) {
  for (bool ground : {true, false}) {
    for (const auto& b : random_pairs(1000, 6, ground)) {
      const auto a = solve_mlp(b);
      const auto g = geometric_solve(b);
      EXPECT_NEAR(a.omega, g.omega, 1e-9);
      EXPECT_NEAR(a.time, g.time, 1e-9);
    }
  }
}

TEST(GeometricSolve, SameErrors) {
  EXPECT_EQ(error_code([] { geometric_solve({BlochVector::ground(), {0, 0, 1}}); }), Errc::divergent_control);
}

TEST(AnalyticPath, EndpointsAndPurity) {
  const BoundaryPair b{BlochVector::ground(), kExampleTarget};
  const auto two = analytic_path(b, 1.0, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], b.initial);
  EXPECT_EQ(two[1], b.target);
  for (const auto& pair : random_pairs(100, 9, false)) {
    const auto path = analytic_path(pair, 1.0, 101);
    for (const auto& q : path) EXPECT_NEAR(q.norm(), 1.0, 1e-9);
    const auto c = solve_mlp(pair);
    EXPECT_LT(distance(mlp_state_at(pair, c, 1.0, 0.0), pair.initial), 1e-12);
    EXPECT_LT(distance(mlp_state_at(pair, c, 1.0, c.time), pair.target), 1e-9);
  }
}

TEST(AnalyticPath, MidpointMatchesRotation) {
  const BoundaryPair b{BlochVector::ground(), {1, 0, 0}};
  const auto path = analytic_path(b, 1.0, 3);
  const auto c = solve_mlp(b);
  const auto mid =
      exact_rotation_step(b.initial, 0.0, c.omega, SystemParams::from_gamma(1.0, 0.0), 0.5 * c.time);
  EXPECT_LT(distance(path[1], mid), 1e-9);
  // ground-state special form: x = (eps Omega / w^2)(1 - cos wt), y = -(Omega / w) sin wt
  const double w = std::sqrt(2.0);
  const double t = 0.5 * c.time;
  EXPECT_NEAR(path[1].x, 0.5 * (1.0 - std::cos(w * t)), 1e-12);
  EXPECT_NEAR(path[1].y, -std::sin(w * t) / w, 1e-12);
  EXPECT_NEAR(path[1].z, -0.5 * std::cos(w * t) - 0.5, 1e-12);
}

TEST(Variational, ResidualsVanish) {
  const auto p = SystemParams::from_gamma(1.0, 0.3);
  for (const auto& b : random_pairs(20, 10, false)) {
    const auto rep = verify_variational_solution(b, 1.0, p);
    EXPECT_LE(rep.max_residual(), 1e-6);
    EXPECT_LT(rep.endpoint_miss, 1e-9);
    EXPECT_GT(rep.n_steps, 0u);
  }
}

TEST(Variational, ZeroConjugateIsTrivial) {
  VariationalOptions o;
  o.p0 = ConjugateVector{0, 0, 0};
  const auto rep = verify_variational_solution({BlochVector::ground(), kExampleTarget}, 1.0,
                                               SystemParams::from_gamma(1.0, 0.8), o);
  EXPECT_EQ(rep.constraint_xz, 0.0);
  EXPECT_EQ(rep.constraint_yz, 0.0);
  EXPECT_EQ(rep.noise, 0.0);
}

TEST(Variational, ScaledConjugateKeepsConstraints) {
  for (double c : {-3.0, 0.25, 7.0}) {
    VariationalOptions o;
    const BoundaryPair b{BlochVector::ground(), kExampleTarget};
    o.p0 = ConjugateVector{c * b.initial.x, c * b.initial.y, c * b.initial.z};
    const auto rep = verify_variational_solution(b, 1.0, SystemParams::from_gamma(1.0, 0.1), o);
    EXPECT_LE(rep.max_residual(), 1e-6);
    // explicit Euler at dt = 1e-4 stays close to the analytic path
    EXPECT_LT(rep.path_deviation, 1e-3);
  }
}

TEST(Variational, InconsistentConjugateIsRejected) {
  VariationalOptions o;
  o.p0 = ConjugateVector{1.0, 0.0, 0.0};  // p_x z != p_z x at the ground state
  try {
    verify_variational_solution({BlochVector::ground(), kExampleTarget}, 1.0, SystemParams::from_gamma(1.0, 0.1), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::residual_exceeded);
  }
}

TEST(Variational, PerturbedDriveMissesTarget) {
  VariationalOptions o;
  o.omega_scale = 1.1;
  const auto rep =
      check_variational_solution({BlochVector::ground(), kExampleTarget}, 1.0, SystemParams::from_gamma(1.0, 0.1), o);
  EXPECT_GT(rep.endpoint_miss, 1e-3);
}

TEST(MostLikelyPath, NoConditionedPathBeatsZeroNoise) {
  // Rejection-sample noise paths (coarse dt) that end within delta of the
  // target under the MLP control; none can be more likely than xi = 0.
  const BoundaryPair b{BlochVector::ground(), kExampleTarget};
  const auto c = solve_mlp(b);
  const auto pulse = c.pulse();
  const double dt = fit_time_step(pulse, 0.05);
  const auto p = SystemParams::from_gamma(1.0, 0.1);
  std::size_t accepted = 0;
  for (std::uint64_t i = 0; accepted < 1000 && i < 200000; ++i) {
    NormalStream s(55, i);
    const auto out = simulate_trajectory(b.initial, pulse, p, dt, s);
    if (fidelity(out.final_state, b.target) < 1.0 - 0.01) continue;
    ++accepted;
    EXPECT_LT(path_log_likelihood(out.noise, p.kappa()), 0.0);
  }
  EXPECT_EQ(accepted, 1000u);
}
