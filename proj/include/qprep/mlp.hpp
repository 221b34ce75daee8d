#pragma once

// Most-likely-path (MLP) control. Along the zero-noise path the qubit
// rotates rigidly about w = (-Omega, 0, eps), so a constant drive reaches the
// target only if both boundary states lie on one circle about w. That fixes
//   Omega = eps (z_F - z_I) / (x_F - x_I),
// and the duration is the rotation angle between the two states divided by
// omega = |w|.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qprep/bloch.hpp"

namespace qprep {

struct BoundaryPair {
  BlochVector initial = BlochVector::ground();
  BlochVector target;

  void validate() const {
    check_pure_target(initial, "initial state");
    check_pure_target(target, "target state");
  }
};

struct MlpControl {
  double omega = 0.0;
  double time = 0.0;
  bool quadrant_corrected = false;

  ControlPulse pulse() const { return ControlPulse::constant(omega, time); }
};

struct MlpLimits {
  double singular_tol = 1e-6;
  std::optional<double> omega_cap;  ///< defaults to 20 eps
  double endpoint_tol = 1e-9;       ///< allowed infidelity of the endpoint check
  double domain_tol = 1e-9;         ///< arccos argument slack before DomainError

  double cap(double epsilon) const { return omega_cap.value_or(kDefaultOmegaCapFactor * epsilon); }
};

namespace detail {

inline void check_epsilon(double epsilon) { require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be > 0"); }

inline void check_rabi(double omega, double epsilon, const MlpLimits& lim) {
  const double cap = lim.cap(epsilon);
  if (std::abs(omega) > cap) {
    fail(Errc::control_cap_exceeded,
         "MLP drive |omega| = " + std::to_string(std::abs(omega)) + " exceeds cap " + std::to_string(cap));
  }
}

inline void check_not_singular(const BoundaryPair& b, const MlpLimits& lim) {
  if (std::abs(b.target.x - b.initial.x) <= lim.singular_tol) {
    fail(Errc::divergent_control,
         "x_F = x_I: the optimal drive diverges; targets on this plane are unreachable with a single constant "
         "pulse");
  }
}

/// Coefficients of the zero-noise solution, divided by Omega so that they
/// stay finite at Omega = 0.
struct PathCoefficients {
  double omega;
  double w;   // sqrt(Omega^2 + eps^2)
  double a;   // alpha_1 / Omega
  double b;   // alpha_2 / Omega
  double c3;  // alpha_3
};

inline PathCoefficients path_coefficients(const BlochVector& qi, double omega, double epsilon) {
  const double w2 = omega * omega + epsilon * epsilon;
  const double w = std::sqrt(w2);
  return {omega, w, (omega * qi.z + epsilon * qi.x) / w2, -qi.y / w,
          (epsilon * epsilon * qi.z - epsilon * omega * qi.x) / w2};
}

inline BlochVector path_point(const PathCoefficients& k, double epsilon, double t) {
  const double c = std::cos(k.w * t);
  const double s = std::sin(k.w * t);
  const double u = k.a * c + k.b * s;
  return {epsilon * u - k.c3 * k.omega / epsilon, k.w * (k.a * s - k.b * c), k.omega * u + k.c3};
}

inline double endpoint_infidelity(const BoundaryPair& b, double omega, double time, double epsilon) {
  const BlochVector end = exact_rotation_step(b.initial, 0.0, omega, SystemParams::from_gamma(epsilon, 0.0), time);
  return 1.0 - fidelity(end, b.target);
}

}  // namespace detail

/// Omega = eps (z_F - z_I) / (x_F - x_I).
inline double optimal_rabi(const BoundaryPair& b, double epsilon = 1.0, const MlpLimits& lim = {}) {
  detail::check_epsilon(epsilon);
  b.validate();
  detail::check_not_singular(b, lim);
  const double omega = epsilon * (b.target.z - b.initial.z) / (b.target.x - b.initial.x);
  detail::check_rabi(omega, epsilon, lim);
  return omega;
}

/// Closed-form control. The principal rotation angle comes from the
/// arccos formula; targets in the first and third quadrants of the x-y plane
/// take the complementary angle 2 pi - theta. Every result is certified by
/// propagating the exact rotation; if the quadrant rule picks the wrong
/// branch (possible for general initial states) the other branch is used.
inline MlpControl solve_mlp(const BoundaryPair& b, double epsilon = 1.0, const MlpLimits& lim = {}) {
  const double omega = optimal_rabi(b, epsilon, lim);
  const auto k = detail::path_coefficients(b.initial, omega, epsilon);
  const double norm = k.a * k.a + k.b * k.b;
  if (norm <= 1e-300) fail(Errc::domain_error, "initial state lies on the rotation axis");
  const double xs = (b.target.x + k.c3 * omega / epsilon) / epsilon;  // a cos + b sin
  const double ys = b.target.y / k.w;                                 // a sin - b cos
  const double cos_t = (k.a * xs - k.b * ys) / norm;
  const double sin_t = (k.a * ys + k.b * xs) / norm;
  if (std::abs(cos_t) > 1.0 + lim.domain_tol) {
    fail(Errc::domain_error, "arccos argument " + std::to_string(cos_t) + " outside [-1, 1]");
  }
  // Principal value of arccos(cos_t), evaluated without its ill-conditioning
  // near 0 and pi.
  const double principal = std::atan2(std::abs(sin_t), std::clamp(cos_t, -1.0, 1.0));
  const double full = 2.0 * std::numbers::pi;
  const bool corrected = b.target.x * b.target.y > 0.0;
  const double first = corrected ? full - principal : principal;
  const double second = corrected ? principal : full - principal;
  for (const auto& [theta, flag] : {std::pair{first, corrected}, std::pair{second, !corrected}}) {
    if (theta <= 0.0) continue;
    const double time = theta / k.w;
    if (detail::endpoint_infidelity(b, omega, time, epsilon) <= lim.endpoint_tol) return {omega, time, flag};
  }
  fail(Errc::domain_error, "neither rotation branch reaches the target");
}

inline double optimal_time(const BoundaryPair& b, double epsilon = 1.0, const MlpLimits& lim = {}) {
  return solve_mlp(b, epsilon, lim).time;
}

/// Independent route: the rotation axis from the elevation angle phi of
/// q_F - q_I in the x-z plane, then the angle between q_I and q_F seen from
/// the centre of their common circle.
inline MlpControl geometric_solve(const BoundaryPair& b, double epsilon = 1.0, const MlpLimits& lim = {}) {
  detail::check_epsilon(epsilon);
  b.validate();
  detail::check_not_singular(b, lim);
  const double phi = std::atan((b.target.z - b.initial.z) / (b.target.x - b.initial.x));
  const double omega = epsilon * std::tan(phi);
  detail::check_rabi(omega, epsilon, lim);
  const BlochVector n{-std::sin(phi), 0.0, std::cos(phi)};  // w / |w|
  const BlochVector centre = n * dot(n, b.initial);
  const BlochVector qi = b.initial - centre;
  const BlochVector qf = b.target - centre;
  const BlochVector c = cross(qi, qf);
  double theta = std::atan2(c.norm(), dot(qi, qf));
  const bool reflex = dot(n, c) < 0.0;
  if (reflex) theta = 2.0 * std::numbers::pi - theta;
  if (qi.norm2() <= 1e-300 || theta <= 0.0) fail(Errc::domain_error, "degenerate rotation circle");
  return {omega, theta / std::hypot(omega, epsilon), reflex};
}

/// Zero-noise state at time t under the MLP control.
inline BlochVector mlp_state_at(const BoundaryPair& b, const MlpControl& ctl, double epsilon, double t) {
  return detail::path_point(detail::path_coefficients(b.initial, ctl.omega, epsilon), epsilon, t);
}

/// n_points states at uniform times over [0, T]; the first and last are the
/// boundary states themselves.
inline std::vector<BlochVector> analytic_path(const BoundaryPair& b, double epsilon, std::size_t n_points,
                                              const MlpLimits& lim = {}) {
  require(n_points >= 2, "n_points must be >= 2");
  const MlpControl ctl = solve_mlp(b, epsilon, lim);
  const auto k = detail::path_coefficients(b.initial, ctl.omega, epsilon);
  std::vector<BlochVector> path;
  path.reserve(n_points);
  path.push_back(b.initial);
  for (std::size_t i = 1; i + 1 < n_points; ++i) {
    const double t = ctl.time * static_cast<double>(i) / static_cast<double>(n_points - 1);
    path.push_back(detail::path_point(k, epsilon, t));
  }
  path.push_back(b.target);
  return path;
}

struct VariationalOptions {
  double dt = 1e-4;
  double tol = 1e-6;
  /// Conjugate initial value; defaults to q_I, which satisfies both
  /// canonical constraints.
  std::optional<ConjugateVector> p0;
  /// Multiplies the MLP drive, for sensitivity probes.
  double omega_scale = 1.0;
};

struct VariationalReport {
  double constraint_yz = 0.0;  ///< max |p_y z - p_z y|
  double constraint_xz = 0.0;  ///< max |p_x z - p_z x|
  double noise = 0.0;          ///< max |2 g kappa (p_y x - p_x y)|, the stationary noise
  double endpoint_miss = 0.0;  ///< |q(T) - q_F| under exact rotation with the (scaled) drive
  double path_deviation = 0.0; ///< max |q_euler(t) - q*(t)| against the analytic path
  std::size_t n_steps = 0;
  double tol = 0.0;

  double max_residual() const { return std::max({constraint_yz, constraint_xz, noise}); }
  bool ok() const { return max_residual() <= tol; }
};

/// Integrates the six first-order difference equations for (q, p) with the
/// zero noise path and records the constraint and stationarity residuals.
inline VariationalReport check_variational_solution(const BoundaryPair& b, double epsilon, const SystemParams& params,
                                                    const VariationalOptions& opts = {}) {
  require(std::isfinite(opts.dt) && opts.dt > 0.0, "dt must be > 0");
  require(std::isfinite(opts.tol) && opts.tol >= 0.0, "tol must be >= 0");
  MlpLimits lim;
  lim.omega_cap = params.omega_cap();
  const MlpControl ctl = solve_mlp(b, epsilon, lim);
  const double omega = ctl.omega * opts.omega_scale;
  const auto n = static_cast<std::size_t>(std::ceil(ctl.time / opts.dt - 1e-9));
  const double h = ctl.time / static_cast<double>(n);
  const double gk = 2.0 * params.g() * params.kappa();
  const auto k = detail::path_coefficients(b.initial, omega, epsilon);

  BlochVector q = b.initial;
  ConjugateVector p = opts.p0.value_or(ConjugateVector{q.x, q.y, q.z});
  VariationalReport rep;
  rep.n_steps = n;
  rep.tol = opts.tol;
  auto record = [&](std::size_t step) {
    rep.constraint_yz = std::max(rep.constraint_yz, std::abs(p.py * q.z - p.pz * q.y));
    rep.constraint_xz = std::max(rep.constraint_xz, std::abs(p.px * q.z - p.pz * q.x));
    rep.noise = std::max(rep.noise, std::abs(gk * (p.py * q.x - p.px * q.y)));
    const BlochVector exact = detail::path_point(k, epsilon, h * static_cast<double>(step));
    rep.path_deviation = std::max(rep.path_deviation, distance(q, exact));
  };
  record(0);
  for (std::size_t i = 1; i <= n; ++i) {
    const BlochVector qn{q.x - h * q.y * epsilon, q.y + h * (q.x * epsilon + q.z * omega), q.z - h * q.y * omega};
    const ConjugateVector pn{p.px - h * p.py * epsilon, p.py + h * (p.px * epsilon + p.pz * omega),
                             p.pz - h * p.py * omega};
    q = qn;
    p = pn;
    record(i);
  }
  const SystemParams free = SystemParams::from_gamma(epsilon, 0.0);
  rep.endpoint_miss = distance(exact_rotation_step(b.initial, 0.0, omega, free, ctl.time), b.target);
  return rep;
}

inline VariationalReport verify_variational_solution(const BoundaryPair& b, double epsilon,
                                                     const SystemParams& params, const VariationalOptions& opts = {}) {
  VariationalReport rep = check_variational_solution(b, epsilon, params, opts);
  if (!rep.ok()) {
    fail(Errc::residual_exceeded,
         "variational residual " + std::to_string(rep.max_residual()) + " exceeds " + std::to_string(rep.tol));
  }
  return rep;
}

}  // namespace qprep
