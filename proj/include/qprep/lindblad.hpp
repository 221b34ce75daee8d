#pragma once

// Mean-path (Lindblad) evolution of the driven, dephased qubit.
//
// In Bloch form the master equation is linear, dq/dt = M(Omega) q with
//   M = [[-gamma, -eps, 0], [eps, -gamma, Omega], [0, -Omega, 0]].
// For a piecewise-constant drive the exact step propagator is exp(M dt).

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <vector>

#include "qprep/bloch.hpp"

namespace qprep {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

enum class MeanPathScheme {
  exact,      ///< exp(M dt) per step; exact for piecewise-constant drives
  ito_euler,  ///< repeated ito_mean_step (first order, not norm-bounded)
};

inline Vec3 to_eigen(const BlochVector& q) { return {q.x, q.y, q.z}; }
inline BlochVector from_eigen(const Vec3& v) { return {v(0), v(1), v(2)}; }

inline Mat3 lindblad_generator(double omega, const SystemParams& p) {
  const double e = p.epsilon();
  const double r = p.gamma();
  Mat3 m;
  m << -r, -e, 0.0,
        e, -r, omega,
      0.0, -omega, 0.0;
  return m;
}

/// dM/dOmega; constant because the drive enters linearly.
inline Mat3 control_generator() {
  Mat3 m;
  m << 0.0, 0.0, 0.0,
       0.0, 0.0, 1.0,
       0.0, -1.0, 0.0;
  return m;
}

inline Mat3 step_propagator(double omega, const SystemParams& p, double dt, MeanPathScheme scheme) {
  const Mat3 m = lindblad_generator(omega, p);
  if (scheme == MeanPathScheme::ito_euler) return Mat3::Identity() + dt * m;
  return (m * dt).exp();
}

struct PropagatorDerivative {
  Mat3 phi;   ///< step propagator
  Mat3 dphi;  ///< derivative of phi with respect to Omega
};

/// Step propagator together with its Omega-derivative. For the exact scheme
/// the derivative is int_0^dt exp(M(dt-s)) E exp(M s) ds, read off the upper
/// right block of exp([[M, E], [0, M]] dt).
inline PropagatorDerivative step_propagator_derivative(double omega, const SystemParams& p, double dt,
                                                       MeanPathScheme scheme) {
  const Mat3 m = lindblad_generator(omega, p);
  const Mat3 e = control_generator();
  if (scheme == MeanPathScheme::ito_euler) return {Mat3::Identity() + dt * m, dt * e};
  Eigen::Matrix<double, 6, 6> block = Eigen::Matrix<double, 6, 6>::Zero();
  block.topLeftCorner<3, 3>() = m * dt;
  block.topRightCorner<3, 3>() = e * dt;
  block.bottomRightCorner<3, 3>() = m * dt;
  const Eigen::Matrix<double, 6, 6> ex = block.exp();
  return {ex.topLeftCorner<3, 3>(), ex.topRightCorner<3, 3>()};
}

/// Final mean state after the whole pulse.
inline BlochVector lindblad_evolve(const BlochVector& q0, const ControlPulse& pulse, const SystemParams& p,
                                   double dt = kDefaultTimeStep, MeanPathScheme scheme = MeanPathScheme::exact) {
  pulse.check_cap(p.omega_cap());
  const auto steps = segment_steps(pulse, dt);
  Vec3 q = to_eigen(q0);
  const auto segs = pulse.segments();
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const Mat3 phi = step_propagator(segs[j].omega, p, dt, scheme);
    for (std::size_t k = 0; k < steps[j]; ++k) q = phi * q;
  }
  return from_eigen(q);
}

/// Mean states at every grid time, including t = 0 and t = total_time.
inline std::vector<BlochVector> lindblad_path(const BlochVector& q0, const ControlPulse& pulse,
                                              const SystemParams& p, double dt = kDefaultTimeStep,
                                              MeanPathScheme scheme = MeanPathScheme::exact) {
  pulse.check_cap(p.omega_cap());
  const auto steps = segment_steps(pulse, dt);
  std::vector<BlochVector> path{q0};
  Vec3 q = to_eigen(q0);
  const auto segs = pulse.segments();
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const Mat3 phi = step_propagator(segs[j].omega, p, dt, scheme);
    for (std::size_t k = 0; k < steps[j]; ++k) {
      q = phi * q;
      path.push_back(from_eigen(q));
    }
  }
  return path;
}

}  // namespace qprep
