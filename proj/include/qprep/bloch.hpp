#pragma once

// Qubit state primitives on the Bloch sphere: state and parameter types,
// piecewise-constant drives, single-step maps and the fidelity functional.
//
// Units: the qubit energy gap epsilon sets the scale. Times are in 1/epsilon
// and frequencies in epsilon. Dynamics are generated by
//   H = (eps/2) sz - (Omega/2) sx + g xi(t) sz,
// i.e. a rotation of the Bloch vector about w = (-Omega, 0, eps + 2 g xi).

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qprep/error.hpp"

namespace qprep {

inline constexpr double kPurityTolerance = 1e-9;
inline constexpr double kDefaultTimeStep = 0.01;
inline constexpr double kDefaultOmegaCapFactor = 20.0;
inline constexpr double kGridTolerance = 1e-6;

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr BlochVector() = default;
  constexpr BlochVector(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  static constexpr BlochVector ground() { return {0.0, 0.0, -1.0}; }

  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
  bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  bool is_pure(double tol = kPurityTolerance) const { return std::abs(norm2() - 1.0) <= tol; }
  bool is_physical(double tol = kPurityTolerance) const { return norm2() <= 1.0 + tol; }

  BlochVector normalized() const {
    const double n = norm();
    return n > 0.0 ? BlochVector{x / n, y / n, z / n} : *this;
  }

  constexpr BlochVector operator+(const BlochVector& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr BlochVector operator-(const BlochVector& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr BlochVector operator-() const { return {-x, -y, -z}; }
  constexpr BlochVector operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr BlochVector operator/(double s) const { return {x / s, y / s, z / s}; }
  BlochVector& operator+=(const BlochVector& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  constexpr bool operator==(const BlochVector&) const = default;
};

constexpr BlochVector operator*(double s, const BlochVector& v) { return v * s; }
constexpr double dot(const BlochVector& a, const BlochVector& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr BlochVector cross(const BlochVector& a, const BlochVector& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double distance(const BlochVector& a, const BlochVector& b) { return (a - b).norm(); }

/// Conjugate (Lagrange-multiplier) variables paired with a Bloch vector.
struct ConjugateVector {
  double px = 0.0;
  double py = 0.0;
  double pz = 0.0;

  bool is_finite() const { return std::isfinite(px) && std::isfinite(py) && std::isfinite(pz); }
};

/// Physical constants of the dephasing model. The dephasing rate is derived,
/// gamma = 2 g^2 kappa, and never stored independently of g and kappa.
class SystemParams {
 public:
  static SystemParams from_coupling(double epsilon, double g, double kappa) {
    return SystemParams(epsilon, g, kappa);
  }

  /// Picks g = 1, kappa = gamma/2 (exact in binary floating point), or g = 0,
  /// kappa = 1 for the noiseless case. Only gamma enters any observable.
  static SystemParams from_gamma(double epsilon, double gamma) {
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0");
    if (gamma == 0.0) return SystemParams(epsilon, 0.0, 1.0);
    return SystemParams(epsilon, 1.0, gamma / 2.0);
  }

  double epsilon() const { return epsilon_; }
  double g() const { return g_; }
  double kappa() const { return kappa_; }
  double gamma() const { return gamma_; }
  double omega_cap() const { return omega_cap_; }

  SystemParams with_omega_cap(double cap) const {
    require(std::isfinite(cap) && cap > 0.0, "omega_cap must be positive");
    SystemParams copy = *this;
    copy.omega_cap_ = cap;
    return copy;
  }

  SystemParams with_gamma(double gamma) const {
    SystemParams copy = from_gamma(epsilon_, gamma);
    copy.omega_cap_ = omega_cap_;
    return copy;
  }

 private:
  SystemParams(double epsilon, double g, double kappa)
      : epsilon_(epsilon), g_(g), kappa_(kappa), gamma_(2.0 * g * g * kappa),
        omega_cap_(kDefaultOmegaCapFactor * epsilon) {
    require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be > 0");
    require(std::isfinite(kappa) && kappa > 0.0, "kappa must be > 0");
    require(std::isfinite(g) && g >= 0.0, "g must be >= 0");
  }

  double epsilon_;
  double g_;
  double kappa_;
  double gamma_;
  double omega_cap_;
};

struct PulseSegment {
  double duration = 0.0;
  double omega = 0.0;

  constexpr bool operator==(const PulseSegment&) const = default;
};

/// Piecewise-constant Rabi drive over [0, total_time).
class ControlPulse {
 public:
  ControlPulse() = default;

  explicit ControlPulse(std::vector<PulseSegment> segments) : segments_(std::move(segments)) {
    require(!segments_.empty(), "a pulse needs at least one segment");
    total_time_ = 0.0;
    for (const auto& s : segments_) {
      require(std::isfinite(s.duration) && s.duration > 0.0, "segment durations must be > 0");
      require(std::isfinite(s.omega), "segment amplitudes must be finite");
      total_time_ += s.duration;
    }
  }

  static ControlPulse constant(double omega, double duration) { return ControlPulse({{duration, omega}}); }

  /// m equal-length segments spanning total_time.
  static ControlPulse uniform(std::span<const double> omegas, double total_time) {
    require(!omegas.empty(), "a pulse needs at least one amplitude");
    require(std::isfinite(total_time) && total_time > 0.0, "total_time must be > 0");
    const double d = total_time / static_cast<double>(omegas.size());
    std::vector<PulseSegment> segs;
    segs.reserve(omegas.size());
    for (double w : omegas) segs.push_back({d, w});
    ControlPulse p(std::move(segs));
    p.total_time_ = total_time;
    return p;
  }

  std::span<const PulseSegment> segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  double total_time() const { return total_time_; }

  std::vector<double> amplitudes() const {
    std::vector<double> out;
    out.reserve(segments_.size());
    for (const auto& s : segments_) out.push_back(s.omega);
    return out;
  }

  double max_abs_omega() const {
    double m = 0.0;
    for (const auto& s : segments_) m = std::max(m, std::abs(s.omega));
    return m;
  }

  /// Right-continuous lookup; t must lie in [0, total_time).
  double omega_at(double t) const {
    require(!segments_.empty(), "empty pulse");
    require(t >= 0.0 && t < total_time_, "time outside [0, total_time)");
    double start = 0.0;
    for (const auto& s : segments_) {
      if (t < start + s.duration) return s.omega;
      start += s.duration;
    }
    return segments_.back().omega;
  }

  void check_cap(double omega_cap) const {
    for (const auto& s : segments_) {
      if (std::abs(s.omega) > omega_cap) {
        fail(Errc::control_cap_exceeded,
             "|omega| = " + std::to_string(std::abs(s.omega)) + " exceeds cap " + std::to_string(omega_cap));
      }
    }
  }

  bool operator==(const ControlPulse&) const = default;

 private:
  std::vector<PulseSegment> segments_;
  double total_time_ = 0.0;
};

/// Number of dt steps in each segment. Throws SegmentGridMismatch unless dt
/// tiles every segment to within one part in 1e6.
inline std::vector<std::size_t> segment_steps(const ControlPulse& pulse, double dt) {
  require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
  require(!pulse.empty(), "empty pulse");
  std::vector<std::size_t> steps;
  steps.reserve(pulse.size());
  for (const auto& s : pulse.segments()) {
    const double ratio = s.duration / dt;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(n * dt - s.duration) > kGridTolerance * s.duration) {
      fail(Errc::segment_grid_mismatch,
           "dt = " + std::to_string(dt) + " does not tile a segment of duration " + std::to_string(s.duration));
    }
    steps.push_back(static_cast<std::size_t>(n));
  }
  return steps;
}

inline std::size_t total_steps(const ControlPulse& pulse, double dt) {
  std::size_t n = 0;
  for (std::size_t s : segment_steps(pulse, dt)) n += s;
  return n;
}

/// Step closest to dt_target that tiles every segment of the pulse.
inline double fit_time_step(const ControlPulse& pulse, double dt_target) {
  require(std::isfinite(dt_target) && dt_target > 0.0, "dt must be > 0");
  require(!pulse.empty(), "empty pulse");
  const double first = pulse.segments().front().duration;
  const double n = std::max(1.0, std::round(first / dt_target));
  const double dt = first / n;
  segment_steps(pulse, dt);
  return dt;
}

/// Second-order expansion of the noise-conditioned unitary step, exactly as
/// q + dt A q + dt^2/2 A^2 q with A the generator at eps~ = eps + 2 g xi.
inline BlochVector unravelled_step(const BlochVector& q, double xi, double omega, const SystemParams& p, double dt) {
  const double e = p.epsilon() + 2.0 * p.g() * xi;
  const double h = 0.5 * dt * dt;
  return {
      q.x - dt * q.y * e - h * (q.z * omega * e + q.x * e * e),
      q.y + dt * (q.x * e + q.z * omega) - h * (q.y * omega * omega + q.y * e * e),
      q.z - dt * q.y * omega - h * (q.x * omega * e + q.z * omega * omega),
  };
}

/// Exact rotation about w = (-omega, 0, eps~) by |w| dt (Rodrigues formula).
inline BlochVector exact_rotation_step(const BlochVector& q, double xi, double omega, const SystemParams& p,
                                       double dt) {
  const double e = p.epsilon() + 2.0 * p.g() * xi;
  const double w = std::hypot(omega, e);
  if (w == 0.0) return q;
  const BlochVector n{-omega / w, 0.0, e / w};
  const double angle = w * dt;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return q * c + cross(n, q) * s + n * (dot(n, q) * (1.0 - c));
}

/// First-order Ito mean step (noise averaged out): dephasing at rate 2 g^2 kappa.
inline BlochVector ito_mean_step(const BlochVector& q, double omega, const SystemParams& p, double dt) {
  const double e = p.epsilon();
  const double r = 2.0 * p.g() * p.g() * p.kappa();
  return {
      q.x - dt * (q.y * e + r * q.x),
      q.y + dt * (q.x * e + q.z * omega - r * q.y),
      q.z - dt * q.y * omega,
  };
}

inline void check_pure_target(const BlochVector& target, const char* what = "target") {
  if (!target.is_finite() || !target.is_pure()) {
    fail(Errc::non_pure_target, std::string(what) + " is not a pure state (|q|^2 = " +
                                    std::to_string(target.norm2()) + ")");
  }
}

/// Fidelity of a (possibly mixed) state q to a pure target: (1 + q . target)/2.
inline double fidelity(const BlochVector& q, const BlochVector& target) {
  check_pure_target(target);
  return 0.5 * (1.0 + dot(q, target));
}

/// Pure state at polar position (z, azimuth phi).
inline BlochVector state_on_plane(double z, double phi) {
  require(z >= -1.0 && z <= 1.0, "z must be in [-1, 1]");
  const double r = std::sin(std::acos(z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace qprep
