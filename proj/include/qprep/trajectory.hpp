#pragma once

// Stochastic trajectories of the unravelled (noise-conditioned) qubit and
// ensemble statistics over them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qprep/bloch.hpp"
#include "qprep/parallel.hpp"
#include "qprep/rng.hpp"

namespace qprep {

/// Time-discretised white noise. Each sample is N(0, kappa/dt).
struct NoisePath {
  double dt = 0.0;
  std::vector<double> values;
};

inline NoisePath sample_noise(std::size_t n_steps, double dt, double kappa, NormalStream& stream) {
  require(n_steps >= 1, "n_steps must be >= 1");
  require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
  require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be >= 0");
  NoisePath path{dt, std::vector<double>(n_steps, 0.0)};
  if (kappa == 0.0) return path;
  const double sigma = std::sqrt(kappa / dt);
  for (double& v : path.values) v = sigma * stream();
  return path;
}

/// Sum of -xi^2 dt / (2 kappa); the Gaussian normalisation is left out.
inline double path_log_likelihood(const NoisePath& path, double kappa) {
  require(std::isfinite(kappa) && kappa > 0.0, "kappa must be > 0");
  double s = 0.0;
  for (double v : path.values) s += v * v;
  return -s * path.dt / (2.0 * kappa);
}

struct TrajectoryOptions {
  /// Project back onto the unit sphere after every step. The second-order
  /// map drifts off the sphere at O(dt^3) per step, which at strong
  /// dephasing is enough to push fidelities above one.
  bool renormalize = true;
};

namespace detail {

inline BlochVector advance(const BlochVector& q, double xi, double omega, const SystemParams& p, double dt,
                           bool renormalize) {
  BlochVector next = unravelled_step(q, xi, omega, p, dt);
  if (renormalize) next = next.normalized();
  return next;
}

template <class NoiseSource, class Visit>
BlochVector run_trajectory(const BlochVector& q0, const ControlPulse& pulse, const SystemParams& p, double dt,
                           const std::vector<std::size_t>& steps, NoiseSource&& noise, bool renormalize,
                           Visit&& visit) {
  BlochVector q = q0;
  const auto segs = pulse.segments();
  for (std::size_t j = 0; j < segs.size(); ++j) {
    for (std::size_t k = 0; k < steps[j]; ++k) {
      q = advance(q, noise(), segs[j].omega, p, dt, renormalize);
      visit(q);
    }
  }
  return q;
}

}  // namespace detail

/// Deterministic replay of a trajectory under a given noise realisation.
inline BlochVector propagate_with_noise(const BlochVector& q0, const ControlPulse& pulse, const SystemParams& p,
                                        const NoisePath& noise, const TrajectoryOptions& opts = {}) {
  pulse.check_cap(p.omega_cap());
  const auto steps = segment_steps(pulse, noise.dt);
  std::size_t n = 0;
  for (std::size_t s : steps) n += s;
  require(noise.values.size() == n, "noise path length does not match the pulse grid");
  std::size_t i = 0;
  return detail::run_trajectory(
      q0, pulse, p, noise.dt, steps, [&] { return noise.values[i++]; }, opts.renormalize, [](const BlochVector&) {});
}

struct TrajectoryOutcome {
  BlochVector final_state;
  NoisePath noise;
};

inline TrajectoryOutcome simulate_trajectory(const BlochVector& q0, const ControlPulse& pulse, const SystemParams& p,
                                             double dt, NormalStream& stream, const TrajectoryOptions& opts = {}) {
  pulse.check_cap(p.omega_cap());
  NoisePath noise = sample_noise(total_steps(pulse, dt), dt, p.kappa(), stream);
  const BlochVector final_state = propagate_with_noise(q0, pulse, p, noise, opts);
  return {final_state, std::move(noise)};
}

/// Every grid state of one trajectory, including q0.
inline std::vector<BlochVector> trajectory_states(const BlochVector& q0, const ControlPulse& pulse,
                                                  const SystemParams& p, double dt, NormalStream& stream,
                                                  const TrajectoryOptions& opts = {}) {
  const TrajectoryOutcome out = simulate_trajectory(q0, pulse, p, dt, stream, opts);
  const auto steps = segment_steps(pulse, dt);
  std::vector<BlochVector> states{q0};
  std::size_t i = 0;
  detail::run_trajectory(
      q0, pulse, p, dt, steps, [&] { return out.noise.values[i++]; }, opts.renormalize,
      [&](const BlochVector& q) { states.push_back(q); });
  return states;
}

struct EnsembleOptions {
  unsigned threads = 0;  ///< worker hint; never changes results
  bool renormalize = true;
  std::optional<BlochVector> target;
  /// Above this many trajectories only a deterministic hash-thinned subset
  /// of the finals is kept; moments are still computed over all of them.
  std::size_t max_retained = 1'000'000;
};

struct EnsembleResult {
  std::vector<BlochVector> finals;
  BlochVector mean_final;
  BlochVector stddev_final;  ///< per-component sample standard deviation
  std::optional<BlochVector> target;
  std::optional<double> avg_fidelity;
  std::size_t n_total = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  bool finals_sampled = false;
};

inline constexpr std::size_t kEnsembleChunk = 1024;

/// n_total independent trajectories; trajectory i draws from the Philox
/// stream (master_seed, i). Trajectories are grouped in fixed chunks and
/// reduced in chunk order, so the result is bit-identical for any thread
/// count.
inline EnsembleResult simulate_ensemble(const BlochVector& q0, const ControlPulse& pulse, const SystemParams& p,
                                        double dt, std::size_t n_total, std::uint64_t master_seed,
                                        const EnsembleOptions& opts = {}) {
  require(n_total >= 1, "n_total must be >= 1");
  pulse.check_cap(p.omega_cap());
  if (opts.target) check_pure_target(*opts.target);
  const auto steps = segment_steps(pulse, dt);
  const bool thin = n_total > opts.max_retained;
  // Keep trajectory i when its hash falls below this threshold.
  const double keep_fraction = thin ? static_cast<double>(opts.max_retained) / static_cast<double>(n_total) : 1.0;
  const auto keep_below = static_cast<std::uint64_t>(keep_fraction * 0x1.0p64 * (1.0 - 0x1.0p-52));
  const double sigma = p.kappa() > 0.0 && p.g() > 0.0 ? std::sqrt(p.kappa() / dt) : 0.0;

  struct Chunk {
    std::vector<BlochVector> kept;
    double n = 0.0;
    BlochVector mean;
    BlochVector m2;
    double fid_sum = 0.0;
  };
  const std::size_t n_chunks = (n_total + kEnsembleChunk - 1) / kEnsembleChunk;
  std::vector<Chunk> chunks(n_chunks);

  parallel_for(n_chunks, opts.threads, [&](std::size_t c) {
    Chunk& out = chunks[c];
    const std::size_t begin = c * kEnsembleChunk;
    const std::size_t end = std::min(n_total, begin + kEnsembleChunk);
    out.kept.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      NormalStream stream(master_seed, i);
      auto noise = [&] { return sigma == 0.0 ? 0.0 : sigma * stream(); };
      const BlochVector q =
          detail::run_trajectory(q0, pulse, p, dt, steps, noise, opts.renormalize, [](const BlochVector&) {});
      out.n += 1.0;
      const BlochVector d = q - out.mean;
      out.mean += d / out.n;
      const BlochVector d2 = q - out.mean;
      out.m2 += BlochVector{d.x * d2.x, d.y * d2.y, d.z * d2.z};
      if (opts.target) out.fid_sum += fidelity(q, *opts.target);
      if (!thin || mix64(master_seed ^ mix64(i)) < keep_below) out.kept.push_back(q);
    }
  });

  EnsembleResult r;
  r.n_total = n_total;
  r.seed = master_seed;
  r.dt = dt;
  r.target = opts.target;
  r.finals_sampled = thin;
  double n = 0.0;
  BlochVector mean;
  BlochVector m2;
  double fid_sum = 0.0;
  for (Chunk& c : chunks) {
    // Chan et al. pairwise combination of means and second moments.
    const double nn = n + c.n;
    const BlochVector delta = c.mean - mean;
    mean += delta * (c.n / nn);
    m2 += c.m2 + BlochVector{delta.x * delta.x, delta.y * delta.y, delta.z * delta.z} * (n * c.n / nn);
    n = nn;
    fid_sum += c.fid_sum;
    r.finals.insert(r.finals.end(), c.kept.begin(), c.kept.end());
  }
  r.mean_final = mean;
  if (n_total > 1) {
    const double inv = 1.0 / (n - 1.0);
    r.stddev_final = {std::sqrt(m2.x * inv), std::sqrt(m2.y * inv), std::sqrt(m2.z * inv)};
  }
  if (opts.target) r.avg_fidelity = fid_sum / n;
  return r;
}

struct SuccessRateReport {
  double delta = 0.0;
  std::size_t n_success = 0;
  std::size_t n_total = 0;  ///< finals examined (all of them unless thinned)
  double rate_percent = 0.0;
};

/// Share of finals whose fidelity to the target is at least 1 - delta.
inline SuccessRateReport success_rate(const EnsembleResult& result, const BlochVector& target, double delta) {
  require(std::isfinite(delta) && delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  check_pure_target(target);
  require(!result.finals.empty(), "ensemble has no retained finals");
  SuccessRateReport rep{delta, 0, result.finals.size(), 0.0};
  const double threshold = 1.0 - delta;
  for (const auto& q : result.finals) {
    if (fidelity(q, target) >= threshold) ++rep.n_success;
  }
  rep.rate_percent = 100.0 * static_cast<double>(rep.n_success) / static_cast<double>(rep.n_total);
  return rep;
}

enum class Axis { x, y, z };

inline double component(const BlochVector& q, Axis a) {
  switch (a) {
    case Axis::x: return q.x;
    case Axis::y: return q.y;
    case Axis::z: return q.z;
  }
  return q.z;
}

struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double bin_lo(std::size_t i) const { return lo + bin_width() * static_cast<double>(i); }
  double bin_hi(std::size_t i) const { return i + 1 == counts.size() ? hi : bin_lo(i + 1); }
  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::size_t mode_bin() const {
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
};

inline constexpr std::size_t kDefaultHistogramBins = 61;

/// Bins one Bloch component over [-1, 1]; out-of-range values (numerical
/// overshoot) land in the end bins.
inline Histogram final_state_histogram(const EnsembleResult& result, Axis axis,
                                       std::size_t n_bins = kDefaultHistogramBins) {
  require(n_bins >= 1, "n_bins must be >= 1");
  Histogram h{-1.0, 1.0, std::vector<std::size_t>(n_bins, 0)};
  const double scale = static_cast<double>(n_bins) / (h.hi - h.lo);
  for (const auto& q : result.finals) {
    const double v = (component(q, axis) - h.lo) * scale;
    const auto idx = static_cast<std::ptrdiff_t>(std::floor(v));
    const auto clamped = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
    ++h.counts[static_cast<std::size_t>(clamped)];
  }
  return h;
}

}  // namespace qprep
