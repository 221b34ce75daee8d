#pragma once

// Mean-path (MP) control search: maximise the fidelity of the Lindblad final
// state over piecewise-constant drives on a fixed total time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qprep/lindblad.hpp"
#include "qprep/mlp.hpp"
#include "qprep/parallel.hpp"
#include "qprep/rng.hpp"

namespace qprep {

struct OptimizationProblem {
  BoundaryPair boundary;
  SystemParams params = SystemParams::from_gamma(1.0, 0.0);
  double total_time = 1.0;
  std::size_t n_segments = 1;
  double omega_lo = -kDefaultOmegaCapFactor;
  double omega_hi = kDefaultOmegaCapFactor;
  double dt = kDefaultTimeStep;
  MeanPathScheme scheme = MeanPathScheme::exact;

  /// Total time defaults to the MLP optimal time for the same boundary pair,
  /// bounds to +-omega_cap. The step is snapped to the nearest value that
  /// tiles each of the n_segments equal segments.
  static OptimizationProblem make(const BoundaryPair& boundary, const SystemParams& params, std::size_t n_segments = 1,
                                  std::optional<double> total_time = {}, double dt_target = kDefaultTimeStep) {
    require(n_segments >= 1, "n_segments must be >= 1");
    OptimizationProblem pr;
    pr.boundary = boundary;
    pr.params = params;
    pr.n_segments = n_segments;
    if (total_time) {
      pr.total_time = *total_time;
    } else {
      MlpLimits lim;
      lim.omega_cap = params.omega_cap();
      pr.total_time = solve_mlp(boundary, params.epsilon(), lim).time;
    }
    pr.omega_lo = -params.omega_cap();
    pr.omega_hi = params.omega_cap();
    require(std::isfinite(pr.total_time) && pr.total_time > 0.0, "total_time must be > 0");
    require(std::isfinite(dt_target) && dt_target > 0.0, "dt must be > 0");
    const double seg = pr.total_time / static_cast<double>(n_segments);
    pr.dt = seg / std::max(1.0, std::round(seg / dt_target));
    pr.validate();
    return pr;
  }

  void validate() const {
    boundary.validate();
    require(n_segments >= 1, "n_segments must be >= 1");
    require(std::isfinite(total_time) && total_time > 0.0, "total_time must be > 0");
    require(omega_lo < omega_hi, "omega bounds must satisfy lo < hi");
    require(std::abs(omega_lo) <= params.omega_cap() && std::abs(omega_hi) <= params.omega_cap(),
            "omega bounds must lie within the cap");
  }

  ControlPulse pulse(std::span<const double> omegas) const {
    require(omegas.size() == n_segments, "amplitude count must equal n_segments");
    return ControlPulse::uniform(omegas, total_time);
  }

  double clamp(double omega) const { return std::clamp(omega, omega_lo, omega_hi); }
};

inline double objective(const OptimizationProblem& pr, const ControlPulse& pulse) {
  return fidelity(lindblad_evolve(pr.boundary.initial, pulse, pr.params, pr.dt, pr.scheme), pr.boundary.target);
}

inline double objective(const OptimizationProblem& pr, std::span<const double> omegas) {
  return objective(pr, pr.pulse(omegas));
}

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Exact gradient of the discretised objective by the adjoint method. The
/// forward pass stores every grid state; the costate starts at target/2 and
/// is propagated backwards with the transposed step propagators. Segment j
/// collects lambda_{k+1}^T dPhi_j q_k over its steps.
inline ValueAndGradient adjoint_gradient(const OptimizationProblem& pr, std::span<const double> omegas) {
  const ControlPulse pulse = pr.pulse(omegas);
  pulse.check_cap(pr.params.omega_cap());
  const auto steps = segment_steps(pulse, pr.dt);
  const std::size_t m = omegas.size();
  std::vector<PropagatorDerivative> prop;
  prop.reserve(m);
  for (double w : omegas) prop.push_back(step_propagator_derivative(w, pr.params, pr.dt, pr.scheme));

  std::vector<Vec3> states{to_eigen(pr.boundary.initial)};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < steps[j]; ++k) states.push_back(prop[j].phi * states.back());
  }
  const Vec3 target = to_eigen(pr.boundary.target);
  ValueAndGradient out{0.5 * (1.0 + target.dot(states.back())), std::vector<double>(m, 0.0)};

  Vec3 lambda = 0.5 * target;
  std::size_t k = states.size() - 1;
  for (std::size_t j = m; j-- > 0;) {
    for (std::size_t s = 0; s < steps[j]; ++s) {
      --k;
      out.gradient[j] += lambda.dot(prop[j].dphi * states[k]);
      lambda = prop[j].phi.transpose() * lambda;
    }
  }
  return out;
}

inline std::vector<double> finite_difference_gradient(const OptimizationProblem& pr, std::span<const double> omegas,
                                                      double h = 1e-5) {
  std::vector<double> x(omegas.begin(), omegas.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const double fp = objective(pr, x);
    x[j] = x0 - h;
    const double fm = objective(pr, x);
    x[j] = x0;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

struct OptimizerOptions {
  std::size_t max_iters = 1000;
  std::size_t restarts = 16;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double init_span = 2.0;  ///< random starts are uniform in +-init_span * eps
  double gradient_check_tol = 1e-4;
  double fd_step = 1e-5;

  static OptimizerOptions grape_defaults() { return {}; }
  static OptimizerOptions crab_defaults() {
    OptimizerOptions o;
    o.max_iters = 3000;
    o.restarts = 8;
    return o;
  }
};

struct OptimizationResult {
  ControlPulse pulse;
  double objective = 0.0;
  std::size_t n_evaluations = 0;
  bool converged = false;
  std::size_t restarts_used = 0;
  std::size_t best_restart = 0;
  std::vector<double> trace;         ///< best objective after each iteration of the winning restart
  double gradient_check_error = 0.0; ///< worst adjoint vs finite-difference mismatch (GRAPE only)
  std::vector<double> crab_frequencies;
  std::vector<double> crab_coefficients;
};

/// 1-D search for a constant drive: a uniform grid over the bounds, then
/// golden-section refinement between the neighbours of the best grid point.
inline OptimizationResult optimize_single_pulse(const OptimizationProblem& pr, std::size_t grid_points = 401,
                                                double tol = 1e-10) {
  pr.validate();
  require(pr.n_segments == 1, "single-pulse search needs n_segments = 1");
  require(grid_points >= 3, "grid_points must be >= 3");
  OptimizationResult r;
  auto f = [&](double w) {
    ++r.n_evaluations;
    const double v[] = {w};
    return objective(pr, v);
  };
  const double h = (pr.omega_hi - pr.omega_lo) / static_cast<double>(grid_points - 1);
  std::size_t best = 0;
  double best_f = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double w = i + 1 == grid_points ? pr.omega_hi : pr.omega_lo + h * static_cast<double>(i);
    const double v = f(w);
    r.trace.push_back(std::max(best_f, v));
    if (v > best_f) {
      best_f = v;
      best = i;
    }
  }
  double best_w = pr.omega_lo + h * static_cast<double>(best);
  double a = std::max(pr.omega_lo, best_w - h);
  double b = std::min(pr.omega_hi, best_w + h);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (std::size_t it = 0; it < 200 && b - a > tol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    r.trace.push_back(std::max({best_f, fc, fd}));
  }
  r.converged = b - a <= tol;
  for (const auto& [w, v] : {std::pair{c, fc}, std::pair{d, fd}}) {
    if (v > best_f) {
      best_f = v;
      best_w = w;
    }
  }
  r.pulse = ControlPulse::constant(best_w, pr.total_time);
  r.objective = best_f;
  r.restarts_used = 1;
  return r;
}

namespace detail {

/// Starting amplitudes for restart r: the MLP constant drive for r = 0 when
/// the boundary admits one, uniform draws otherwise.
inline std::vector<double> initial_amplitudes(const OptimizationProblem& pr, const OptimizerOptions& o,
                                              std::size_t r) {
  std::vector<double> x(pr.n_segments, 0.0);
  if (r == 0) {
    try {
      MlpLimits lim;
      lim.omega_cap = pr.params.omega_cap();
      const double w = optimal_rabi(pr.boundary, pr.params.epsilon(), lim);
      std::fill(x.begin(), x.end(), pr.clamp(w));
      return x;
    } catch (const Error&) {
      std::fill(x.begin(), x.end(), pr.clamp(0.0));
      return x;
    }
  }
  Philox4x32 eng(derive_seed(o.seed, r), 0);
  const double span = o.init_span * pr.params.epsilon();
  const double lo = std::max(pr.omega_lo, -span);
  const double hi = std::min(pr.omega_hi, span);
  for (double& v : x) v = lo + (hi - lo) * eng.uniform();
  return x;
}

inline std::size_t pick_best(const std::vector<OptimizationResult>& runs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].objective > runs[best].objective) best = i;
  }
  return best;
}

inline OptimizationResult merge_restarts(std::vector<OptimizationResult> runs) {
  const std::size_t best = pick_best(runs);
  std::size_t evaluations = 0;
  double worst_check = 0.0;
  for (const auto& run : runs) {
    evaluations += run.n_evaluations;
    worst_check = std::max(worst_check, run.gradient_check_error);
  }
  OptimizationResult r = std::move(runs[best]);
  r.best_restart = best;
  r.restarts_used = runs.size();
  r.n_evaluations = evaluations;
  r.gradient_check_error = worst_check;
  return r;
}

}  // namespace detail

/// Projected gradient ascent on the segment amplitudes with an Armijo
/// backtracking line search (step halving from 1). The adjoint gradient is
/// checked against central differences on each restart's first iterate.
inline OptimizationResult grape_optimize(const OptimizationProblem& pr,
                                         const OptimizerOptions& o = OptimizerOptions::grape_defaults()) {
  pr.validate();
  require(o.restarts >= 1, "restarts must be >= 1");
  std::vector<OptimizationResult> runs(o.restarts);
  parallel_for(o.restarts, o.threads, [&](std::size_t r) {
    OptimizationResult& out = runs[r];
    std::vector<double> x = detail::initial_amplitudes(pr, o, r);
    ValueAndGradient vg = adjoint_gradient(pr, x);
    ++out.n_evaluations;
    const auto fd = finite_difference_gradient(pr, x, o.fd_step);
    out.n_evaluations += 2 * x.size();
    out.gradient_check_error = relative_error(vg.gradient, fd);
    if (out.gradient_check_error > o.gradient_check_tol) {
      fail(Errc::gradient_check_failed, "adjoint gradient disagrees with finite differences (relative error " +
                                            std::to_string(out.gradient_check_error) + ")");
    }
    out.trace.push_back(vg.value);
    std::vector<double> trial(x.size());
    for (std::size_t it = 0; it < o.max_iters; ++it) {
      bool accepted = false;
      for (double step = 1.0; step >= 1e-12; step *= 0.5) {
        double ascent = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          trial[j] = pr.clamp(x[j] + step * vg.gradient[j]);
          ascent += vg.gradient[j] * (trial[j] - x[j]);
        }
        if (ascent <= 0.0) break;  // projected gradient vanishes
        const double v = objective(pr, trial);
        ++out.n_evaluations;
        if (v >= vg.value + 1e-4 * ascent) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        out.converged = true;
        break;
      }
      double moved = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) moved = std::max(moved, std::abs(trial[j] - x[j]));
      const double previous = vg.value;
      x = trial;
      vg = adjoint_gradient(pr, x);
      ++out.n_evaluations;
      out.trace.push_back(vg.value);
      if (moved <= 1e-10 || (vg.value - previous <= 1e-15 && moved <= 1e-8)) {
        out.converged = true;
        break;
      }
    }
    out.pulse = pr.pulse(x);
    out.objective = vg.value;
  });
  return detail::merge_restarts(std::move(runs));
}

/// Minimises f with the Nelder-Mead simplex method; returns the best point.
/// trace receives the best value after every iteration and is therefore
/// monotone.
template <class F>
std::vector<double> nelder_mead(F&& f, std::vector<double> x0, double initial_step, std::size_t max_iters,
                                std::vector<double>& trace, std::size_t& evaluations, bool& converged,
                                double ftol = 1e-13, double xtol = 1e-10) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += initial_step;
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    vals[i] = f(pts[i]);
    ++evaluations;
  }
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n);
  std::vector<double> xr(n);
  std::vector<double> xe(n);
  std::vector<double> xc(n);
  auto blend = [&](std::vector<double>& out, double t) {  // centroid + t (centroid - worst)
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (centroid[j] - pts[order[n]][j]);
  };
  converged = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order[0];
    const std::size_t worst = order[n];
    double size = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) size = std::max(size, std::abs(pts[order[i]][j] - pts[best][j]));
    }
    if (vals[worst] - vals[best] <= ftol && size <= xtol) {
      converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[i]][j] / static_cast<double>(n);
    }
    blend(xr, 1.0);
    const double fr = f(xr);
    ++evaluations;
    if (fr < vals[best]) {
      blend(xe, 2.0);
      const double fe = f(xe);
      ++evaluations;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[order[n - 1]]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      blend(xc, outside ? 0.5 : -0.5);
      const double fc = f(xc);
      ++evaluations;
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          auto& p = pts[order[i]];
          for (std::size_t j = 0; j < n; ++j) p[j] = pts[best][j] + 0.5 * (p[j] - pts[best][j]);
          vals[order[i]] = f(p);
          ++evaluations;
        }
      }
    }
    trace.push_back(*std::min_element(vals.begin(), vals.end()));
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return pts[best];
}

/// Segment means of Omega(t) = c0 + sum_k a_k cos(nu_k t) + b_k sin(nu_k t),
/// clamped to the bounds. coeffs = {c0, a_1, b_1, a_2, b_2, ...}.
inline std::vector<double> crab_segments(const OptimizationProblem& pr, std::span<const double> freqs,
                                         std::span<const double> coeffs) {
  require(coeffs.size() == 1 + 2 * freqs.size(), "CRAB needs 1 + 2 n_basis coefficients");
  const double seg = pr.total_time / static_cast<double>(pr.n_segments);
  std::vector<double> out(pr.n_segments);
  for (std::size_t j = 0; j < pr.n_segments; ++j) {
    const double t0 = seg * static_cast<double>(j);
    const double t1 = seg * static_cast<double>(j + 1);
    double v = coeffs[0];
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      const double nu = freqs[k];
      v += coeffs[1 + 2 * k] * (std::sin(nu * t1) - std::sin(nu * t0)) / (nu * seg);
      v += coeffs[2 + 2 * k] * (std::cos(nu * t0) - std::cos(nu * t1)) / (nu * seg);
    }
    out[j] = pr.clamp(v);
  }
  return out;
}

/// Chopped random basis search: a constant plus n_basis Fourier pairs with
/// frequencies nu_k = (2 pi k / T)(1 + u), u ~ U[-0.5, 0.5] drawn once per
/// restart (u = 0 for restart 0). The continuous drive is averaged onto the
/// problem's segments before evaluation.
inline OptimizationResult crab_optimize(const OptimizationProblem& pr, std::size_t n_basis = 2,
                                        const OptimizerOptions& o = OptimizerOptions::crab_defaults()) {
  pr.validate();
  require(o.restarts >= 1, "restarts must be >= 1");
  std::vector<OptimizationResult> runs(o.restarts);
  parallel_for(o.restarts, o.threads, [&](std::size_t r) {
    OptimizationResult& out = runs[r];
    Philox4x32 eng(derive_seed(o.seed ^ 0xC4AB, r), 1);
    const double u = r == 0 ? 0.0 : eng.uniform() - 0.5;
    std::vector<double> freqs(n_basis);
    for (std::size_t k = 0; k < n_basis; ++k) {
      freqs[k] = 2.0 * std::numbers::pi * static_cast<double>(k + 1) / pr.total_time * (1.0 + u);
    }
    std::vector<double> c(1 + 2 * n_basis, 0.0);
    const std::vector<double> start = detail::initial_amplitudes(pr, o, r);
    double mean = 0.0;
    for (double v : start) mean += v / static_cast<double>(start.size());
    c[0] = mean;
    if (r != 0) {
      const double span = 0.5 * o.init_span * pr.params.epsilon();
      for (std::size_t i = 1; i < c.size(); ++i) c[i] = span * (2.0 * eng.uniform() - 1.0);
    }
    auto f = [&](const std::vector<double>& coeffs) { return -objective(pr, crab_segments(pr, freqs, coeffs)); };
    std::vector<double> trace;
    std::size_t evals = 0;
    bool converged = false;
    const double step = 0.25 * o.init_span * pr.params.epsilon();
    // A second pass from a fresh simplex guards against premature collapse.
    for (int pass = 0; pass < 2; ++pass) {
      c = nelder_mead(f, c, step, o.max_iters, trace, evals, converged);
    }
    const auto amps = crab_segments(pr, freqs, c);
    out.pulse = pr.pulse(amps);
    out.objective = objective(pr, amps);
    out.n_evaluations = evals + 1;
    out.converged = converged;
    out.trace.reserve(trace.size());
    for (double v : trace) out.trace.push_back(-v);
    out.crab_frequencies = freqs;
    out.crab_coefficients = c;
  });
  return detail::merge_restarts(std::move(runs));
}

}  // namespace qprep
