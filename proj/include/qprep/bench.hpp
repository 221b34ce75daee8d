#pragma once

// Experiment drivers: MLP vs MP success-rate sweeps over target states and
// dephasing rates, the multi-pulse comparison table, tolerance calibration
// from finite-ensemble fluctuations, and trajectory bundles for inspecting
// the two controls in different dephasing regimes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qprep/lindblad.hpp"
#include "qprep/mlp.hpp"
#include "qprep/optimize.hpp"
#include "qprep/parallel.hpp"
#include "qprep/trajectory.hpp"

namespace qprep {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  require(n >= 1, "linspace needs n >= 1");
  if (n == 1) return {lo};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

struct SweepGrid {
  double z_plane = -0.5;
  std::vector<double> phi_values;
  std::vector<double> gamma_values;
  std::size_t n_total = 10000;
  double delta = 0.005;
  double dt = kDefaultTimeStep;

  /// 25 azimuths over [pi/2, 3pi/2] by 21 rates over [0, 1], 1e4 trajectories.
  static SweepGrid standard(double z_plane) {
    return {z_plane, linspace(0.5 * std::numbers::pi, 1.5 * std::numbers::pi, 25), linspace(0.0, 1.0, 21), 10000,
            0.005, kDefaultTimeStep};
  }
  /// 9 x 6 cells at 1e3 trajectories.
  static SweepGrid coarse(double z_plane) {
    return {z_plane, linspace(0.5 * std::numbers::pi, 1.5 * std::numbers::pi, 9), linspace(0.0, 1.0, 6), 1000, 0.005,
            kDefaultTimeStep};
  }

  std::size_t size() const { return phi_values.size() * gamma_values.size(); }
};

struct SweepCell {
  double z_F = 0.0;
  double phi_F = 0.0;
  BlochVector target;
  double gamma = 0.0;
  double s_mlp = std::numeric_limits<double>::quiet_NaN();
  double s_mp = std::numeric_limits<double>::quiet_NaN();
  double diff = std::numeric_limits<double>::quiet_NaN();
  std::optional<MlpControl> mlp;
  double mp_omega = std::numeric_limits<double>::quiet_NaN();
  std::string skip_reason;  ///< empty for evaluated cells

  bool skipped() const { return !skip_reason.empty(); }
};

struct SweepOptions {
  unsigned threads = 0;
  SystemParams params = SystemParams::from_gamma(1.0, 0.0);  ///< eps and cap template; gamma is swept
};

/// Cells are ordered phi-major (all gammas of the first azimuth first). Each
/// cell seeds both ensembles with derive_seed(master_seed, cell index), so
/// MLP and MP see the same noise realisations.
inline std::vector<SweepCell> run_sweep(const SweepGrid& grid, std::uint64_t master_seed,
                                        const SweepOptions& opts = {}) {
  require(!grid.phi_values.empty() && !grid.gamma_values.empty(), "empty sweep grid");
  require(grid.n_total >= 1, "n_total must be >= 1");
  std::vector<SweepCell> cells(grid.size());
  const BlochVector q0 = BlochVector::ground();
  parallel_for(cells.size(), opts.threads, [&](std::size_t index) {
    const std::size_t i = index / grid.gamma_values.size();
    const std::size_t j = index % grid.gamma_values.size();
    SweepCell& c = cells[index];
    c.z_F = grid.z_plane;
    c.phi_F = grid.phi_values[i];
    c.gamma = grid.gamma_values[j];
    c.target = state_on_plane(grid.z_plane, c.phi_F);
    try {
      const SystemParams p = opts.params.with_gamma(c.gamma);
      MlpLimits lim;
      lim.omega_cap = p.omega_cap();
      c.mlp = solve_mlp({q0, c.target}, p.epsilon(), lim);
      const auto pr = OptimizationProblem::make({q0, c.target}, p, 1, c.mlp->time, grid.dt);
      c.mp_omega = optimize_single_pulse(pr).pulse.segments()[0].omega;
      const std::uint64_t seed = derive_seed(master_seed, index);
      EnsembleOptions eo;
      eo.threads = 1;
      const auto mlp_ens = simulate_ensemble(q0, c.mlp->pulse(), p, pr.dt, grid.n_total, seed, eo);
      const auto mp_ens =
          simulate_ensemble(q0, ControlPulse::constant(c.mp_omega, pr.total_time), p, pr.dt, grid.n_total, seed, eo);
      c.s_mlp = success_rate(mlp_ens, c.target, grid.delta).rate_percent;
      c.s_mp = success_rate(mp_ens, c.target, grid.delta).rate_percent;
      c.diff = c.s_mlp - c.s_mp;
    } catch (const Error& e) {
      c.skip_reason = std::string(errc_name(e.code()));
    }
  });
  return cells;
}

struct Table1Row {
  std::string method;
  double gamma = 0.0;
  ControlPulse pulse;
  double mean_path_fidelity = 0.0;  ///< fidelity of the Lindblad final state
  double avg_fidelity = 0.0;        ///< ensemble average fidelity
  double s_010 = 0.0;               ///< success rate at delta = 0.01, percent
  double s_005 = 0.0;               ///< success rate at delta = 0.005, percent
};

struct Table1Report {
  BlochVector target;
  double total_time = 0.0;
  std::size_t n_total = 0;
  std::uint64_t seed = 0;
  std::vector<Table1Row> rows;

  const Table1Row& row(const std::string& method, double gamma) const {
    for (const auto& r : rows) {
      if (r.method == method && r.gamma == gamma) return r;
    }
    fail(Errc::invalid_argument, "no table row " + method);
  }
};

struct Table1Options {
  std::vector<double> gammas{0.1, 0.8};
  std::size_t n_total = 10000;
  std::size_t segments = 3;
  double dt = kDefaultTimeStep;
  unsigned threads = 0;
  BlochVector target{-std::sin(2.0 * std::numbers::pi / 3.0), 0.0, -0.5};
};

/// MLP_1, MP_1, GRAPE_m and CRAB_m on the same boundary pair and total time.
/// All methods at one gamma share the ensemble seed.
inline Table1Report run_table1(std::uint64_t master_seed, const Table1Options& o = {}) {
  Table1Report rep;
  rep.target = o.target;
  rep.n_total = o.n_total;
  rep.seed = master_seed;
  const BoundaryPair b{BlochVector::ground(), o.target};
  for (double gamma : o.gammas) {
    const SystemParams p = SystemParams::from_gamma(1.0, gamma);
    const auto pr1 = OptimizationProblem::make(b, p, 1, std::nullopt, o.dt);
    const auto prm = OptimizationProblem::make(b, p, o.segments, std::nullopt, o.dt);
    rep.total_time = pr1.total_time;
    OptimizerOptions og = OptimizerOptions::grape_defaults();
    og.seed = derive_seed(master_seed, 1);
    og.threads = o.threads;
    OptimizerOptions oc = OptimizerOptions::crab_defaults();
    oc.seed = derive_seed(master_seed, 2);
    oc.threads = o.threads;
    struct Candidate {
      std::string name;
      ControlPulse pulse;
      double dt;
    };
    const std::vector<Candidate> methods{
        {"MLP1", solve_mlp(b).pulse(), pr1.dt},
        {"MP1", optimize_single_pulse(pr1).pulse, pr1.dt},
        {"GRAPE" + std::to_string(o.segments), grape_optimize(prm, og).pulse, prm.dt},
        {"CRAB" + std::to_string(o.segments), crab_optimize(prm, 2, oc).pulse, prm.dt},
    };
    for (const auto& m : methods) {
      EnsembleOptions eo;
      eo.threads = o.threads;
      eo.target = o.target;
      const auto ens = simulate_ensemble(b.initial, m.pulse, p, m.dt, o.n_total, master_seed, eo);
      Table1Row row;
      row.method = m.name;
      row.gamma = gamma;
      row.pulse = m.pulse;
      row.mean_path_fidelity = fidelity(lindblad_evolve(b.initial, m.pulse, p, m.dt), o.target);
      row.avg_fidelity = *ens.avg_fidelity;
      row.s_010 = success_rate(ens, o.target, 0.01).rate_percent;
      row.s_005 = success_rate(ens, o.target, 0.005).rate_percent;
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

struct ToleranceLevel {
  std::size_t ensemble_size = 0;
  std::vector<double> infidelities;  ///< one per repeat: 1 - average fidelity
  double mean = 0.0;
  double range = 0.0;  ///< max - min
  double sd = 0.0;     ///< sample standard deviation
  BlochVector component_sd;
};

struct ToleranceCalibration {
  std::vector<std::size_t> ensemble_sizes{100, 1000, 10000};
  std::size_t n_repeats = 100;
  std::vector<ToleranceLevel> levels;
};

struct ToleranceSetup {
  BlochVector target;
  ControlPulse pulse;
  SystemParams params = SystemParams::from_gamma(1.0, 0.1);
  double dt = kDefaultTimeStep;

  /// Target (-0.16, -0.58, -0.8) normalised, driven by its MLP control at
  /// gamma = 0.1.
  static ToleranceSetup standard(double gamma = 0.1) {
    ToleranceSetup s;
    s.target = BlochVector{-0.16, -0.58, -0.8}.normalized();
    const auto ctl = solve_mlp({BlochVector::ground(), s.target});
    s.pulse = ctl.pulse();
    s.params = SystemParams::from_gamma(1.0, gamma);
    s.dt = fit_time_step(s.pulse, kDefaultTimeStep);
    return s;
  }
};

/// For each ensemble size N, n_repeats independent ensembles; reports the
/// spread of their average infidelities.
inline ToleranceCalibration calibrate_tolerance(const ToleranceSetup& setup, ToleranceCalibration spec,
                                                std::uint64_t master_seed, unsigned threads = 0) {
  require(spec.n_repeats >= 2, "n_repeats must be >= 2");
  check_pure_target(setup.target);
  spec.levels.clear();
  for (std::size_t s = 0; s < spec.ensemble_sizes.size(); ++s) {
    ToleranceLevel lvl;
    lvl.ensemble_size = spec.ensemble_sizes[s];
    std::vector<BlochVector> means(spec.n_repeats);
    lvl.infidelities.resize(spec.n_repeats);
    parallel_for(spec.n_repeats, threads, [&](std::size_t r) {
      EnsembleOptions eo;
      eo.threads = 1;
      eo.target = setup.target;
      const auto ens = simulate_ensemble(BlochVector::ground(), setup.pulse, setup.params, setup.dt,
                                         lvl.ensemble_size, derive_seed(master_seed, s * spec.n_repeats + r), eo);
      lvl.infidelities[r] = 1.0 - *ens.avg_fidelity;
      means[r] = ens.mean_final;
    });
    const double n = static_cast<double>(spec.n_repeats);
    double sum = 0.0;
    BlochVector msum;
    for (std::size_t r = 0; r < spec.n_repeats; ++r) {
      sum += lvl.infidelities[r];
      msum += means[r];
    }
    lvl.mean = sum / n;
    const BlochVector mbar = msum / n;
    double ss = 0.0;
    BlochVector css;
    for (std::size_t r = 0; r < spec.n_repeats; ++r) {
      ss += (lvl.infidelities[r] - lvl.mean) * (lvl.infidelities[r] - lvl.mean);
      const BlochVector d = means[r] - mbar;
      css += BlochVector{d.x * d.x, d.y * d.y, d.z * d.z};
    }
    lvl.sd = std::sqrt(ss / (n - 1.0));
    lvl.component_sd = {std::sqrt(css.x / (n - 1.0)), std::sqrt(css.y / (n - 1.0)), std::sqrt(css.z / (n - 1.0))};
    const auto [lo, hi] = std::minmax_element(lvl.infidelities.begin(), lvl.infidelities.end());
    lvl.range = *hi - *lo;
    spec.levels.push_back(std::move(lvl));
  }
  return spec;
}

struct TrajectoryBundle {
  std::string method;
  ControlPulse pulse;
  double dt = 0.0;
  std::vector<std::vector<BlochVector>> samples;  ///< stochastic trajectories on the grid
  std::vector<BlochVector> mean_path;             ///< Lindblad solution on the same grid
  double mean_final_norm = 0.0;
};

struct RegimeDiagnostics {
  BlochVector target;
  double gamma = 0.0;
  std::vector<TrajectoryBundle> bundles;  ///< MLP, then MP
};

inline RegimeDiagnostics regime_diagnostics(const BlochVector& target, double gamma, const SystemParams& base,
                                            std::uint64_t master_seed, std::size_t n_samples = 10,
                                            double dt = kDefaultTimeStep) {
  const SystemParams p = base.with_gamma(gamma);
  const BoundaryPair b{BlochVector::ground(), target};
  MlpLimits lim;
  lim.omega_cap = p.omega_cap();
  const auto ctl = solve_mlp(b, p.epsilon(), lim);
  const auto pr = OptimizationProblem::make(b, p, 1, ctl.time, dt);
  RegimeDiagnostics out{target, gamma, {}};
  const std::vector<std::pair<std::string, ControlPulse>> methods{
      {"MLP", ctl.pulse()}, {"MP", optimize_single_pulse(pr).pulse}};
  for (const auto& [name, pulse] : methods) {
    TrajectoryBundle tb{name, pulse, pr.dt, {}, lindblad_path(b.initial, pulse, p, pr.dt), 0.0};
    tb.mean_final_norm = tb.mean_path.back().norm();
    for (std::size_t i = 0; i < n_samples; ++i) {
      NormalStream s(master_seed, i);
      tb.samples.push_back(trajectory_states(b.initial, pulse, p, pr.dt, s));
    }
    out.bundles.push_back(std::move(tb));
  }
  return out;
}

}  // namespace qprep
