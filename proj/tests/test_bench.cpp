#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qprep/bench.hpp"

using namespace qprep;

namespace {

constexpr double kPi = std::numbers::pi;

SweepGrid small_grid(double z) {
  SweepGrid g = SweepGrid::coarse(z);
  g.gamma_values = {0.0, 0.5, 1.0};
  g.n_total = 300;
  return g;
}

}  // namespace

TEST(Linspace, Endpoints) {
  const auto v = linspace(0.5 * kPi, 1.5 * kPi, 9);
  ASSERT_EQ(v.size(), 9u);
  EXPECT_EQ(v.front(), 0.5 * kPi);
  EXPECT_EQ(v.back(), 1.5 * kPi);
  EXPECT_NEAR(v[4], kPi, 1e-15);
  EXPECT_EQ(linspace(2.0, 3.0, 1), std::vector<double>{2.0});
}

TEST(SweepGrid, Presets) {
  const auto s = SweepGrid::standard(0.5);
  EXPECT_EQ(s.size(), 525u);
  EXPECT_EQ(s.n_total, 10000u);
  const auto c = SweepGrid::coarse(-0.5);
  EXPECT_EQ(c.size(), 54u);
  EXPECT_EQ(c.n_total, 1000u);
  for (const auto& g : {s, c}) {
    EXPECT_GE(g.phi_values.front(), 0.5 * kPi);
    EXPECT_LE(g.phi_values.back(), 1.5 * kPi);
    EXPECT_EQ(g.gamma_values.front(), 0.0);
    EXPECT_EQ(g.gamma_values.back(), 1.0);
  }
}

TEST(RunSweep, CellInvariants) {
  const auto grid = small_grid(-0.5);
  const auto cells = run_sweep(grid, 5);
  ASSERT_EQ(cells.size(), grid.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    EXPECT_EQ(c.phi_F, grid.phi_values[k / grid.gamma_values.size()]);
    EXPECT_EQ(c.gamma, grid.gamma_values[k % grid.gamma_values.size()]);
    const double r = std::sin(std::acos(c.z_F));
    EXPECT_NEAR(c.target.x, r * std::cos(c.phi_F), 1e-15);
    EXPECT_NEAR(c.target.y, r * std::sin(c.phi_F), 1e-15);
    EXPECT_EQ(c.target.z, -0.5);
    if (c.skipped()) {
      EXPECT_EQ(c.skip_reason, "DivergentControl");
      EXPECT_TRUE(std::isnan(c.diff));
      continue;
    }
    EXPECT_EQ(c.diff, c.s_mlp - c.s_mp);
    if (c.gamma == 0.0) {
      EXPECT_EQ(c.s_mlp, 100.0);
      EXPECT_EQ(c.s_mp, 100.0);
    }
  }
  // x_F = 0 at both ends of the azimuth range: unreachable from the ground state
  EXPECT_TRUE(cells.front().skipped());
  EXPECT_TRUE(cells.back().skipped());
}

TEST(RunSweep, MlpControlIndependentOfGamma) {
  const auto grid = small_grid(0.5);
  const auto cells = run_sweep(grid, 1);
  const std::size_t ng = grid.gamma_values.size();
  for (std::size_t i = 0; i < grid.phi_values.size(); ++i) {
    const auto& first = cells[i * ng];
    for (std::size_t j = 1; j < ng; ++j) {
      const auto& c = cells[i * ng + j];
      ASSERT_EQ(c.skipped(), first.skipped());
      if (c.skipped()) continue;
      EXPECT_EQ(c.mlp->omega, first.mlp->omega);
      EXPECT_EQ(c.mlp->time, first.mlp->time);
    }
  }
}

TEST(RunSweep, DeterministicAndThreadIndependent) {
  const auto grid = small_grid(-0.5);
  SweepOptions a;
  a.threads = 1;
  SweepOptions b;
  b.threads = 3;
  const auto x = run_sweep(grid, 9, a);
  const auto y = run_sweep(grid, 9, b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_EQ(x[k].skip_reason, y[k].skip_reason);
    if (x[k].skipped()) continue;
    EXPECT_EQ(x[k].s_mlp, y[k].s_mlp);
    EXPECT_EQ(x[k].s_mp, y[k].s_mp);
    EXPECT_EQ(x[k].mp_omega, y[k].mp_omega);
  }
  const auto z = run_sweep(grid, 10, a);
  bool any_diff = false;
  for (std::size_t k = 0; k < x.size(); ++k) any_diff = any_diff || (!x[k].skipped() && x[k].s_mlp != z[k].s_mlp);
  EXPECT_TRUE(any_diff);
}

TEST(RunSweep, MpNeverLosesOnTheMeanPath) {
  // The MP drive maximises the Lindblad fidelity at T_MLP, so it can only
  // match or beat the MLP drive on that metric.
  const auto grid = small_grid(-0.5);
  for (const auto& c : run_sweep(grid, 2)) {
    if (c.skipped()) continue;
    const auto p = SystemParams::from_gamma(1.0, c.gamma);
    const auto pr = OptimizationProblem::make({BlochVector::ground(), c.target}, p, 1, c.mlp->time);
    const double mp[] = {c.mp_omega};
    const double mlp[] = {c.mlp->omega};
    EXPECT_GE(objective(pr, mp), objective(pr, mlp) - 1e-12);
  }
}

TEST(Table1, SmallRun) {
  Table1Options o;
  o.n_total = 500;
  const auto rep = run_table1(4, o);
  ASSERT_EQ(rep.rows.size(), 8u);
  EXPECT_NEAR(rep.total_time, kPi * std::sqrt(3.0) / 2.0, 1e-12);
  for (double gamma : {0.1, 0.8}) {
    const double mlp = rep.row("MLP1", gamma).mean_path_fidelity;
    const double mp = rep.row("MP1", gamma).mean_path_fidelity;
    EXPECT_GE(mp, mlp);
    EXPECT_GE(rep.row("GRAPE3", gamma).mean_path_fidelity, mp - 1e-9);
    EXPECT_NEAR(rep.row("CRAB3", gamma).mean_path_fidelity, rep.row("GRAPE3", gamma).mean_path_fidelity, 1e-3);
    for (const auto& r : rep.rows) {
      EXPECT_GE(r.s_010, r.s_005);
      EXPECT_GT(r.avg_fidelity, 0.5);
    }
  }
  EXPECT_EQ(rep.row("MLP1", 0.1).pulse.segments()[0].omega, solve_mlp({BlochVector::ground(), o.target}).omega);
  EXPECT_THROW(rep.row("nope", 0.1), Error);
}

TEST(Tolerance, NoiselessHasNoSpread) {
  auto setup = ToleranceSetup::standard(0.0);
  ToleranceCalibration spec;
  spec.ensemble_sizes = {10, 100};
  spec.n_repeats = 5;
  const auto cal = calibrate_tolerance(setup, spec, 1);
  ASSERT_EQ(cal.levels.size(), 2u);
  for (const auto& l : cal.levels) {
    EXPECT_EQ(l.range, 0.0);
    EXPECT_EQ(l.sd, 0.0);
    EXPECT_LT(l.mean, 1e-6);
  }
}

TEST(Tolerance, SpreadShrinksLikeInverseRootN) {
  ToleranceCalibration spec;
  spec.ensemble_sizes = {100, 1600};
  spec.n_repeats = 40;
  const auto cal = calibrate_tolerance(ToleranceSetup::standard(), spec, 3);
  const auto& a = cal.levels[0];
  const auto& b = cal.levels[1];
  EXPECT_EQ(a.infidelities.size(), 40u);
  EXPECT_LT(b.sd, a.sd);
  EXPECT_LT(b.range, a.range);
  // sqrt(1600/100) = 4; the SD of an SD estimate from 40 samples is ~11%
  EXPECT_NEAR(a.sd / b.sd, 4.0, 1.6);
  EXPECT_NEAR(a.component_sd.z / b.component_sd.z, 4.0, 1.6);
}

TEST(Regimes, NoiselessSamplesFollowTheMeanPath) {
  const auto d = regime_diagnostics(state_on_plane(-0.5, 0.75 * kPi), 0.0, SystemParams::from_gamma(1.0, 0.0), 1);
  ASSERT_EQ(d.bundles.size(), 2u);
  for (const auto& b : d.bundles) {
    ASSERT_EQ(b.samples.size(), 10u);
    for (const auto& s : b.samples) {
      ASSERT_EQ(s.size(), b.mean_path.size());
      for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LT(distance(s[i], b.mean_path[i]), 1e-4);
    }
  }
}

TEST(Regimes, StrongDephasingLosesPurity) {
  const auto d = regime_diagnostics(state_on_plane(-0.5, 0.75 * kPi), 1.0, SystemParams::from_gamma(1.0, 1.0), 1);
  EXPECT_EQ(d.bundles[1].method, "MP");
  EXPECT_LT(d.bundles[1].mean_final_norm, 0.9);
}

TEST(Regimes, LowDephasingLongPathTargetPicksLargeDrive) {
  const double phi = 0.5 * kPi + 7.0 * kPi / 8.0;
  const auto d = regime_diagnostics(state_on_plane(-0.5, phi), 0.2, SystemParams::from_gamma(1.0, 0.2), 1);
  const double mlp = std::abs(d.bundles[0].pulse.segments()[0].omega);
  const double mp = std::abs(d.bundles[1].pulse.segments()[0].omega);
  EXPECT_GT(mp, 5.0 * mlp);
}
