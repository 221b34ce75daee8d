// qprep: command-line front end for the MLP solver, mean-path optimizers,
// trajectory simulator and benchmark drivers.
//
// Exit codes: 0 success, 1 internal error, 2 domain or usage error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qprep/qprep.hpp"

namespace {

using namespace qprep;

struct RunConfig {
  double epsilon = 1.0;
  std::optional<double> gamma;
  std::optional<double> g;
  std::optional<double> kappa;
  double dt = kDefaultTimeStep;
  std::size_t n_total = 10000;
  std::uint64_t seed = 12345;
  double delta = 0.005;
  std::optional<double> omega_cap;
  std::string output;
  std::string format;
  unsigned threads = 0;
  std::optional<std::string> target;
  std::string initial = "0,0,-1";
};

constexpr double kDefaultGamma = 0.1;

SystemParams resolve_params(const RunConfig& c) {
  const bool coupling = c.g.has_value() || c.kappa.has_value();
  require(!(coupling && c.gamma), "give either --gamma or --g/--kappa, not both");
  SystemParams p = SystemParams::from_gamma(c.epsilon, c.gamma.value_or(kDefaultGamma));
  if (coupling) {
    require(c.g && c.kappa, "--g and --kappa must be given together");
    p = SystemParams::from_coupling(c.epsilon, *c.g, *c.kappa);
  }
  if (c.omega_cap) p = p.with_omega_cap(*c.omega_cap);
  return p;
}

/// "x,y,z"; inputs within 1e-3 of unit length are projected onto the sphere.
BlochVector parse_state(const std::string& text, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      require(used == item.size(), "");
    } catch (const std::exception&) {
      fail(Errc::invalid_argument, std::string(what) + ": cannot parse '" + text + "'");
    }
  }
  require(v.size() == 3, std::string(what) + " needs three comma-separated coordinates");
  const BlochVector q{v[0], v[1], v[2]};
  const double n = q.norm();
  if (!(std::abs(n - 1.0) <= 1e-3)) {
    fail(Errc::non_pure_target, std::string(what) + " must be a pure state (unit Bloch vector)");
  }
  return q / n;
}

const BlochVector kDefaultTarget{-std::sin(2.0 * std::numbers::pi / 3.0), 0.0, -0.5};

BlochVector resolve_target(const RunConfig& c, const BlochVector& fallback = kDefaultTarget) {
  return c.target ? parse_state(*c.target, "target") : fallback;
}

json config_json(const RunConfig& c, const SystemParams& p) {
  json j{{"epsilon", c.epsilon}, {"gamma", p.gamma()}, {"dt", c.dt},       {"n-total", c.n_total},
         {"seed", c.seed},       {"delta", c.delta},   {"omega-cap", p.omega_cap()}, {"format", c.format},
         {"initial", c.initial}};
  if (c.target) j["target"] = *c.target;
  j["derived"] = {{"g", p.g()}, {"kappa", p.kappa()}, {"gamma", 2.0 * p.g() * p.g() * p.kappa()}};
  return j;
}

void emit(const RunConfig& c, const std::string& text) {
  if (c.output.empty() || c.output == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(c.output, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), "cannot open output file " + c.output);
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

MlpLimits limits_for(const SystemParams& p) {
  MlpLimits lim;
  lim.omega_cap = p.omega_cap();
  return lim;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string method = "closed";
  bool verify = false;
};

int cmd_solve_mlp(RunConfig& c, const SolveArgs& a) {
  const SystemParams p = resolve_params(c);
  require(c.target.has_value(), "--target is required");
  if (c.format.empty()) c.format = "json";
  require(c.format == "json", "solve-mlp only writes json");
  const BoundaryPair b{parse_state(c.initial, "initial"), resolve_target(c)};
  const auto lim = limits_for(p);
  require(a.method == "closed" || a.method == "geometric", "--method must be closed or geometric");
  const MlpControl ctl = a.method == "closed" ? solve_mlp(b, p.epsilon(), lim) : geometric_solve(b, p.epsilon(), lim);
  json cfg = config_json(c, p);
  cfg["method"] = a.method;
  json out{{"command", "solve-mlp"}, {"config", cfg}, {"result", ctl}};
  if (a.verify) out["variational"] = verify_variational_solution(b, p.epsilon(), p);
  emit(c, dump(out));
  return 0;
}

struct OptimizeArgs {
  std::string method = "single";
  std::size_t segments = 1;
  std::optional<double> time;
  std::optional<std::size_t> restarts;
  std::optional<std::size_t> max_iters;
  std::size_t n_basis = 2;
};

OptimizationResult run_optimizer(const OptimizationProblem& pr, const OptimizeArgs& a, const RunConfig& c) {
  if (a.method == "single") return optimize_single_pulse(pr);
  OptimizerOptions o = a.method == "grape" ? OptimizerOptions::grape_defaults() : OptimizerOptions::crab_defaults();
  o.seed = c.seed;
  o.threads = c.threads;
  if (a.restarts) o.restarts = *a.restarts;
  if (a.max_iters) o.max_iters = *a.max_iters;
  if (a.method == "grape") return grape_optimize(pr, o);
  require(a.method == "crab", "--method must be single, grape or crab");
  return crab_optimize(pr, a.n_basis, o);
}

int cmd_optimize_mp(RunConfig& c, const OptimizeArgs& a) {
  const SystemParams p = resolve_params(c);
  if (c.format.empty()) c.format = "json";
  require(c.format == "json", "optimize-mp only writes json");
  require(a.method != "single" || a.segments == 1, "--method single needs --segments 1");
  const BoundaryPair b{parse_state(c.initial, "initial"), resolve_target(c)};
  const auto pr = OptimizationProblem::make(b, p, a.segments, a.time, c.dt);
  const auto r = run_optimizer(pr, a, c);
  json cfg = config_json(c, p);
  cfg["method"] = a.method;
  cfg["segments"] = a.segments;
  if (a.time) cfg["time"] = *a.time;
  if (a.method != "single") {
    cfg["restarts"] = a.restarts.value_or(a.method == "grape" ? 16 : 8);
    cfg["max-iters"] = a.max_iters.value_or(a.method == "grape" ? 1000 : 3000);
  }
  if (a.method == "crab") cfg["n-basis"] = a.n_basis;
  json out{{"command", "optimize-mp"},
           {"config", cfg},
           {"problem",
            {{"total_time", pr.total_time}, {"dt_effective", pr.dt}, {"omega_lo", pr.omega_lo},
             {"omega_hi", pr.omega_hi}}},
           {"result", r}};
  emit(c, dump(out));
  return 0;
}

struct SimulateArgs {
  std::string source = "mlp";
  std::vector<double> omegas;
  std::optional<double> time;
  std::string pulse_file;
  std::size_t bins = kDefaultHistogramBins;
  std::string axis = "z";
  bool with_finals = false;
};

Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  require(s == "z", "--axis must be x, y or z");
  return Axis::z;
}

int cmd_simulate(RunConfig& c, const SimulateArgs& a) {
  const SystemParams p = resolve_params(c);
  if (c.format.empty()) c.format = "json";
  require(c.format == "json" || c.format == "csv", "--format must be json or csv");
  const BoundaryPair b{parse_state(c.initial, "initial"), resolve_target(c)};
  ControlPulse pulse;
  if (a.source == "mlp") {
    const auto ctl = solve_mlp(b, p.epsilon(), limits_for(p));
    pulse = ControlPulse::constant(ctl.omega, a.time.value_or(ctl.time));
  } else if (a.source == "mp") {
    pulse = optimize_single_pulse(OptimizationProblem::make(b, p, 1, a.time, c.dt)).pulse;
  } else if (a.source == "inline") {
    require(!a.omegas.empty(), "--source inline needs --omegas");
    const double t = a.time ? *a.time : solve_mlp(b, p.epsilon(), limits_for(p)).time;
    pulse = ControlPulse::uniform(a.omegas, t);
  } else {
    require(a.source == "file", "--source must be mlp, mp, inline or file");
    std::ifstream f(a.pulse_file);
    require(static_cast<bool>(f), "cannot open pulse file '" + a.pulse_file + "'");
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      fail(Errc::invalid_argument, std::string("pulse file: ") + e.what());
    }
    pulse = (j.contains("pulse") ? j.at("pulse") : j).get<ControlPulse>();
  }
  const double dt = fit_time_step(pulse, c.dt);
  EnsembleOptions eo;
  eo.threads = c.threads;
  eo.target = b.target;
  const auto ens = simulate_ensemble(b.initial, pulse, p, dt, c.n_total, c.seed, eo);
  const Axis axis = parse_axis(a.axis);
  if (c.format == "csv") {
    std::ostringstream os;
    write_histogram_csv(os, final_state_histogram(ens, axis, a.bins));
    emit(c, os.str());
    return 0;
  }
  json cfg = config_json(c, p);
  cfg["source"] = a.source;
  if (a.time) cfg["time"] = *a.time;
  if (!a.omegas.empty()) cfg["omegas"] = a.omegas;
  if (!a.pulse_file.empty()) cfg["pulse-file"] = a.pulse_file;
  cfg["bins"] = a.bins;
  const BlochVector mean_path = lindblad_evolve(b.initial, pulse, p, dt);
  json out{{"command", "simulate"},
           {"config", cfg},
           {"pulse", pulse},
           {"dt_effective", dt},
           {"ensemble", ensemble_json(ens, a.with_finals || c.n_total == 1)},
           {"success", success_rate(ens, b.target, c.delta)},
           {"mean_path_final", mean_path},
           {"mean_path_fidelity", fidelity(mean_path, b.target)},
           {"histograms",
            {{"x", final_state_histogram(ens, Axis::x, a.bins)},
             {"y", final_state_histogram(ens, Axis::y, a.bins)},
             {"z", final_state_histogram(ens, Axis::z, a.bins)}}}};
  emit(c, dump(out));
  return 0;
}

struct BenchArgs {
  std::string experiment = "sweep";
  bool coarse = false;
  double z_plane = -0.5;
  std::size_t segments = 3;
  std::vector<double> gammas{0.1, 0.8};
  std::size_t repeats = 100;
  std::size_t samples = 10;
};

std::string describe_grid(const SweepGrid& g) {
  std::ostringstream os;
  os.precision(17);
  os << "z_F=" << g.z_plane << "; phi: " << g.phi_values.size() << " points in [" << g.phi_values.front() << ", "
     << g.phi_values.back() << "]; gamma: " << g.gamma_values.size() << " points in [" << g.gamma_values.front()
     << ", " << g.gamma_values.back() << "]; delta=" << g.delta;
  return os.str();
}

int cmd_bench(RunConfig& c, const BenchArgs& a, bool n_total_given) {
  const SystemParams p = resolve_params(c);
  json cfg;
  if (a.experiment == "sweep") {
    if (c.format.empty()) c.format = "csv";
    require(c.format == "csv" || c.format == "json", "--format must be csv or json");
    SweepGrid grid = a.coarse ? SweepGrid::coarse(a.z_plane) : SweepGrid::standard(a.z_plane);
    if (n_total_given) grid.n_total = c.n_total;
    c.n_total = grid.n_total;
    grid.delta = c.delta;
    grid.dt = c.dt;
    cfg = config_json(c, p);
    cfg["coarse"] = a.coarse;
    cfg["z-plane"] = a.z_plane;
    SweepOptions so;
    so.threads = c.threads;
    so.params = p;
    const auto cells = run_sweep(grid, c.seed, so);
    const json prov = Provenance{c.seed, c.dt, grid.n_total, describe_grid(grid)};
    if (c.format == "csv") {
      std::ostringstream os;
      write_sweep_csv(os, cells);
      emit(c, os.str());
      if (!c.output.empty() && c.output != "-") {
        RunConfig side = c;
        side.output = c.output + ".json";
        emit(side, dump(json{{"command", "bench"}, {"experiment", "sweep"}, {"config", cfg}, {"provenance", prov}}));
      }
      return 0;
    }
    emit(c, dump(json{{"command", "bench"},
                      {"experiment", "sweep"},
                      {"config", cfg},
                      {"provenance", prov},
                      {"cells", cells}}));
    return 0;
  }
  if (c.format.empty()) c.format = "json";
  cfg = config_json(c, p);
  if (a.experiment == "table1") {
    require(c.format == "json" || c.format == "text", "--format must be json or text");
    Table1Options o;
    o.gammas = a.gammas;
    o.n_total = c.n_total;
    o.segments = a.segments;
    o.dt = c.dt;
    o.threads = c.threads;
    o.target = resolve_target(c);
    const auto rep = run_table1(c.seed, o);
    if (c.format == "text") {
      emit(c, format_table1(rep));
      return 0;
    }
    cfg["segments"] = a.segments;
    cfg["gammas"] = a.gammas;
    emit(c, dump(json{{"command", "bench"},
                      {"experiment", "table1"},
                      {"config", cfg},
                      {"provenance", Provenance{c.seed, c.dt, c.n_total, {}}},
                      {"report", rep}}));
    return 0;
  }
  require(c.format == "json", "this experiment only writes json");
  if (a.experiment == "tolerance") {
    ToleranceSetup setup;
    setup.target = resolve_target(c, ToleranceSetup::standard().target);
    setup.pulse = solve_mlp({parse_state(c.initial, "initial"), setup.target}, p.epsilon(), limits_for(p)).pulse();
    setup.params = p;
    setup.dt = fit_time_step(setup.pulse, c.dt);
    ToleranceCalibration spec;
    spec.n_repeats = a.repeats;
    const auto cal = calibrate_tolerance(setup, spec, c.seed, c.threads);
    cfg["repeats"] = a.repeats;
    emit(c, dump(json{{"command", "bench"},
                      {"experiment", "tolerance"},
                      {"config", cfg},
                      {"provenance", Provenance{c.seed, setup.dt, 0, "ensemble sizes 100, 1000, 10000"}},
                      {"calibration", cal}}));
    return 0;
  }
  require(a.experiment == "regimes", "--experiment must be sweep, table1, tolerance or regimes");
  const auto d = regime_diagnostics(resolve_target(c), p.gamma(), p, c.seed, a.samples, c.dt);
  cfg["samples"] = a.samples;
  emit(c, dump(json{{"command", "bench"},
                    {"experiment", "regimes"},
                    {"config", cfg},
                    {"provenance", Provenance{c.seed, d.bundles.front().dt, a.samples, {}}},
                    {"diagnostics", d}}));
  return 0;
}

int report_error(const std::string& code, const std::string& message, int status) {
  std::cout << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Qubit state preparation under dephasing: most-likely-path and mean-path controls"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a key=value file (flags override it)");

  RunConfig c;
  app.add_option("--epsilon", c.epsilon, "Qubit energy splitting (unit of rates and drives)")->capture_default_str();
  app.add_option("--gamma", c.gamma, "Dephasing rate, 2 g^2 kappa (default 0.1)");
  app.add_option("--g", c.g, "Noise coupling (with --kappa, instead of --gamma)");
  app.add_option("--kappa", c.kappa, "Noise spectral density (with --g)");
  app.add_option("--dt", c.dt, "Target time step; snapped to tile the pulse")->capture_default_str();
  app.add_option("--n-total", c.n_total, "Trajectories per ensemble")->capture_default_str();
  app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app.add_option("--delta", c.delta, "Infidelity tolerance of the success rate")->capture_default_str();
  app.add_option("--omega-cap", c.omega_cap, "Bound on |Omega| (default 20 epsilon)");
  app.add_option("--output,-o", c.output, "Output file (default stdout)");
  app.add_option("--format", c.format, "json, csv or text, depending on the command");
  app.add_option("--threads", c.threads, "Worker threads (0 = hardware); never changes results");
  app.add_option("--target", c.target, "Target Bloch vector x,y,z");
  app.add_option("--initial", c.initial, "Initial Bloch vector x,y,z")->capture_default_str();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve-mlp", "Most-likely-path control for a boundary pair");
  solve->add_option("--method", sa.method, "closed or geometric")->capture_default_str();
  solve->add_flag("--verify", sa.verify, "Check the variational equations along the path");

  OptimizeArgs oa;
  auto* opt = app.add_subcommand("optimize-mp", "Maximise the mean-path fidelity");
  opt->add_option("--method", oa.method, "single, grape or crab")->capture_default_str();
  opt->add_option("--segments", oa.segments, "Piecewise-constant segments")->capture_default_str();
  opt->add_option("--time", oa.time, "Total time (default: MLP optimal time)");
  opt->add_option("--restarts", oa.restarts, "Optimizer restarts");
  opt->add_option("--max-iters", oa.max_iters, "Iterations per restart");
  opt->add_option("--n-basis", oa.n_basis, "CRAB Fourier modes")->capture_default_str();

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Run a trajectory ensemble");
  sim->add_option("--source", ma.source, "mlp, mp, inline or file")->capture_default_str();
  sim->add_option("--omegas", ma.omegas, "Segment amplitudes for --source inline")->delimiter(',');
  sim->add_option("--time", ma.time, "Total time (default: MLP optimal time)");
  sim->add_option("--pulse-file", ma.pulse_file, "JSON pulse for --source file");
  sim->add_option("--bins", ma.bins, "Histogram bins")->capture_default_str();
  sim->add_option("--axis", ma.axis, "Histogram axis for csv output")->capture_default_str();
  sim->add_flag("--with-finals", ma.with_finals, "Include every final state in json output");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Benchmark experiments");
  bench->add_option("--experiment", ba.experiment, "sweep, table1, tolerance or regimes")->capture_default_str();
  bench->add_flag("--coarse", ba.coarse, "9 x 6 sweep grid at 1e3 trajectories");
  bench->add_option("--z-plane", ba.z_plane, "Target plane of the sweep")->capture_default_str();
  bench->add_option("--segments", ba.segments, "Segments for the table1 optimizers")->capture_default_str();
  bench->add_option("--gammas", ba.gammas, "Dephasing rates for table1")->delimiter(',');
  bench->add_option("--repeats", ba.repeats, "Repeats per ensemble size (tolerance)")->capture_default_str();
  bench->add_option("--samples", ba.samples, "Sample trajectories (regimes)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("InvalidArgument", e.what(), 2);
  }

  try {
    if (solve->parsed()) return cmd_solve_mlp(c, sa);
    if (opt->parsed()) return cmd_optimize_mp(c, oa);
    if (sim->parsed()) return cmd_simulate(c, ma);
    return cmd_bench(c, ba, app.count("--n-total") > 0);
  } catch (const Error& e) {
    const bool user = is_domain_error(e.code()) || e.code() == Errc::invalid_argument ||
                      e.code() == Errc::segment_grid_mismatch;
    return report_error(std::string(errc_name(e.code())), e.what(), user ? 2 : 1);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), 1);
  }
}
