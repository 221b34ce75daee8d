#pragma once

// JSON and CSV serialization of solver, simulator and benchmark results.
// JSON goes through nlohmann::json (shortest round-trip doubles, NaN as
// null); CSV uses %.17g and LF line endings.

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qprep/bench.hpp"

#ifndef QPREP_VERSION
#define QPREP_VERSION "0.0.0"
#endif

namespace qprep {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = QPREP_VERSION;

/// Metadata embedded in every report.
struct Provenance {
  std::uint64_t seed = 0;
  double dt = kDefaultTimeStep;
  std::size_t n_total = 0;
  std::string grid;  ///< free-form description of the sampled grid, empty if none
  std::string version = kVersion;
};

inline void to_json(json& j, const Provenance& p) {
  j = json{{"seed", p.seed}, {"dt", p.dt}, {"n_total", p.n_total}, {"grid", p.grid}, {"version", p.version}};
}

inline void to_json(json& j, const BlochVector& q) { j = json::array({q.x, q.y, q.z}); }

inline void from_json(const json& j, BlochVector& q) {
  require(j.is_array() && j.size() == 3, "a Bloch vector is a 3-element array");
  q = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void to_json(json& j, const ControlPulse& p) {
  json segs = json::array();
  for (const auto& s : p.segments()) segs.push_back({{"duration", s.duration}, {"omega", s.omega}});
  j = json{{"total_time", p.total_time()}, {"segments", std::move(segs)}};
}

/// Accepts {"segments": [{"duration", "omega"}...]} or
/// {"omegas": [...], "total_time": T} for equal-length segments.
inline void from_json(const json& j, ControlPulse& p) {
  require(j.is_object(), "a pulse is a JSON object");
  if (j.contains("segments")) {
    std::vector<PulseSegment> segs;
    for (const auto& s : j.at("segments")) segs.push_back({s.at("duration").get<double>(), s.at("omega").get<double>()});
    p = ControlPulse(std::move(segs));
    return;
  }
  require(j.contains("omegas") && j.contains("total_time"), "pulse needs 'segments' or 'omegas' + 'total_time'");
  const auto w = j.at("omegas").get<std::vector<double>>();
  p = ControlPulse::uniform(w, j.at("total_time").get<double>());
}

inline void to_json(json& j, const MlpControl& c) {
  j = json{{"omega", c.omega}, {"time", c.time}, {"quadrant_corrected", c.quadrant_corrected}};
}

inline void to_json(json& j, const VariationalReport& r) {
  j = json{{"constraint_yz", r.constraint_yz}, {"constraint_xz", r.constraint_xz},
           {"noise", r.noise},                 {"max_residual", r.max_residual()},
           {"endpoint_miss", r.endpoint_miss}, {"path_deviation", r.path_deviation},
           {"n_steps", r.n_steps},             {"tol", r.tol},
           {"ok", r.ok()}};
}

inline void to_json(json& j, const SuccessRateReport& r) {
  j = json{{"delta", r.delta}, {"n_success", r.n_success}, {"n_total", r.n_total}, {"rate_percent", r.rate_percent}};
}

inline void to_json(json& j, const Histogram& h) {
  j = json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
}

/// Summary statistics; the retained finals are included only on request.
inline json ensemble_json(const EnsembleResult& r, bool with_finals) {
  json j{{"n_total", r.n_total},       {"seed", r.seed},
         {"dt", r.dt},                 {"mean_final", r.mean_final},
         {"stddev_final", r.stddev_final}, {"finals_sampled", r.finals_sampled},
         {"n_retained", r.finals.size()}};
  if (r.target) j["target"] = *r.target;
  if (r.avg_fidelity) j["avg_fidelity"] = *r.avg_fidelity;
  if (with_finals) j["finals"] = r.finals;
  return j;
}

inline void to_json(json& j, const OptimizationResult& r) {
  j = json{{"pulse", r.pulse},
           {"omegas", r.pulse.amplitudes()},
           {"objective", r.objective},
           {"n_evaluations", r.n_evaluations},
           {"converged", r.converged},
           {"restarts_used", r.restarts_used},
           {"best_restart", r.best_restart},
           {"gradient_check_error", r.gradient_check_error}};
  if (!r.crab_frequencies.empty()) {
    j["crab_frequencies"] = r.crab_frequencies;
    j["crab_coefficients"] = r.crab_coefficients;
  }
}

inline void to_json(json& j, const SweepCell& c) {
  j = json{{"z_F", c.z_F},     {"phi_F", c.phi_F}, {"target", c.target}, {"gamma", c.gamma},
           {"s_mlp", c.s_mlp}, {"s_mp", c.s_mp},   {"diff", c.diff},     {"mp_omega", c.mp_omega}};
  j["mlp_control"] = c.mlp ? json(*c.mlp) : json(nullptr);
  j["skip_reason"] = c.skip_reason;
}

inline void to_json(json& j, const Table1Row& r) {
  j = json{{"method", r.method},
           {"gamma", r.gamma},
           {"omegas", r.pulse.amplitudes()},
           {"mean_path_fidelity", r.mean_path_fidelity},
           {"avg_fidelity", r.avg_fidelity},
           {"s_0.01", r.s_010},
           {"s_0.005", r.s_005}};
}

inline void to_json(json& j, const Table1Report& r) {
  j = json{{"target", r.target}, {"total_time", r.total_time}, {"n_total", r.n_total}, {"seed", r.seed},
           {"rows", r.rows}};
}

inline void to_json(json& j, const ToleranceLevel& l) {
  j = json{{"ensemble_size", l.ensemble_size}, {"mean_infidelity", l.mean}, {"range", l.range},
           {"sd", l.sd}, {"component_sd", l.component_sd}, {"infidelities", l.infidelities}};
}

inline void to_json(json& j, const ToleranceCalibration& c) {
  j = json{{"n_repeats", c.n_repeats}, {"levels", c.levels}};
}

inline void to_json(json& j, const TrajectoryBundle& b) {
  j = json{{"method", b.method},   {"pulse", b.pulse},         {"dt", b.dt},
           {"samples", b.samples}, {"mean_path", b.mean_path}, {"mean_final_norm", b.mean_final_norm}};
}

inline void to_json(json& j, const RegimeDiagnostics& d) {
  j = json{{"target", d.target}, {"gamma", d.gamma}, {"bundles", d.bundles}};
}

/// %.17g, or an empty field for NaN.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    os << csv_number(h.bin_lo(i)) << ',' << csv_number(h.bin_hi(i)) << ',' << h.counts[i] << '\n';
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "z_F,phi_F,gamma,s_mlp,s_mp,diff,omega_mlp,t_mlp,omega_mp,skip_reason\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : cells) {
    os << csv_number(c.z_F) << ',' << csv_number(c.phi_F) << ',' << csv_number(c.gamma) << ','
       << csv_number(c.s_mlp) << ',' << csv_number(c.s_mp) << ',' << csv_number(c.diff) << ','
       << csv_number(c.mlp ? c.mlp->omega : nan) << ',' << csv_number(c.mlp ? c.mlp->time : nan) << ','
       << csv_number(c.mp_omega) << ',' << c.skip_reason << '\n';
  }
}

/// Plain-text rendition of the method comparison, one block per gamma.
inline std::string format_table1(const Table1Report& r) {
  std::ostringstream os;
  os << std::fixed;
  double last = -1.0;
  for (const auto& row : r.rows) {
    if (row.gamma != last) {
      if (last >= 0.0) os << '\n';
      os << "gamma = " << std::setprecision(2) << row.gamma << '\n';
      os << std::left << std::setw(10) << "method" << std::right << std::setw(10) << "F_avg" << std::setw(10)
         << "s(0.01)" << std::setw(10) << "s(0.005)" << "  omegas\n";
      last = row.gamma;
    }
    os << std::left << std::setw(10) << row.method << std::right << std::setprecision(4) << std::setw(10)
       << row.avg_fidelity << std::setprecision(2) << std::setw(10) << row.s_010 << std::setw(10) << row.s_005
       << " ";
    for (double w : row.pulse.amplitudes()) os << ' ' << std::setprecision(4) << w;
    os << '\n';
  }
  return os.str();
}

}  // namespace qprep
