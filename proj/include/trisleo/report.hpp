#pragma once

// CSV and JSON writers for solve and sweep results.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "trisleo/alternating.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/sweep.hpp"

namespace trisleo {

namespace detail {

// Fixed formatting keeps output byte-stable across runs and locales.
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InvalidInput("cannot write '" + p.string() + "'");
  return f;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const std::vector<IterationTrace>& trace) {
  os << "iter,sum_rate,p_k,P_t,interference,delta\n";
  for (const IterationTrace& t : trace) {
    os << t.iteration << ',' << detail::fmt_real(t.sum_rate) << ',' << detail::fmt_real(t.p_k) << ','
       << detail::fmt_real(t.p_t) << ',' << detail::fmt_real(t.interference) << ',' << detail::fmt_real(t.delta)
       << '\n';
  }
}

inline nlohmann::json summary_json(const AoResult& r) {
  const OperatingPoint& f = r.final_point;
  nlohmann::json j;
  j["sum_rate"] = f.sum_rate;
  j["iterations"] = r.iterations;
  j["feasible"] = r.feasible;
  j["p_k"] = f.p_k;
  j["p_t"] = f.p_t;
  j["converged"] = r.converged;
  j["rate_strong"] = f.rate_strong;
  j["rate_weak"] = f.rate_weak;
  j["interference"] = f.interference;
  j["users_swapped"] = f.swapped;
  if (!r.feasible) j["binding_constraint"] = r.binding_constraint;
  return j;
}

/// One row per grid point; infeasible trials enter the mean as zero.
inline void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << to_string(s.variable) << ",sum_rate,iterations,feasible_fraction,mean_p_t,trials\n";
  for (const SweepPoint& p : s.points) {
    os << detail::fmt_real(p.value) << ',' << detail::fmt_real(p.mean_sum_rate) << ','
       << detail::fmt_real(p.mean_iterations) << ',' << detail::fmt_real(p.feasible_fraction) << ','
       << detail::fmt_real(p.mean_p_t) << ',' << p.trials.size() << '\n';
  }
}

inline void write_solve_outputs(const std::filesystem::path& dir, const AoResult& r) {
  std::filesystem::create_directories(dir);
  auto trace = detail::open_out(dir / "trace.csv");
  write_trace_csv(trace, r.trace);
  auto summary = detail::open_out(dir / "summary.json");
  summary << summary_json(r).dump(2) << '\n';
}

inline std::filesystem::path write_sweep_output(const std::filesystem::path& dir, const SweepResult& s,
                                                const std::string& suffix = "") {
  std::filesystem::create_directories(dir);
  const auto path = dir / ("sweep_" + std::string(to_string(s.variable)) + suffix + ".csv");
  auto f = detail::open_out(path);
  write_sweep_csv(f, s);
  return path;
}

}  // namespace trisleo
