#pragma once

// Quick oracle pass behind `trisleo selftest`. Instance counts are kept small;
// the test suite runs the same checks at full size.

#include <ostream>
#include <vector>

#include "trisleo/alternating.hpp"
#include "trisleo/checks.hpp"
#include "trisleo/scenario.hpp"

namespace trisleo {

inline std::vector<check::Outcome> run_selftest_checks() {
  std::vector<check::Outcome> out;
  out.push_back(check::steering_entries(50, 11));
  out.push_back(check::effective_gains(50, 12));
  out.push_back(check::sca_surrogate_grid(201));
  out.push_back(check::power_vs_grid(25, 13));
  out.push_back(check::barrier_derivatives(6, 14));
  out.push_back(check::conic_vs_grid(2, 15));
  out.push_back(check::phase_vs_enumeration_outcome(10, 16));

  check::Outcome ao{"outer loop invariants at the default scenario"};
  const Scenario sc;
  const AoResult r = alternating_optimize(sc);
  const std::string broken = check_invariants(r, sc);
  ao.pass = broken.empty() && r.converged && r.feasible;
  ao.detail = broken.empty() ? std::to_string(r.iterations) + " iterations, sum rate " + std::to_string(r.final_point.sum_rate)
                             : broken;
  out.push_back(ao);
  return out;
}

/// Prints one line per check; true when all pass.
inline bool run_selftest(std::ostream& os) {
  bool ok = true;
  for (const check::Outcome& c : run_selftest_checks()) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.pass;
  }
  return ok;
}

}  // namespace trisleo
