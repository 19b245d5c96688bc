#pragma once

#include <stdexcept>
#include <string>

namespace trisleo {

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// The closed-form power split is undefined because lambda_k == lambda_j.
class DegenerateDuals : public std::domain_error {
 public:
  explicit DegenerateDuals(const std::string& what) : std::domain_error(what) {}
};

/// A convex subproblem has no strictly feasible point.
class Infeasible : public std::runtime_error {
 public:
  Infeasible(const std::string& what, int constraint_index, double violation)
      : std::runtime_error(what), constraint_index_(constraint_index), violation_(violation) {}

  /// Index of the most violated constraint at the phase-I optimum (-1 if unknown).
  int constraint_index() const { return constraint_index_; }
  double violation() const { return violation_; }

 private:
  int constraint_index_;
  double violation_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

}  // namespace detail
}  // namespace trisleo
