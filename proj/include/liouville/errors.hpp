#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace liouville {

/** Base class for all errors raised by the library. */
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/** Argument outside the mathematical domain of an operation. */
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(what) {}
};

/** Linear system has no solution (incompatible right-hand side or
 *  kernel collision). */
struct SingularSystem : Error {
  explicit SingularSystem(const std::string& what) : Error(what) {}
  double smallest_eigenvalue = 0.0;
};

/** Iterative solver failed to reach its tolerance.  Carries the residual
 *  history of the failed run. */
struct NoConvergence : Error {
  NoConvergence(const std::string& what, std::vector<double> history = {})
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/** ODE trajectory reaches its finite blow-up coordinate before t_max. */
struct BlowUp : Error {
  BlowUp(const std::string& what, double t_star_)
      : Error(what), t_star(t_star_) {}
  double t_star;
};

/** Bubble core too small for the grid (epsilon below the resolvability
 *  gate). */
struct ResolutionError : Error {
  explicit ResolutionError(const std::string& what) : Error(what) {}
};

/** Zero set of f violates the separation required by the construction. */
struct BadPoints : Error {
  explicit BadPoints(const std::string& what) : Error(what) {}
};

/** Problem data fails the structural hypotheses (f >= 0, non-degenerate
 *  Hessians, alpha > 0). */
struct BadProblem : Error {
  explicit BadProblem(const std::string& what) : Error(what) {}
};

/** Fixed-point iteration lost contraction. */
struct NoContraction : Error {
  NoContraction(const std::string& what, std::vector<double> factors = {})
      : Error(what), contraction_factors(std::move(factors)) {}
  std::vector<double> contraction_factors;
};

/** Reduced (finite-dimensional) system could not be driven to zero. */
struct ReducedSolveFailed : Error {
  ReducedSolveFailed(const std::string& what, double final_c_norm_)
      : Error(what), final_c_norm(final_c_norm_) {}
  double final_c_norm;
};

/** Newton iterate left the admissible region. */
struct Diverged : Error {
  explicit Diverged(const std::string& what) : Error(what) {}
};

/** Arclength continuation step shrank below its floor. */
struct StepCollapse : Error {
  explicit StepCollapse(const std::string& what) : Error(what) {}
};

/** Not enough grid points to resolve the requested angular modes. */
struct InsufficientResolution : Error {
  explicit InsufficientResolution(const std::string& what) : Error(what) {}
};

/** Configuration file problem (syntax, unknown key, bad value). */
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace liouville
