#pragma once

#include <stdexcept>
#include <string>

namespace degenflow {

// Every failure mode in the library is a named exception type so that
// callers (and the CLI exit-code mapping) can tell configuration errors
// apart from numerical ones.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define DEGENFLOW_DEFINE_ERROR(Name)                          \
  struct Name : Error {                                       \
    explicit Name(const std::string& msg) : Error(msg) {}     \
  }

// potentials
DEGENFLOW_DEFINE_ERROR(DegenerateKink);
DEGENFLOW_DEFINE_ERROR(NotElliptic);
DEGENFLOW_DEFINE_ERROR(InversionFailed);

// grid
DEGENFLOW_DEFINE_ERROR(GridMismatch);
DEGENFLOW_DEFINE_ERROR(IncompatibleSource);
DEGENFLOW_DEFINE_ERROR(SolverStagnation);
DEGENFLOW_DEFINE_ERROR(RegionOutOfDomain);
DEGENFLOW_DEFINE_ERROR(EmptyRegion);

// solvers
DEGENFLOW_DEFINE_ERROR(LineSearchFailure);
DEGENFLOW_DEFINE_ERROR(MaxIterations);

// regularity lab
DEGENFLOW_DEFINE_ERROR(DegenerateFit);
DEGENFLOW_DEFINE_ERROR(NotVanishingOnBall);

// traffic
DEGENFLOW_DEFINE_ERROR(OutOfDomain);
DEGENFLOW_DEFINE_ERROR(InfeasibleFlux);
DEGENFLOW_DEFINE_ERROR(StepTooLarge);
DEGENFLOW_DEFINE_ERROR(EmptyPlan);
DEGENFLOW_DEFINE_ERROR(NonpositiveMetric);

// cli / experiment
DEGENFLOW_DEFINE_ERROR(UnknownSource);
DEGENFLOW_DEFINE_ERROR(ConfigInvalid);

#undef DEGENFLOW_DEFINE_ERROR

}  // namespace degenflow
