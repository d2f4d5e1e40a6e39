#pragma once

// Umbrella header for the degenflow numerical laboratory: degenerate
// potentials, the staggered grid, the primal/dual flux solvers with their
// duality-gap certificate, the continuity diagnostics, and the traffic
// application.

#include "degenflow/dual.hpp"
#include "degenflow/energy.hpp"
#include "degenflow/errors.hpp"
#include "degenflow/experiment.hpp"
#include "degenflow/fast_marching.hpp"
#include "degenflow/field_io.hpp"
#include "degenflow/grid.hpp"
#include "degenflow/poisson.hpp"
#include "degenflow/potential.hpp"
#include "degenflow/primal.hpp"
#include "degenflow/regularity.hpp"
#include "degenflow/sources.hpp"
#include "degenflow/traffic.hpp"
