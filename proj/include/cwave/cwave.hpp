#pragma once

// Everything: grids, operators, transforms, schemes, solvers, analysis,
// non-uniform meshes and the reference problems.

#include "experiments.hpp"
