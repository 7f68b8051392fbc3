#pragma once

// Umbrella header: pathwise mild solution theory for quasilinear parabolic
// SPDE in one spatial dimension — operators, evolution families, fractional
// calculus, truncated noise, solvers, and the experiment harness.

#include "assumptions.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "evolution.hpp"
#include "fractional.hpp"
#include "grid.hpp"
#include "harness.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "noise.hpp"
#include "operators.hpp"
#include "reporting.hpp"
#include "solvers.hpp"
#include "time_mesh.hpp"
#include "trajectory.hpp"
#include "version.hpp"
