#pragma once

// Convenience include for the whole library.

#include "hadopt/cli.hpp"
#include "hadopt/errors.hpp"
#include "hadopt/geometry.hpp"
#include "hadopt/io.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"
#include "hadopt/problems.hpp"
#include "hadopt/projection.hpp"
#include "hadopt/retraction.hpp"
#include "hadopt/rng.hpp"
#include "hadopt/solver.hpp"
#include "hadopt/stationarity.hpp"
