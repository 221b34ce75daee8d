#pragma once

// Umbrella header.

#include "qprep/error.hpp"
#include "qprep/bloch.hpp"
#include "qprep/lindblad.hpp"
#include "qprep/rng.hpp"
#include "qprep/parallel.hpp"
#include "qprep/trajectory.hpp"
#include "qprep/mlp.hpp"
#include "qprep/optimize.hpp"
#include "qprep/bench.hpp"
#include "qprep/io.hpp"
