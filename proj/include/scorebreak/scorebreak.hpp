#pragma once

// Umbrella header: microbenchmark kernels, compound scores, record storage,
// the NNLS solver, breakdown fitting/reporting, and the synthetic-fleet
// validation harness.

#include "scorebreak/breakdown.hpp"
#include "scorebreak/compound.hpp"
#include "scorebreak/dataset.hpp"
#include "scorebreak/errors.hpp"
#include "scorebreak/linalg.hpp"
#include "scorebreak/microbench.hpp"
#include "scorebreak/nnls.hpp"
#include "scorebreak/svg.hpp"
#include "scorebreak/synth.hpp"
