#ifndef STABSEL_STABSEL_HPP
#define STABSEL_STABSEL_HPP

// Stability-targeting confounder selection: double-selection covariate
// ordering, doubly robust per-orbit effect trajectories, windowed
// inverse-variance stability diagnostics, optimal full matching on the
// selected propensity score, and randomization inference for the sharp null.

#include "stabsel/core.hpp"
#include "stabsel/effect.hpp"
#include "stabsel/glm.hpp"
#include "stabsel/io.hpp"
#include "stabsel/matching.hpp"
#include "stabsel/min_cost_flow.hpp"
#include "stabsel/ordering.hpp"
#include "stabsel/pipeline.hpp"
#include "stabsel/randtest.hpp"
#include "stabsel/simulate.hpp"
#include "stabsel/stability.hpp"

#endif  // STABSEL_STABSEL_HPP
