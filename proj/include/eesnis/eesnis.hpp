// Umbrella header.

#ifndef EESNIS_EESNIS_HPP
#define EESNIS_EESNIS_HPP

#include "eesnis/core.hpp"
#include "eesnis/coupling.hpp"
#include "eesnis/ee_snis.hpp"
#include "eesnis/estimators.hpp"
#include "eesnis/grid_density.hpp"
#include "eesnis/harness.hpp"
#include "eesnis/normal.hpp"
#include "eesnis/problems.hpp"
#include "eesnis/psi.hpp"
#include "eesnis/quadrature.hpp"
#include "eesnis/rng.hpp"
#include "eesnis/running_moments.hpp"
#include "eesnis/stats.hpp"

#endif  // EESNIS_EESNIS_HPP
