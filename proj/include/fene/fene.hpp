#ifndef FENE_FENE_HPP_
#define FENE_FENE_HPP_

#include "fene/errors.hpp"
#include "fene/geometry.hpp"
#include "fene/quadrature.hpp"
#include "fene/weighted_spaces.hpp"
#include "fene/basis.hpp"
#include "fene/galerkin.hpp"
#include "fene/scenarios.hpp"
#include "fene/diagnostics.hpp"

#endif  // FENE_FENE_HPP_
