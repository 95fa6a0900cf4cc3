#pragma once

#include "cylmode/errors.hpp"
#include "cylmode/parallel.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/state.hpp"
#include "cylmode/checkpoint.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/stokes.hpp"
#include "cylmode/nonlinear.hpp"
#include "cylmode/stepper.hpp"
#include "cylmode/functionals.hpp"
#include "cylmode/inequalities.hpp"
#include "cylmode/oracle.hpp"
