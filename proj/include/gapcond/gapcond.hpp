#pragma once

#include "gapcond/errors.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/quadrature.hpp"
#include "gapcond/least_squares.hpp"
#include "gapcond/linear_solver.hpp"
#include "gapcond/grid.hpp"
#include "gapcond/field_solver.hpp"
#include "gapcond/asymptotics.hpp"
#include "gapcond/functionals.hpp"
#include "gapcond/reconstruction.hpp"
#include "gapcond/oracle.hpp"
#include "gapcond/harness.hpp"
