#pragma once

#include "csv.hpp"
#include "domain.hpp"
#include "estimation.hpp"
#include "intervals.hpp"
#include "linking.hpp"
#include "numerics/optimize.hpp"
#include "numerics/quadrature.hpp"
#include "numerics/roots.hpp"
#include "numerics/special.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulation.hpp"
