#pragma once

#include "stentnet/analysis.hpp"
#include "stentnet/core.hpp"
#include "stentnet/fem.hpp"
#include "stentnet/geometry.hpp"
#include "stentnet/graph.hpp"
#include "stentnet/io.hpp"
#include "stentnet/quadrature.hpp"
#include "stentnet/rod.hpp"
#include "stentnet/solver.hpp"
