#pragma once

#include "sgfbsde/error.hpp"
#include "sgfbsde/index_set.hpp"
#include "sgfbsde/basis1d.hpp"
#include "sgfbsde/sparse_grid.hpp"
#include "sgfbsde/sparse_quadrature.hpp"
#include "sgfbsde/problem.hpp"
#include "sgfbsde/parallel.hpp"
#include "sgfbsde/multistep.hpp"
#include "sgfbsde/benchmarks.hpp"
#include "sgfbsde/experiment.hpp"
