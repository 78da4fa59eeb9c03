#pragma once

#include "mmcd/chi_square.hpp"
#include "mmcd/error.hpp"
#include "mmcd/estimator.hpp"
#include "mmcd/flip_flop.hpp"
#include "mmcd/io.hpp"
#include "mmcd/linalg.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/matvar.hpp"
#include "mmcd/outlier.hpp"
#include "mmcd/parallel.hpp"
#include "mmcd/param_set.hpp"
#include "mmcd/seeding.hpp"
#include "mmcd/simlab.hpp"
