#pragma once

#include "lsopt/common.hpp"
#include "lsopt/config.hpp"
#include "lsopt/harness.hpp"
#include "lsopt/io.hpp"
#include "lsopt/linear_map.hpp"
#include "lsopt/lowrank.hpp"
#include "lsopt/prox.hpp"
#include "lsopt/rng.hpp"
#include "lsopt/spd_solve.hpp"
#include "lsopt/splitting.hpp"
