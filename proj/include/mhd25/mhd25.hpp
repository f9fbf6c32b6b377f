#pragma once

#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"
#include "mhd25/littlewood_paley.hpp"
#include "mhd25/mhd_state.hpp"
#include "mhd25/decay_fit.hpp"
#include "mhd25/linear_symbol.hpp"
#include "mhd25/diagnostics.hpp"
#include "mhd25/solver.hpp"
#include "mhd25/initial_data.hpp"
#include "mhd25/consistency.hpp"
#include "mhd25/lp_properties.hpp"
#include "mhd25/cli.hpp"
