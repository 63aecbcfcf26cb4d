#pragma once

#include "bids/reset_problem.hpp"
#include "bids/prp_demand.hpp"
#include "bids/bids_solver.hpp"
#include "bids/value_iteration.hpp"
#include "bids/water_model.hpp"
#include "bids/policy_export.hpp"
#include "bids/policy_sim.hpp"
#include "bids/run_config.hpp"
