#pragma once

#include "esnmpc/cli.hpp"
#include "esnmpc/config.hpp"
#include "esnmpc/csv.hpp"
#include "esnmpc/error.hpp"
#include "esnmpc/esn.hpp"
#include "esnmpc/esn_io.hpp"
#include "esnmpc/experiment.hpp"
#include "esnmpc/experiment_config.hpp"
#include "esnmpc/linalg.hpp"
#include "esnmpc/mpc.hpp"
#include "esnmpc/plant.hpp"
#include "esnmpc/rng.hpp"
#include "esnmpc/svg.hpp"
