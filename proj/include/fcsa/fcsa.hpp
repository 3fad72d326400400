#pragma once

#include "fcsa/assignment.hpp"
#include "fcsa/common.hpp"
#include "fcsa/core.hpp"
#include "fcsa/game.hpp"
#include "fcsa/instance_io.hpp"
#include "fcsa/mathprog.hpp"
#include "fcsa/parallel.hpp"
#include "fcsa/scenario.hpp"
#include "fcsa/simulator.hpp"
#include "fcsa/vcg_offline.hpp"
#include "fcsa/vcg_online.hpp"
