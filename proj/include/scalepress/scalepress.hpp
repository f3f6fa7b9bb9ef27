#pragma once

// Umbrella header.

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"
#include "scalepress/experiment.hpp"
#include "scalepress/group.hpp"
#include "scalepress/measure.hpp"
#include "scalepress/oracle.hpp"
#include "scalepress/pressure.hpp"
#include "scalepress/pseudo.hpp"
#include "scalepress/rational.hpp"
#include "scalepress/scale.hpp"
#include "scalepress/solver.hpp"
#include "scalepress/system.hpp"
