#pragma once

#include "gpds/commands.hpp"
#include "gpds/experiments.hpp"
#include "gpds/predictive_density.hpp"
