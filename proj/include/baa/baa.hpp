#pragma once

#include "baa/analytics.hpp"
#include "baa/errors.hpp"
#include "baa/experiment.hpp"
#include "baa/extensions.hpp"
#include "baa/format.hpp"
#include "baa/learning.hpp"
#include "baa/montecarlo.hpp"
#include "baa/network.hpp"
#include "baa/params.hpp"
#include "baa/phy.hpp"
#include "baa/random.hpp"
#include "baa/special.hpp"
