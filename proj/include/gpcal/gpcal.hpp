#pragma once

#include "gpcal/bcr.hpp"
#include "gpcal/config.hpp"
#include "gpcal/cps.hpp"
#include "gpcal/experiment.hpp"
#include "gpcal/gn.hpp"
#include "gpcal/gp.hpp"
#include "gpcal/io.hpp"
#include "gpcal/jackknife.hpp"
#include "gpcal/matern.hpp"
#include "gpcal/metrics.hpp"
#include "gpcal/predictive.hpp"
#include "gpcal/rng.hpp"
#include "gpcal/test_functions.hpp"
