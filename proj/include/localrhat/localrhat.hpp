#pragma once

#include "localrhat/chains.hpp"
#include "localrhat/counterexamples.hpp"
#include "localrhat/diagnose.hpp"
#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/multivariate.hpp"
#include "localrhat/population.hpp"
#include "localrhat/rng.hpp"
#include "localrhat/simulate.hpp"
#include "localrhat/statdist.hpp"
#include "localrhat/thresholds.hpp"
