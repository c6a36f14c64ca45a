#pragma once

#include "sbm/errors.hpp"
#include "sbm/rng.hpp"
#include "sbm/expfam.hpp"
#include "sbm/model.hpp"
#include "sbm/sampling.hpp"
#include "sbm/simulate.hpp"
#include "sbm/inference.hpp"
#include "sbm/asymptotics.hpp"
#include "sbm/stats.hpp"
#include "sbm/io.hpp"
#include "sbm/harness.hpp"
