#pragma once

#include "driftconform/baselines.hpp"
#include "driftconform/detect.hpp"
#include "driftconform/fullconf.hpp"
#include "driftconform/harness.hpp"
#include "driftconform/json_io.hpp"
#include "driftconform/learners.hpp"
#include "driftconform/metrics.hpp"
#include "driftconform/ocp.hpp"
#include "driftconform/prediction_set.hpp"
#include "driftconform/quantile.hpp"
#include "driftconform/rng.hpp"
#include "driftconform/streams.hpp"
#include "driftconform/types.hpp"
