#pragma once

#include "tsrecon/bids.hpp"
#include "tsrecon/csv.hpp"
#include "tsrecon/dcgrid.hpp"
#include "tsrecon/disagg.hpp"
#include "tsrecon/errors.hpp"
#include "tsrecon/geo_assign.hpp"
#include "tsrecon/io.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/pipeline.hpp"
#include "tsrecon/qp.hpp"
#include "tsrecon/rng.hpp"
#include "tsrecon/sampling.hpp"
#include "tsrecon/stats.hpp"
#include "tsrecon/timeutil.hpp"
