#pragma once

#include "driftgate/config.hpp"
#include "driftgate/csv_io.hpp"
#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/gating.hpp"
#include "driftgate/integration_monitor.hpp"
#include "driftgate/json_io.hpp"
#include "driftgate/perf_metrics.hpp"
#include "driftgate/synthetic.hpp"
#include "driftgate/uncertainty.hpp"
