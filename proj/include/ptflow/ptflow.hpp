#pragma once

/// Umbrella header: pulls in the whole ptflow library.

#include "ptflow/config.hpp"
#include "ptflow/diagnostics.hpp"
#include "ptflow/experiment.hpp"
#include "ptflow/flows.hpp"
#include "ptflow/integrate.hpp"
#include "ptflow/objectives.hpp"
#include "ptflow/svg.hpp"
#include "ptflow/timescale.hpp"
