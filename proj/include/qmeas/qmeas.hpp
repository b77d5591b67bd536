#pragma once

#include "direct_measurement.hpp"
#include "grid.hpp"
#include "instrument.hpp"
#include "io.hpp"
#include "naimark.hpp"
#include "observables.hpp"
#include "operators.hpp"
#include "phase_space.hpp"
#include "scheme.hpp"
#include "space.hpp"
#include "state.hpp"
#include "version.hpp"
#include "weak_values.hpp"
