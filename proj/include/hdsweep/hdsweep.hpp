#pragma once

// Umbrella header for the whole library.
#include "hdsweep/error.hpp"
#include "hdsweep/space.hpp"
#include "hdsweep/trajectory.hpp"
#include "hdsweep/cone.hpp"
#include "hdsweep/functional.hpp"
#include "hdsweep/moving_set.hpp"
#include "hdsweep/prox.hpp"
#include "hdsweep/evi.hpp"
#include "hdsweep/history.hpp"
#include "hdsweep/inclusion.hpp"
#include "hdsweep/sweeping.hpp"
#include "hdsweep/contact.hpp"
#include "hdsweep/oracle.hpp"
#include "hdsweep/config.hpp"
#include "hdsweep/cli.hpp"
