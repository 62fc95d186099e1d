#pragma once

#include "resint/csv.hpp"
#include "resint/dgrad.hpp"
#include "resint/diagnostics.hpp"
#include "resint/integrators.hpp"
#include "resint/model.hpp"
#include "resint/reference_cache.hpp"
