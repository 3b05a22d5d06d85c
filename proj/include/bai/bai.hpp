#pragma once

// Umbrella header.

#include "bai/allocation.hpp"
#include "bai/config.hpp"
#include "bai/error.hpp"
#include "bai/estimators.hpp"
#include "bai/harness.hpp"
#include "bai/models.hpp"
#include "bai/random.hpp"
#include "bai/strategies.hpp"
