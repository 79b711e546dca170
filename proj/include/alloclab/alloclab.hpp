// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header: the whole library in one include.
#pragma once

#include "alloclab/common.hpp"
#include "alloclab/harness.hpp"
#include "alloclab/json_config.hpp"
#include "alloclab/power_series.hpp"
#include "alloclab/rng.hpp"
#include "alloclab/sampler.hpp"
#include "alloclab/scheme.hpp"
#include "alloclab/sum_distribution.hpp"
#include "alloclab/theory.hpp"
