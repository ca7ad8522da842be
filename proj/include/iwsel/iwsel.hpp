// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.
#pragma once

#include "iwsel/channel.hpp"
#include "iwsel/config.hpp"
#include "iwsel/error.hpp"
#include "iwsel/fec.hpp"
#include "iwsel/grid.hpp"
#include "iwsel/harness.hpp"
#include "iwsel/iw.hpp"
#include "iwsel/link.hpp"
#include "iwsel/modulation.hpp"
#include "iwsel/numerics.hpp"
#include "iwsel/rng.hpp"
#include "iwsel/selector.hpp"
