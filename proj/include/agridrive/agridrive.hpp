#pragma once

// umbrella header

#include "agridrive/cli.hpp"
#include "agridrive/config.hpp"
#include "agridrive/csv.hpp"
#include "agridrive/duty.hpp"
#include "agridrive/errors.hpp"
#include "agridrive/kinematics.hpp"
#include "agridrive/modctrl.hpp"
#include "agridrive/powertrain.hpp"
#include "agridrive/report.hpp"
#include "agridrive/rng.hpp"
#include "agridrive/simulator.hpp"
#include "agridrive/transmission.hpp"
#include "agridrive/units.hpp"
