#pragma once

#include "trisleo/alternating.hpp"
#include "trisleo/channel.hpp"
#include "trisleo/conic.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/phase.hpp"
#include "trisleo/power.hpp"
#include "trisleo/rate.hpp"
#include "trisleo/report.hpp"
#include "trisleo/scenario.hpp"
#include "trisleo/sweep.hpp"
