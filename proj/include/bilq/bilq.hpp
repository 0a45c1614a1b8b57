#pragma once

#include "control.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "kalman.hpp"
#include "observability.hpp"
#include "poly.hpp"
#include "rng.hpp"
#include "sim.hpp"
