#pragma once

#include "wir/basis.hpp"
#include "wir/config.hpp"
#include "wir/csv.hpp"
#include "wir/errors.hpp"
#include "wir/fitting.hpp"
#include "wir/format.hpp"
#include "wir/linalg.hpp"
#include "wir/model_io.hpp"
#include "wir/parallel.hpp"
#include "wir/predict.hpp"
#include "wir/reduction.hpp"
#include "wir/rng.hpp"
#include "wir/select.hpp"
#include "wir/sim.hpp"
#include "wir/spice.hpp"
#include "wir/weights.hpp"
