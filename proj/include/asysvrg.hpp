#pragma once

#include "asysvrg/baselines.hpp"
#include "asysvrg/bench.hpp"
#include "asysvrg/engine.hpp"
#include "asysvrg/libsvm.hpp"
#include "asysvrg/metrics.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/rng.hpp"
#include "asysvrg/schedule.hpp"
#include "asysvrg/shared_state.hpp"
#include "asysvrg/simulator.hpp"
#include "asysvrg/synthetic.hpp"
#include "asysvrg/theory.hpp"
