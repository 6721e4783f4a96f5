#pragma once

// Umbrella header for the AirComp tensor-parallel inference simulator.

#include "airtp/assignment.hpp"
#include "airtp/channel.hpp"
#include "airtp/cmatrix.hpp"
#include "airtp/config.hpp"
#include "airtp/eig.hpp"
#include "airtp/error.hpp"
#include "airtp/experiments.hpp"
#include "airtp/model_io.hpp"
#include "airtp/oracles.hpp"
#include "airtp/perfmodel.hpp"
#include "airtp/pool.hpp"
#include "airtp/projection.hpp"
#include "airtp/results.hpp"
#include "airtp/rng.hpp"
#include "airtp/tensor.hpp"
#include "airtp/toy_model.hpp"
#include "airtp/toy_train.hpp"
#include "airtp/tp_runtime.hpp"
#include "airtp/transceiver.hpp"
