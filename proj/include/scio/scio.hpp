// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scio/annotations.hpp"
#include "scio/checkpoint.hpp"
#include "scio/dataset.hpp"
#include "scio/error.hpp"
#include "scio/grid.hpp"
#include "scio/heatmap_codec.hpp"
#include "scio/infer.hpp"
#include "scio/metrics.hpp"
#include "scio/nnet.hpp"
#include "scio/rng.hpp"
#include "scio/skeleton.hpp"
#include "scio/synth.hpp"
#include "scio/tensor_io.hpp"
#include "scio/train.hpp"
