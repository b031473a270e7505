// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "specquant/artifact.hpp"
#include "specquant/budget.hpp"
#include "specquant/error.hpp"
#include "specquant/layer.hpp"
#include "specquant/matrix.hpp"
#include "specquant/npy.hpp"
#include "specquant/parallel.hpp"
#include "specquant/pipeline.hpp"
#include "specquant/quant.hpp"
#include "specquant/spectral.hpp"
#include "specquant/synthetic.hpp"
