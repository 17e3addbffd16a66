#pragma once

#include "pdl/nn/layers.hpp"
#include "pdl/nn/model.hpp"
#include "pdl/nn/normalizer.hpp"
#include "pdl/nn/tensor.hpp"
#include "pdl/nn/train.hpp"
