// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "subtq/model.hpp"

namespace subtq {

/// Deterministic test model: two depthwise-separable blocks plus a dense
/// head (9 nodes). The depthwise layers carry per-channel range disparity
/// (equalization target); the dense head carries a few large outlier weights
/// (splitting target); the remaining weights are uniform.
Model make_tiny_sep2(uint64_t seed = 0);

/// Deterministic uniform [-1, 1] input samples for the model.
std::vector<Tensor> make_calib_set(const Model& model, int count, uint64_t seed = 0);

}  // namespace subtq
