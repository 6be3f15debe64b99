// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace subtq {

/// Weight/activation memory layouts. All tensors are row-major.
enum class Layout {
    NCHW,   // activations
    OIHW,   // conv weights
    C1HW,   // depthwise conv weights (channel multiplier 1)
    OI,     // dense weights
    C,      // bias
};

std::string layout_name(Layout l);
Layout layout_from_name(const std::string& name);

/// Dense FP32 n-dimensional array.
struct Tensor {
    std::vector<int64_t> dims;
    std::vector<float> data;
    Layout layout = Layout::NCHW;

    Tensor() = default;
    Tensor(std::vector<int64_t> d, Layout l)
        : dims(std::move(d)), layout(l) {
        data.assign(static_cast<size_t>(numel()), 0.0f);
    }
    Tensor(std::vector<int64_t> d, std::vector<float> v, Layout l)
        : dims(std::move(d)), data(std::move(v)), layout(l) {}

    int64_t numel() const {
        return std::accumulate(dims.begin(), dims.end(), int64_t{1},
                               std::multiplies<int64_t>());
    }

    bool all_finite() const {
        for (float x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool operator==(const Tensor& o) const = default;
};

inline int64_t shape_numel(const std::vector<int64_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), int64_t{1},
                           std::multiplies<int64_t>());
}

std::string shape_str(const std::vector<int64_t>& dims);

}  // namespace subtq
