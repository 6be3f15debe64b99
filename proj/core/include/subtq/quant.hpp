// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "subtq/tensor.hpp"

namespace subtq {

/// Affine mapping x ~= (q - zero_point) * scale for one tensor or one channel.
struct QuantParams {
    double scale = 1.0;
    int32_t zero_point = 0;
    int32_t qmin = -128;
    int32_t qmax = 127;
    int bits = 8;

    bool operator==(const QuantParams& o) const = default;
};

/// Rounding mode used toolkit-wide: round half away from zero.
inline int64_t round_away(double x) { return std::llround(x); }

/// Compute affine params for [min_val, max_val], extending the range to
/// include 0 so that real zero is exactly representable.
QuantParams compute_qparams(double min_val, double max_val, int bits = 8);

/// Quantize one value.
int32_t quantize_value(double x, const QuantParams& p);

/// Dequantize one value.
inline double dequantize_value(int32_t q, const QuantParams& p) {
    return (q - p.zero_point) * p.scale;
}

/// Quantized tensor; per-tensor params, or per-channel params along an axis.
struct QTensor {
    std::vector<int64_t> dims;
    Layout layout = Layout::NCHW;
    std::vector<int8_t> data;
    std::vector<QuantParams> params;  // size 1 => per-tensor
    int channel_axis = 0;             // meaningful when params.size() > 1

    bool per_channel() const { return params.size() > 1; }
    int64_t numel() const { return shape_numel(dims); }
};

QTensor quantize(const Tensor& t, const QuantParams& p);
Tensor dequantize(const QTensor& q);

std::vector<QuantParams> compute_qparams_per_channel(const Tensor& w, int axis,
                                                     int bits = 8);
QTensor quantize_per_channel(const Tensor& t, const std::vector<QuantParams>& params,
                             int axis);

/// Sum of squared error between t and dequantize(quantize(t, p)).
double quantization_sse(const Tensor& t, const QuantParams& p);

}  // namespace subtq
