// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/quant.hpp"

#include <algorithm>
#include <stdexcept>

namespace subtq {

QuantParams compute_qparams(double min_val, double max_val, int bits) {
    if (!std::isfinite(min_val) || !std::isfinite(max_val))
        throw std::invalid_argument("compute_qparams: non-finite range");
    if (min_val > max_val)
        throw std::invalid_argument("compute_qparams: min > max");
    if (bits < 2 || bits > 8)
        throw std::invalid_argument("compute_qparams: unsupported bit width");

    QuantParams p;
    p.bits = bits;
    p.qmin = -(1 << (bits - 1));
    p.qmax = (1 << (bits - 1)) - 1;

    double lo = std::min(min_val, 0.0);
    double hi = std::max(max_val, 0.0);
    if (lo == 0.0 && hi == 0.0) {
        p.scale = 1.0;
        p.zero_point = 0;
        return p;
    }
    p.scale = (hi - lo) / static_cast<double>(p.qmax - p.qmin);
    int64_t zp = round_away(p.qmin - lo / p.scale);
    p.zero_point = static_cast<int32_t>(
        std::clamp<int64_t>(zp, p.qmin, p.qmax));
    return p;
}

int32_t quantize_value(double x, const QuantParams& p) {
    int64_t q = round_away(x / p.scale) + p.zero_point;
    return static_cast<int32_t>(std::clamp<int64_t>(q, p.qmin, p.qmax));
}

QTensor quantize(const Tensor& t, const QuantParams& p) {
    if (!(p.scale > 0) || !std::isfinite(p.scale))
        throw std::invalid_argument("quantize: invalid scale");
    QTensor q;
    q.dims = t.dims;
    q.layout = t.layout;
    q.params = {p};
    q.data.resize(t.data.size());
    for (size_t i = 0; i < t.data.size(); ++i)
        q.data[i] = static_cast<int8_t>(quantize_value(t.data[i], p));
    return q;
}

namespace {

// Strides for iterating channel slices along `axis`: element index
// = outer * (dim_axis * inner) + c * inner + innerpos.
struct AxisSplit {
    int64_t outer, axis_dim, inner;
};

AxisSplit axis_split(const std::vector<int64_t>& dims, int axis) {
    if (axis < 0 || axis >= static_cast<int>(dims.size()))
        throw std::invalid_argument("invalid channel axis");
    AxisSplit s{1, dims[axis], 1};
    for (int i = 0; i < axis; ++i) s.outer *= dims[i];
    for (size_t i = axis + 1; i < dims.size(); ++i) s.inner *= dims[i];
    return s;
}

}  // namespace

std::vector<QuantParams> compute_qparams_per_channel(const Tensor& w, int axis,
                                                     int bits) {
    AxisSplit s = axis_split(w.dims, axis);
    std::vector<QuantParams> out;
    out.reserve(s.axis_dim);
    for (int64_t c = 0; c < s.axis_dim; ++c) {
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (int64_t o = 0; o < s.outer; ++o)
            for (int64_t i = 0; i < s.inner; ++i) {
                double v = w.data[(o * s.axis_dim + c) * s.inner + i];
                if (first) {
                    lo = hi = v;
                    first = false;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        out.push_back(compute_qparams(lo, hi, bits));
    }
    return out;
}

QTensor quantize_per_channel(const Tensor& t, const std::vector<QuantParams>& params,
                             int axis) {
    AxisSplit s = axis_split(t.dims, axis);
    if (static_cast<int64_t>(params.size()) != s.axis_dim)
        throw std::invalid_argument("per-channel params count != channel dim");
    QTensor q;
    q.dims = t.dims;
    q.layout = t.layout;
    q.params = params;
    q.channel_axis = axis;
    q.data.resize(t.data.size());
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t c = 0; c < s.axis_dim; ++c)
            for (int64_t i = 0; i < s.inner; ++i) {
                size_t idx = (o * s.axis_dim + c) * s.inner + i;
                q.data[idx] = static_cast<int8_t>(quantize_value(t.data[idx], params[c]));
            }
    return q;
}

Tensor dequantize(const QTensor& q) {
    Tensor t;
    t.dims = q.dims;
    t.layout = q.layout;
    t.data.resize(q.data.size());
    if (!q.per_channel()) {
        const QuantParams& p = q.params.at(0);
        for (size_t i = 0; i < q.data.size(); ++i)
            t.data[i] = static_cast<float>(dequantize_value(q.data[i], p));
        return t;
    }
    AxisSplit s = axis_split(q.dims, q.channel_axis);
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t c = 0; c < s.axis_dim; ++c)
            for (int64_t i = 0; i < s.inner; ++i) {
                size_t idx = (o * s.axis_dim + c) * s.inner + i;
                t.data[idx] =
                    static_cast<float>(dequantize_value(q.data[idx], q.params[c]));
            }
    return t;
}

double quantization_sse(const Tensor& t, const QuantParams& p) {
    double sse = 0.0;
    for (float x : t.data) {
        double err = x - dequantize_value(quantize_value(x, p), p);
        sse += err * err;
    }
    return sse;
}

}  // namespace subtq
