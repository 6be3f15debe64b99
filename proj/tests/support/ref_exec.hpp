// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent scalar reference executor used as a test oracle. Kept separate
// from the library executors on purpose: explicit zero-padded buffers, its own
// shape bookkeeping, plain double arithmetic throughout.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "subtq/model.hpp"

namespace subtq::testref {

using Plane = std::vector<double>;  // flat row-major

struct RefShape {
    int64_t n = 1, c = 1, h = 1, w = 1;
    int64_t numel() const { return n * c * h * w; }
};

inline std::pair<int64_t, int64_t> same_pad(int64_t in, int64_t k, int stride) {
    int64_t out = (in + stride - 1) / stride;
    int64_t total = std::max<int64_t>((out - 1) * stride + k - in, 0);
    return {total / 2, total - total / 2};
}

// Zero-pads a single [c, h, w] image.
inline Plane pad_image(const Plane& img, int64_t c, int64_t h, int64_t w,
                       int64_t pt, int64_t pb, int64_t pl, int64_t pr) {
    int64_t ph = h + pt + pb, pw = w + pl + pr;
    Plane out(c * ph * pw, 0.0);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                out[(ch * ph + y + pt) * pw + x + pl] = img[(ch * h + y) * w + x];
    return out;
}

inline Plane ref_conv(const Node& node, const Plane& in, RefShape is, RefShape& os) {
    const Tensor& wt = *node.weight;
    int64_t oc = wt.dims[0], cg = wt.dims[1], kh = wt.dims[2], kw = wt.dims[3];
    int64_t groups = node.kind == NodeKind::DepthwiseConv2D ? is.c : node.groups;
    int64_t ocg = oc / (node.kind == NodeKind::DepthwiseConv2D ? is.c : groups);
    if (node.kind == NodeKind::DepthwiseConv2D) ocg = 1, cg = 1;

    int64_t pt = 0, pb = 0, pl = 0, pr = 0;
    if (node.pad == PadMode::Same) {
        auto [t, b] = same_pad(is.h, kh, node.stride);
        auto [l, r] = same_pad(is.w, kw, node.stride);
        pt = t, pb = b, pl = l, pr = r;
    }
    int64_t ph = is.h + pt + pb, pw = is.w + pl + pr;
    os.n = is.n;
    os.c = node.kind == NodeKind::DepthwiseConv2D ? is.c : oc;
    os.h = (ph - kh) / node.stride + 1;
    os.w = (pw - kw) / node.stride + 1;

    Plane out(os.numel(), 0.0);
    for (int64_t b = 0; b < is.n; ++b) {
        Plane img(in.begin() + b * is.c * is.h * is.w,
                  in.begin() + (b + 1) * is.c * is.h * is.w);
        Plane padded = pad_image(img, is.c, is.h, is.w, pt, pb, pl, pr);
        for (int64_t o = 0; o < os.c; ++o) {
            int64_t g = node.kind == NodeKind::DepthwiseConv2D ? o : o / (oc / groups);
            double bias = node.bias ? node.bias->data[o] : 0.0;
            for (int64_t y = 0; y < os.h; ++y)
                for (int64_t x = 0; x < os.w; ++x) {
                    double acc = bias;
                    for (int64_t ky = 0; ky < kh; ++ky)
                        for (int64_t kx = 0; kx < kw; ++kx)
                            for (int64_t c = 0; c < cg; ++c) {
                                int64_t ic = node.kind == NodeKind::DepthwiseConv2D
                                                 ? o
                                                 : g * cg + c;
                                double wv =
                                    node.kind == NodeKind::DepthwiseConv2D
                                        ? wt.data[(o * kh + ky) * kw + kx]
                                        : wt.data[((o * cg + c) * kh + ky) * kw + kx];
                                acc += padded[(ic * ph + y * node.stride + ky) * pw +
                                              x * node.stride + kx] *
                                       wv;
                            }
                    out[((b * os.c + o) * os.h + y) * os.w + x] = acc;
                }
        }
    }
    return out;
}

/// Evaluates the model in double precision, matching the library semantics
/// (accumulate in double, narrow each node output to float).
inline std::vector<float> ref_run(const Model& model, const std::vector<float>& input) {
    std::map<std::string, Plane> vals;
    std::map<std::string, RefShape> rshapes;

    RefShape in_shape;
    {
        const auto& d = model.input_shape;
        in_shape.n = d[0];
        in_shape.c = d.size() > 1 ? d[1] : 1;
        in_shape.h = d.size() > 2 ? d[2] : 1;
        in_shape.w = d.size() > 3 ? d[3] : 1;
    }
    Plane in_plane(input.begin(), input.end());

    auto get = [&](const std::string& id) -> const Plane& {
        return id == kGraphInput ? in_plane : vals.at(id);
    };
    auto shape_of = [&](const std::string& id) -> RefShape {
        return id == kGraphInput ? in_shape : rshapes.at(id);
    };

    for (const Node& node : model.nodes) {
        const Plane& in = get(node.inputs[0]);
        RefShape is = shape_of(node.inputs[0]);
        RefShape os = is;
        Plane out;
        switch (node.kind) {
            case NodeKind::Conv2D:
            case NodeKind::DepthwiseConv2D:
                out = ref_conv(node, in, is, os);
                break;
            case NodeKind::Dense: {
                const Tensor& wt = *node.weight;
                int64_t of = wt.dims[0], inf = wt.dims[1];
                os = RefShape{is.n, of, 1, 1};
                out.assign(is.n * of, 0.0);
                for (int64_t b = 0; b < is.n; ++b)
                    for (int64_t o = 0; o < of; ++o) {
                        double acc = node.bias ? node.bias->data[o] : 0.0;
                        for (int64_t i = 0; i < inf; ++i)
                            acc += in[b * inf + i] * wt.data[o * inf + i];
                        out[b * of + o] = acc;
                    }
                break;
            }
            case NodeKind::ReLU:
                out = in;
                for (double& v : out) v = std::max(v, 0.0);
                break;
            case NodeKind::ReLU6:
                out = in;
                for (double& v : out) v = std::clamp(v, 0.0, 6.0);
                break;
            case NodeKind::Add: {
                const Plane& rhs = get(node.inputs[1]);
                out = in;
                for (size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
                break;
            }
            case NodeKind::GlobalAvgPool: {
                os = RefShape{is.n, is.c, 1, 1};
                out.assign(is.n * is.c, 0.0);
                for (int64_t b = 0; b < is.n; ++b)
                    for (int64_t c = 0; c < is.c; ++c) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < is.h * is.w; ++i)
                            acc += in[(b * is.c + c) * is.h * is.w + i];
                        out[b * is.c + c] = acc / (is.h * is.w);
                    }
                break;
            }
        }
        // narrow to float, mirroring the FP32 executor's storage
        for (double& v : out) v = static_cast<float>(v);
        rshapes[node.id] = os;
        vals[node.id] = std::move(out);
    }
    const Plane& out = vals.at(model.output_id);
    return std::vector<float>(out.begin(), out.end());
}

}  // namespace subtq::testref
