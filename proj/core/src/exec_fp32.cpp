// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <stdexcept>

#include "subtq/exec.hpp"

namespace subtq {

namespace {

struct PadInfo {
    int64_t top = 0, left = 0;
};

PadInfo pad_offsets(const Node& node, int64_t ih, int64_t iw, int64_t kh, int64_t kw,
                    int64_t oh, int64_t ow) {
    PadInfo p;
    if (node.pad == PadMode::Same) {
        int64_t ph = std::max<int64_t>((oh - 1) * node.stride + kh - ih, 0);
        int64_t pw = std::max<int64_t>((ow - 1) * node.stride + kw - iw, 0);
        p.top = ph / 2;
        p.left = pw / 2;
    }
    return p;
}

Tensor conv2d_fp32(const Node& node, const Tensor& in,
                   const std::vector<int64_t>& out_shape) {
    const Tensor& w = *node.weight;
    int64_t n = in.dims[0], ic = in.dims[1], ih = in.dims[2], iw = in.dims[3];
    int64_t oc = w.dims[0], cg = w.dims[1], kh = w.dims[2], kw = w.dims[3];
    int64_t oh = out_shape[2], ow = out_shape[3];
    int64_t groups = node.groups;
    int64_t oc_per_group = oc / groups;
    PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);

    Tensor out(out_shape, Layout::NCHW);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t o = 0; o < oc; ++o) {
            int64_t g = o / oc_per_group;
            double bias = node.bias ? node.bias->data[o] : 0.0;
            for (int64_t y = 0; y < oh; ++y)
                for (int64_t x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (int64_t c = 0; c < cg; ++c) {
                        int64_t in_c = g * cg + c;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            int64_t sy = y * node.stride + ky - p.top;
                            if (sy < 0 || sy >= ih) continue;
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                int64_t sx = x * node.stride + kx - p.left;
                                if (sx < 0 || sx >= iw) continue;
                                acc += static_cast<double>(
                                           in.data[((b * ic + in_c) * ih + sy) * iw + sx]) *
                                       static_cast<double>(
                                           w.data[((o * cg + c) * kh + ky) * kw + kx]);
                            }
                        }
                    }
                    out.data[((b * oc + o) * oh + y) * ow + x] =
                        static_cast<float>(acc + bias);
                }
        }
    return out;
}

Tensor depthwise_fp32(const Node& node, const Tensor& in,
                      const std::vector<int64_t>& out_shape) {
    const Tensor& w = *node.weight;
    int64_t n = in.dims[0], ic = in.dims[1], ih = in.dims[2], iw = in.dims[3];
    int64_t kh = w.dims[2], kw = w.dims[3];
    int64_t oh = out_shape[2], ow = out_shape[3];
    PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);

    Tensor out(out_shape, Layout::NCHW);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t c = 0; c < ic; ++c) {
            double bias = node.bias ? node.bias->data[c] : 0.0;
            for (int64_t y = 0; y < oh; ++y)
                for (int64_t x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        int64_t sy = y * node.stride + ky - p.top;
                        if (sy < 0 || sy >= ih) continue;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            int64_t sx = x * node.stride + kx - p.left;
                            if (sx < 0 || sx >= iw) continue;
                            acc += static_cast<double>(
                                       in.data[((b * ic + c) * ih + sy) * iw + sx]) *
                                   static_cast<double>(w.data[(c * kh + ky) * kw + kx]);
                        }
                    }
                    out.data[((b * ic + c) * oh + y) * ow + x] =
                        static_cast<float>(acc + bias);
                }
        }
    return out;
}

Tensor dense_fp32(const Node& node, const Tensor& in,
                  const std::vector<int64_t>& out_shape) {
    const Tensor& w = *node.weight;
    int64_t n = in.dims[0];
    int64_t out_f = w.dims[0], in_f = w.dims[1];
    Tensor out(out_shape, Layout::NCHW);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t o = 0; o < out_f; ++o) {
            double acc = node.bias ? node.bias->data[o] : 0.0;
            for (int64_t i = 0; i < in_f; ++i)
                acc += static_cast<double>(in.data[b * in_f + i]) *
                       static_cast<double>(w.data[o * in_f + i]);
            out.data[b * out_f + o] = static_cast<float>(acc);
        }
    return out;
}

}  // namespace

Tensor run_fp32(const Model& model, const Tensor& input,
                std::map<std::string, Tensor>* edge_out) {
    if (input.dims != model.input_shape)
        throw std::invalid_argument("run_fp32: input shape " + shape_str(input.dims) +
                                 " != model input shape " +
                                 shape_str(model.input_shape));
    auto shapes = infer_shapes(model);
    std::map<std::string, Tensor> values;
    auto value_of = [&](const std::string& id) -> const Tensor& {
        return id == kGraphInput ? input : values.at(id);
    };

    for (const Node& node : model.nodes) {
        const Tensor& in = value_of(node.inputs[0]);
        const auto& out_shape = shapes.at(node.id);
        Tensor out;
        switch (node.kind) {
            case NodeKind::Conv2D:
                out = conv2d_fp32(node, in, out_shape);
                break;
            case NodeKind::DepthwiseConv2D:
                out = depthwise_fp32(node, in, out_shape);
                break;
            case NodeKind::Dense:
                out = dense_fp32(node, in, out_shape);
                break;
            case NodeKind::ReLU: {
                out = in;
                for (float& v : out.data) v = std::max(v, 0.0f);
                break;
            }
            case NodeKind::ReLU6: {
                out = in;
                for (float& v : out.data) v = std::clamp(v, 0.0f, 6.0f);
                break;
            }
            case NodeKind::Add: {
                const Tensor& rhs = value_of(node.inputs[1]);
                out = in;
                for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += rhs.data[i];
                break;
            }
            case NodeKind::GlobalAvgPool: {
                int64_t n = in.dims[0], c = in.dims[1], hw = in.dims[2] * in.dims[3];
                out = Tensor(out_shape, Layout::NCHW);
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t ch = 0; ch < c; ++ch) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < hw; ++i)
                            acc += in.data[(b * c + ch) * hw + i];
                        out.data[b * c + ch] = static_cast<float>(acc / hw);
                    }
                break;
            }
        }
        values[node.id] = std::move(out);
    }
    Tensor result = values.at(model.output_id);
    if (edge_out) *edge_out = std::move(values);
    return result;
}

}  // namespace subtq
