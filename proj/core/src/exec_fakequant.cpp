// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

// Fake-quantization oracle for the integer executor. All quantized values are
// carried as exact integers in FP64; accumulation happens in FP64 and the
// fixed-point requantization is evaluated in extended precision, independently
// of the integer code path in exec_int8.cpp.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subtq/exec.hpp"

namespace subtq {

namespace {

// round(value * mantissa * 2^-shift), half away from zero. Exact: |value| <
// 2^31 and mantissa < 2^31, so value * mantissa + 2^(shift-1) fits the 64-bit
// significand of long double.
double fq_requant(double value, const RequantSpec& rs) {
    long double prod = static_cast<long double>(value) * rs.mantissa;
    long double half = ldexpl(1.0L, rs.shift - 1);
    long double div = ldexpl(1.0L, rs.shift);
    if (prod >= 0) return static_cast<double>(floorl((prod + half) / div));
    return -static_cast<double>(floorl((-prod + half) / div));
}

double clamp_fq(double q, const QuantParams& p) {
    return std::clamp(q, static_cast<double>(p.qmin), static_cast<double>(p.qmax));
}

double quantize_fq(double x, const QuantParams& p) {
    return clamp_fq(std::round(x / p.scale) + p.zero_point, p);
}

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

}  // namespace

Tensor run_fakequant(const QModel& qm, const Tensor& input,
                     std::map<std::string, std::vector<double>>* acc_out) {
    if (input.dims != qm.graph.input_shape)
        throw std::invalid_argument("run_fakequant: input shape mismatch");
    auto shapes = infer_shapes(qm.graph);
    std::map<std::string, std::vector<double>> edges;

    std::vector<double> input_q(input.data.size());
    for (size_t i = 0; i < input.data.size(); ++i)
        input_q[i] = quantize_fq(input.data[i], qm.input_params);

    auto edge = [&](const std::string& id) -> const std::vector<double>& {
        return id == kGraphInput ? input_q : edges.at(id);
    };
    auto shape_of = [&](const std::string& id) -> const std::vector<int64_t>& {
        return id == kGraphInput ? qm.graph.input_shape : shapes.at(id);
    };

    for (const Node& node : qm.graph.nodes) {
        const QuantParams& p_in = qm.params_of(node.inputs[0]);
        const QuantParams& p_out = qm.params_of(node.id);
        const std::vector<double>& in = edge(node.inputs[0]);
        const auto& in_shape = shape_of(node.inputs[0]);
        const auto& out_shape = shapes.at(node.id);
        std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));

        if (node.has_weight_kind()) {
            const QTensor& w = qm.weights.at(node.id);
            const std::vector<int32_t>& bias = qm.biases.at(node.id);
            const QuantParams& p_w = w.params.at(0);
            RequantSpec rs =
                RequantSpec::from_multiplier(p_in.scale * p_w.scale / p_out.scale);
            double acc_scale = p_in.scale * p_w.scale;
            double zp_in = p_in.zero_point, zp_w = p_w.zero_point;
            std::vector<double>* accs = nullptr;
            if (acc_out) {
                accs = &(*acc_out)[node.id];
                accs->resize(out.size());
            }
            auto emit = [&](size_t idx, double acc, int64_t b) {
                acc += static_cast<double>(b);
                if (accs) (*accs)[idx] = acc * acc_scale;
                out[idx] = clamp_fq(fq_requant(acc, rs) + p_out.zero_point, p_out);
            };

            if (node.kind == NodeKind::Dense) {
                int64_t n = in_shape[0], out_f = w.dims[0], in_f = w.dims[1];
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t o = 0; o < out_f; ++o) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < in_f; ++i)
                            acc += (in[b * in_f + i] - zp_in) *
                                   (static_cast<double>(w.data[o * in_f + i]) - zp_w);
                        emit(b * out_f + o, acc, bias[o]);
                    }
            } else if (node.kind == NodeKind::DepthwiseConv2D) {
                int64_t n = in_shape[0], ic = in_shape[1], ih = in_shape[2],
                        iw = in_shape[3];
                int64_t kh = w.dims[2], kw = w.dims[3];
                int64_t oh = out_shape[2], ow = out_shape[3];
                PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t c = 0; c < ic; ++c)
                        for (int64_t y = 0; y < oh; ++y)
                            for (int64_t x = 0; x < ow; ++x) {
                                double acc = 0.0;
                                for (int64_t ky = 0; ky < kh; ++ky) {
                                    int64_t sy = y * node.stride + ky - p.top;
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        int64_t sx = x * node.stride + kx - p.left;
                                        if (sy < 0 || sy >= ih || sx < 0 || sx >= iw)
                                            continue;
                                        acc += (in[((b * ic + c) * ih + sy) * iw + sx] -
                                                zp_in) *
                                               (static_cast<double>(
                                                    w.data[(c * kh + ky) * kw + kx]) -
                                                zp_w);
                                    }
                                }
                                emit(((b * ic + c) * oh + y) * ow + x, acc, bias[c]);
                            }
            } else {  // Conv2D
                int64_t n = in_shape[0], ic = in_shape[1], ih = in_shape[2],
                        iw = in_shape[3];
                int64_t oc = w.dims[0], cg = w.dims[1], kh = w.dims[2], kw = w.dims[3];
                int64_t oh = out_shape[2], ow = out_shape[3];
                int64_t oc_per_group = oc / node.groups;
                PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t o = 0; o < oc; ++o) {
                        int64_t g = o / oc_per_group;
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
                                            acc +=
                                                (in[((b * ic + in_c) * ih + sy) * iw + sx] -
                                                 zp_in) *
                                                (static_cast<double>(
                                                     w.data[((o * cg + c) * kh + ky) * kw +
                                                            kx]) -
                                                 zp_w);
                                        }
                                    }
                                }
                                emit(((b * oc + o) * oh + y) * ow + x, acc, bias[o]);
                            }
                    }
            }
        } else {
            switch (node.kind) {
                case NodeKind::ReLU:
                case NodeKind::ReLU6: {
                    RequantSpec rs =
                        RequantSpec::from_multiplier(p_in.scale / p_out.scale);
                    double lo = p_out.zero_point;
                    double hi = node.kind == NodeKind::ReLU6
                                    ? clamp_fq(std::round(6.0 / p_out.scale) +
                                                   p_out.zero_point,
                                               p_out)
                                    : static_cast<double>(p_out.qmax);
                    for (size_t i = 0; i < in.size(); ++i) {
                        double q = clamp_fq(
                            fq_requant(in[i] - p_in.zero_point, rs) + p_out.zero_point,
                            p_out);
                        out[i] = std::clamp(q, lo, hi);
                    }
                    break;
                }
                case NodeKind::Add: {
                    const QuantParams& p_b = qm.params_of(node.inputs[1]);
                    const std::vector<double>& rhs = edge(node.inputs[1]);
                    RequantSpec rs_a =
                        RequantSpec::from_multiplier(p_in.scale / p_out.scale);
                    RequantSpec rs_b =
                        RequantSpec::from_multiplier(p_b.scale / p_out.scale);
                    for (size_t i = 0; i < in.size(); ++i) {
                        double a = clamp_fq(
                            fq_requant(in[i] - p_in.zero_point, rs_a) + p_out.zero_point,
                            p_out);
                        double b = clamp_fq(
                            fq_requant(rhs[i] - p_b.zero_point, rs_b) + p_out.zero_point,
                            p_out);
                        out[i] = clamp_fq(a + b - p_out.zero_point, p_out);
                    }
                    break;
                }
                case NodeKind::GlobalAvgPool: {
                    int64_t n = in_shape[0], c = in_shape[1],
                            hw = in_shape[2] * in_shape[3];
                    RequantSpec rs = RequantSpec::from_multiplier(
                        p_in.scale / (p_out.scale * static_cast<double>(hw)));
                    for (int64_t b = 0; b < n; ++b)
                        for (int64_t ch = 0; ch < c; ++ch) {
                            double acc = 0.0;
                            for (int64_t i = 0; i < hw; ++i)
                                acc += in[(b * c + ch) * hw + i] - p_in.zero_point;
                            out[b * c + ch] =
                                clamp_fq(fq_requant(acc, rs) + p_out.zero_point, p_out);
                        }
                    break;
                }
                default:
                    throw std::logic_error("unhandled kind in fakequant executor");
            }
        }
        edges[node.id] = std::move(out);
    }

    const QuantParams& p_out = qm.params_of(qm.graph.output_id);
    const std::vector<double>& q_out = edges.at(qm.graph.output_id);
    Tensor result(shapes.at(qm.graph.output_id), Layout::NCHW);
    for (size_t i = 0; i < q_out.size(); ++i)
        result.data[i] = static_cast<float>((q_out[i] - p_out.zero_point) * p_out.scale);
    return result;
}

}  // namespace subtq
