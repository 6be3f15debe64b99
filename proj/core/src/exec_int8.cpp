// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "subtq/exec.hpp"

namespace subtq {

RequantSpec RequantSpec::from_multiplier(double m) {
    if (!(m > 0) || !std::isfinite(m))
        throw std::invalid_argument("RequantSpec: multiplier must be positive finite");
    int exp = 0;
    double frac = std::frexp(m, &exp);  // m = frac * 2^exp, frac in [0.5, 1)
    int64_t mant = std::llround(frac * 2147483648.0);  // 2^31
    if (mant == (int64_t{1} << 31)) {
        mant >>= 1;
        exp += 1;
    }
    RequantSpec rs;
    rs.mantissa = static_cast<int32_t>(mant);
    rs.shift = 31 - exp;
    if (rs.shift < 1 || rs.shift > 62)
        throw std::invalid_argument("RequantSpec: multiplier out of range");
    return rs;
}

double RequantSpec::as_double() const {
    return static_cast<double>(mantissa) * std::ldexp(1.0, -shift);
}

int64_t RequantSpec::apply(int64_t value) const {
    int64_t prod = value * mantissa;
    int64_t half = int64_t{1} << (shift - 1);
    if (prod >= 0) return (prod + half) >> shift;
    return -((-prod + half) >> shift);
}

int64_t OpCounts::total_macs() const {
    int64_t t = 0;
    for (const auto& [id, n] : macs) t += n;
    return t;
}

std::string OpCounts::to_json() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    std::map<std::string, bool> all;
    for (const auto& [id, n] : macs) all[id] = true;
    for (const auto& [id, n] : requants) all[id] = true;
    for (const auto& [id, n] : adds) all[id] = true;
    auto get = [](const std::map<std::string, int64_t>& m, const std::string& id) {
        auto it = m.find(id);
        return it == m.end() ? int64_t{0} : it->second;
    };
    for (const auto& [id, _] : all) {
        if (!first) os << ",";
        first = false;
        os << "\"" << id << "\":{\"macs\":" << get(macs, id)
           << ",\"requants\":" << get(requants, id) << ",\"adds\":" << get(adds, id)
           << "}";
    }
    os << "}";
    return os.str();
}

namespace {

constexpr int64_t kInt32Min = -2147483648LL;
constexpr int64_t kInt32Max = 2147483647LL;

int64_t checked_i32(int64_t v, const std::string& where) {
    if (v < kInt32Min || v > kInt32Max)
        throw std::runtime_error("int32 accumulator overflow at " + where);
    return v;
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

int8_t clamp_q(int64_t q, const QuantParams& p) {
    return static_cast<int8_t>(std::clamp<int64_t>(q, p.qmin, p.qmax));
}

struct Int8Exec {
    const QModel& qm;
    OpCounts* counts;
    std::map<std::string, std::vector<double>>* acc_out;
    std::map<std::string, std::vector<int64_t>> shapes;
    std::map<std::string, std::vector<int8_t>> edges;
    std::vector<int8_t> input_q;

    const std::vector<int8_t>& edge(const std::string& id) const {
        return id == kGraphInput ? input_q : edges.at(id);
    }

    void count(std::map<std::string, int64_t> OpCounts::* field,
               const std::string& id, int64_t n) {
        if (counts) (counts->*field)[id] += n;
    }

    void weighted_node(const Node& node) {
        const QTensor& w = qm.weights.at(node.id);
        const std::vector<int32_t>& bias = qm.biases.at(node.id);
        const QuantParams& p_in = qm.params_of(node.inputs[0]);
        const QuantParams& p_w = w.params.at(0);
        const QuantParams& p_out = qm.params_of(node.id);
        const std::vector<int8_t>& in = edge(node.inputs[0]);
        const auto& in_shape =
            node.inputs[0] == kGraphInput ? qm.graph.input_shape : shapes.at(node.inputs[0]);
        const auto& out_shape = shapes.at(node.id);

        RequantSpec rs =
            RequantSpec::from_multiplier(p_in.scale * p_w.scale / p_out.scale);
        double acc_scale = p_in.scale * p_w.scale;
        std::vector<int8_t> out(shape_numel(out_shape));
        std::vector<double>* accs = nullptr;
        if (acc_out) {
            accs = &(*acc_out)[node.id];
            accs->resize(out.size());
        }
        int32_t zp_in = p_in.zero_point, zp_w = p_w.zero_point;

        auto emit = [&](size_t idx, int64_t acc_products, int64_t b) {
            int64_t acc = checked_i32(checked_i32(acc_products, node.id) + b, node.id);
            if (accs) (*accs)[idx] = static_cast<double>(acc) * acc_scale;
            out[idx] = clamp_q(rs.apply(acc) + p_out.zero_point, p_out);
        };

        if (node.kind == NodeKind::Dense) {
            int64_t n = in_shape[0];
            int64_t out_f = w.dims[0], in_f = w.dims[1];
            for (int64_t b = 0; b < n; ++b)
                for (int64_t o = 0; o < out_f; ++o) {
                    int64_t acc = 0;
                    for (int64_t i = 0; i < in_f; ++i)
                        acc += static_cast<int64_t>(in[b * in_f + i] - zp_in) *
                               (w.data[o * in_f + i] - zp_w);
                    emit(b * out_f + o, acc, bias[o]);
                }
        } else if (node.kind == NodeKind::DepthwiseConv2D) {
            int64_t n = in_shape[0], ic = in_shape[1], ih = in_shape[2], iw = in_shape[3];
            int64_t kh = w.dims[2], kw = w.dims[3];
            int64_t oh = out_shape[2], ow = out_shape[3];
            PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);
            for (int64_t b = 0; b < n; ++b)
                for (int64_t c = 0; c < ic; ++c)
                    for (int64_t y = 0; y < oh; ++y)
                        for (int64_t x = 0; x < ow; ++x) {
                            int64_t acc = 0;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                int64_t sy = y * node.stride + ky - p.top;
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    int64_t sx = x * node.stride + kx - p.left;
                                    // zero padding contributes q = zp_in, i.e. 0
                                    if (sy < 0 || sy >= ih || sx < 0 || sx >= iw) continue;
                                    acc += static_cast<int64_t>(
                                               in[((b * ic + c) * ih + sy) * iw + sx] -
                                               zp_in) *
                                           (w.data[(c * kh + ky) * kw + kx] - zp_w);
                                }
                            }
                            emit(((b * ic + c) * oh + y) * ow + x, acc, bias[c]);
                        }
        } else {  // Conv2D
            int64_t n = in_shape[0], ic = in_shape[1], ih = in_shape[2], iw = in_shape[3];
            int64_t oc = w.dims[0], cg = w.dims[1], kh = w.dims[2], kw = w.dims[3];
            int64_t oh = out_shape[2], ow = out_shape[3];
            int64_t oc_per_group = oc / node.groups;
            PadInfo p = pad_offsets(node, ih, iw, kh, kw, oh, ow);
            for (int64_t b = 0; b < n; ++b)
                for (int64_t o = 0; o < oc; ++o) {
                    int64_t g = o / oc_per_group;
                    for (int64_t y = 0; y < oh; ++y)
                        for (int64_t x = 0; x < ow; ++x) {
                            int64_t acc = 0;
                            for (int64_t c = 0; c < cg; ++c) {
                                int64_t in_c = g * cg + c;
                                for (int64_t ky = 0; ky < kh; ++ky) {
                                    int64_t sy = y * node.stride + ky - p.top;
                                    if (sy < 0 || sy >= ih) continue;
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        int64_t sx = x * node.stride + kx - p.left;
                                        if (sx < 0 || sx >= iw) continue;
                                        acc +=
                                            static_cast<int64_t>(
                                                in[((b * ic + in_c) * ih + sy) * iw + sx] -
                                                zp_in) *
                                            (w.data[((o * cg + c) * kh + ky) * kw + kx] -
                                             zp_w);
                                    }
                                }
                            }
                            emit(((b * oc + o) * oh + y) * ow + x, acc, bias[o]);
                        }
                }
        }
        count(&OpCounts::macs, node.id,
              node_macs(node, shapes, qm.graph.input_shape));
        count(&OpCounts::requants, node.id, static_cast<int64_t>(out.size()));
        edges[node.id] = std::move(out);
    }

    // Requantize one int8 value from p_in to p_out.
    static int8_t requant_value(int8_t q, const QuantParams& p_in,
                                const QuantParams& p_out, const RequantSpec& rs) {
        return clamp_q(rs.apply(q - p_in.zero_point) + p_out.zero_point, p_out);
    }

    void run_node(const Node& node) {
        if (node.has_weight_kind()) {
            weighted_node(node);
            return;
        }
        const QuantParams& p_in = qm.params_of(node.inputs[0]);
        const QuantParams& p_out = qm.params_of(node.id);
        const std::vector<int8_t>& in = edge(node.inputs[0]);
        std::vector<int8_t> out(in.size());

        switch (node.kind) {
            case NodeKind::ReLU:
            case NodeKind::ReLU6: {
                RequantSpec rs = RequantSpec::from_multiplier(p_in.scale / p_out.scale);
                int8_t lo = static_cast<int8_t>(p_out.zero_point);
                int8_t hi = node.kind == NodeKind::ReLU6
                                ? clamp_q(round_away(6.0 / p_out.scale) + p_out.zero_point,
                                          p_out)
                                : static_cast<int8_t>(p_out.qmax);
                for (size_t i = 0; i < in.size(); ++i) {
                    int8_t q = requant_value(in[i], p_in, p_out, rs);
                    out[i] = std::clamp(q, lo, hi);
                }
                count(&OpCounts::requants, node.id, static_cast<int64_t>(in.size()));
                break;
            }
            case NodeKind::Add: {
                const QuantParams& p_b = qm.params_of(node.inputs[1]);
                const std::vector<int8_t>& rhs = edge(node.inputs[1]);
                RequantSpec rs_a = RequantSpec::from_multiplier(p_in.scale / p_out.scale);
                RequantSpec rs_b = RequantSpec::from_multiplier(p_b.scale / p_out.scale);
                for (size_t i = 0; i < in.size(); ++i) {
                    int64_t a = requant_value(in[i], p_in, p_out, rs_a);
                    int64_t b = requant_value(rhs[i], p_b, p_out, rs_b);
                    out[i] = clamp_q(a + b - p_out.zero_point, p_out);
                }
                count(&OpCounts::requants, node.id, 2 * static_cast<int64_t>(in.size()));
                count(&OpCounts::adds, node.id, static_cast<int64_t>(in.size()));
                break;
            }
            case NodeKind::GlobalAvgPool: {
                const auto& in_shape = shapes.at(node.inputs[0]);
                int64_t n = in_shape[0], c = in_shape[1], hw = in_shape[2] * in_shape[3];
                RequantSpec rs = RequantSpec::from_multiplier(
                    p_in.scale / (p_out.scale * static_cast<double>(hw)));
                out.resize(static_cast<size_t>(n * c));
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t ch = 0; ch < c; ++ch) {
                        int64_t acc = 0;
                        for (int64_t i = 0; i < hw; ++i)
                            acc += in[(b * c + ch) * hw + i] - p_in.zero_point;
                        out[b * c + ch] =
                            clamp_q(rs.apply(checked_i32(acc, node.id)) + p_out.zero_point,
                                    p_out);
                    }
                count(&OpCounts::requants, node.id, n * c);
                break;
            }
            default:
                throw std::logic_error("unhandled kind in int8 executor");
        }
        edges[node.id] = std::move(out);
    }
};

}  // namespace

Tensor run_int8(const QModel& qm, const Tensor& input, OpCounts* counts,
                std::map<std::string, std::vector<double>>* acc_out) {
    if (input.dims != qm.graph.input_shape)
        throw std::invalid_argument("run_int8: input shape mismatch");
    Int8Exec ex{qm, counts, acc_out, infer_shapes(qm.graph), {}, {}};

    const QuantParams& p_in = qm.input_params;
    ex.input_q.resize(input.data.size());
    for (size_t i = 0; i < input.data.size(); ++i)
        ex.input_q[i] = static_cast<int8_t>(quantize_value(input.data[i], p_in));

    for (const Node& node : qm.graph.nodes) ex.run_node(node);

    const QuantParams& p_out = qm.params_of(qm.graph.output_id);
    const std::vector<int8_t>& q_out = ex.edges.at(qm.graph.output_id);
    Tensor result(ex.shapes.at(qm.graph.output_id), Layout::NCHW);
    for (size_t i = 0; i < q_out.size(); ++i)
        result.data[i] = static_cast<float>(dequantize_value(q_out[i], p_out));
    return result;
}

}  // namespace subtq
