// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

// Cross-layer equalization and weight clipping, plus shared pass helpers.

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "subtq/passes.hpp"
#include "subtq/quant.hpp"

namespace subtq {

std::string pass_name(PassKind k) {
    switch (k) {
        case PassKind::CrossLayerEqualize: return "cle";
        case PassKind::ClipWeights: return "clip";
        case PassKind::SplitSubtensors: return "split";
        case PassKind::BiasCorrect: return "bias";
    }
    throw std::logic_error("bad pass");
}

PassKind pass_from_name(const std::string& name) {
    if (name == "cle") return PassKind::CrossLayerEqualize;
    if (name == "clip") return PassKind::ClipWeights;
    if (name == "split") return PassKind::SplitSubtensors;
    if (name == "bias") return PassKind::BiasCorrect;
    throw std::runtime_error("unknown pass: " + name);
}

bool PassConfig::enabled(PassKind k) const {
    return std::find(passes.begin(), passes.end(), k) != passes.end();
}

std::string reports_to_json(const std::vector<PassReport>& reports,
                            bool include_timing) {
    nlohmann::json out = nlohmann::json::array();
    for (const PassReport& r : reports) {
        nlohmann::json j;
        j["pass"] = r.pass;
        j["nodes_touched"] = r.nodes_touched;
        j["mse_before"] = r.mse_before;
        j["mse_after"] = r.mse_after;
        j["param_count_delta"] = r.param_count_delta;
        if (include_timing) j["wall_time_ms"] = r.wall_time_ms;
        if (!r.outlier_nnz.empty()) {
            j["outlier_nnz"] = r.outlier_nnz;
            j["sparse_projected_extra_bytes"] = r.sparse_projected_extra_bytes;
        }
        out.push_back(std::move(j));
    }
    return out.dump(2) + "\n";
}

namespace detail {

QuantParams weight_qparams(const Tensor& w, int bits) {
    double lo = 0.0, hi = 0.0;
    for (float v : w.data) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
    }
    return compute_qparams(lo, hi, bits);
}

double per_tensor_sse(const Tensor& w, int bits) {
    return quantization_sse(w, weight_qparams(w, bits));
}

}  // namespace detail

namespace {

// Iterates elements of channel slice `c` along `axis`.
template <typename Fn>
void for_channel(Tensor& t, int axis, int64_t c, Fn&& fn) {
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= t.dims[i];
    for (size_t i = axis + 1; i < t.dims.size(); ++i) inner *= t.dims[i];
    int64_t axis_dim = t.dims[axis];
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i)
            fn(t.data[(o * axis_dim + c) * inner + i]);
}

int out_channel_axis(const Node&) { return 0; }

// In-channel axis of a consumer, or -1 when the kind/attrs make per-channel
// scaling inapplicable.
int in_channel_axis(const Node& n, int64_t producer_channels) {
    switch (n.kind) {
        case NodeKind::Conv2D:
            return n.groups == 1 && n.weight->dims[1] == producer_channels ? 1 : -1;
        case NodeKind::DepthwiseConv2D:
            return n.weight->dims[0] == producer_channels ? 0 : -1;
        case NodeKind::Dense:
            return n.weight->dims[1] == producer_channels ? 1 : -1;
        default:
            return -1;
    }
}

struct ClePair {
    std::string first, second;  // weighted node ids
};

std::vector<ClePair> find_cle_pairs(const Model& model, const CalibrationStats* stats) {
    std::map<std::string, std::vector<const Node*>> consumers;
    for (const Node& n : model.nodes)
        for (const std::string& in : n.inputs) consumers[in].push_back(&n);

    std::vector<ClePair> pairs;
    for (const Node& a : model.nodes) {
        if (!a.has_weight_kind() || a.id == model.output_id) continue;
        auto cit = consumers.find(a.id);
        if (cit == consumers.end() || cit->second.size() != 1) continue;
        const Node* x = cit->second[0];

        const Node* b = nullptr;
        if (x->kind == NodeKind::ReLU || x->kind == NodeKind::ReLU6) {
            if (x->kind == NodeKind::ReLU6) {
                // Clipping at 6 breaks positive homogeneity unless inactive.
                if (!stats) continue;
                auto sit = stats->edges.find(a.id);
                if (sit == stats->edges.end() || sit->second.max >= 6.0) continue;
            }
            if (x->id == model.output_id) continue;
            auto xit = consumers.find(x->id);
            if (xit == consumers.end() || xit->second.size() != 1) continue;
            b = xit->second[0];
        } else {
            b = x;
        }
        if (!b->has_weight_kind()) continue;
        pairs.push_back({a.id, b->id});
    }
    return pairs;
}

double max_abs_channel(Tensor& t, int axis, int64_t c) {
    double m = 0.0;
    for_channel(t, axis, c, [&](float& v) { m = std::max<double>(m, std::fabs(v)); });
    return m;
}

}  // namespace

std::pair<Model, PassReport> cross_layer_equalize(const Model& model,
                                                  const CalibrationStats* stats) {
    Model out = model;
    PassReport report;
    report.pass = pass_name(PassKind::CrossLayerEqualize);

    auto pairs = find_cle_pairs(out, stats);
    std::map<std::string, bool> touched;
    for (const ClePair& p : pairs) {
        for (const std::string& id : {p.first, p.second})
            if (!touched.count(id)) {
                touched[id] = true;
                report.mse_before[id] =
                    detail::per_tensor_sse(*out.find(id)->weight, 8);
            }
    }

    constexpr int kMaxSweeps = 100;
    constexpr double kTol = 1e-10;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_dev = 0.0;
        for (const ClePair& p : pairs) {
            Node& a = *out.find(p.first);
            Node& b = *out.find(p.second);
            int a_axis = out_channel_axis(a);
            int b_axis = in_channel_axis(b, a.weight->dims[0]);
            if (b_axis < 0) continue;
            int64_t channels = a.weight->dims[0];
            for (int64_t c = 0; c < channels; ++c) {
                double r1 = max_abs_channel(*a.weight, a_axis, c);
                double r2 = max_abs_channel(*b.weight, b_axis, c);
                if (r1 <= 0.0 || r2 <= 0.0) continue;
                double s = std::sqrt(r1 / r2);
                max_dev = std::max(max_dev, std::fabs(s - 1.0));
                for_channel(*a.weight, a_axis, c,
                            [&](float& v) { v = static_cast<float>(v / s); });
                if (a.bias)
                    a.bias->data[c] = static_cast<float>(a.bias->data[c] / s);
                for_channel(*b.weight, b_axis, c,
                            [&](float& v) { v = static_cast<float>(v * s); });
            }
        }
        if (max_dev < kTol) break;
    }

    for (const auto& [id, _] : touched) {
        report.nodes_touched.push_back(id);
        report.mse_after[id] = detail::per_tensor_sse(*out.find(id)->weight, 8);
    }
    return {std::move(out), std::move(report)};
}

std::pair<Model, PassReport> clip_weights(const Model& model, const PassConfig& cfg) {
    Model out = model;
    PassReport report;
    report.pass = pass_name(PassKind::ClipWeights);

    for (Node& node : out.nodes) {
        if (!node.has_weight_kind()) continue;
        Tensor& w = *node.weight;
        double m = 0.0;
        for (float v : w.data) m = std::max<double>(m, std::fabs(v));
        double unclipped_sse = detail::per_tensor_sse(w, cfg.bits);
        report.mse_before[node.id] = unclipped_sse;
        if (m == 0.0) {
            report.mse_after[node.id] = 0.0;
            continue;
        }

        double best_c = m;
        double best_sse = unclipped_sse;
        for (int k = 1; k < cfg.clip_grid; ++k) {
            double c = m * static_cast<double>(k) / cfg.clip_grid;
            double lo = 0.0, hi = 0.0;
            for (float v : w.data) {
                double x = std::clamp<double>(v, -c, c);
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            QuantParams p = compute_qparams(lo, hi, cfg.bits);
            double sse = 0.0;
            for (float v : w.data) {
                double x = std::clamp<double>(v, -c, c);
                double err = v - dequantize_value(quantize_value(x, p), p);
                sse += err * err;
            }
            if (sse < best_sse) {
                best_sse = sse;
                best_c = c;
            }
        }

        report.mse_after[node.id] = best_sse;
        if (best_c < m) {
            for (float& v : w.data)
                v = static_cast<float>(std::clamp<double>(v, -best_c, best_c));
            report.nodes_touched.push_back(node.id);
        }
    }
    return {std::move(out), std::move(report)};
}

}  // namespace subtq
