// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/qmodel.hpp"

#include <stdexcept>

namespace subtq {

double input_scale_of(const QModel& qm, const Node& node) {
    return qm.params_of(node.inputs.at(0)).scale;
}

QModel build_qmodel(const Model& model, const CalibrationStats& stats,
                    const QuantizeOptions& opts) {
    QModel qm;
    qm.graph = model;

    auto edge_params = [&](const std::string& id) {
        auto it = stats.edges.find(id);
        if (it == stats.edges.end())
            throw std::runtime_error("build_qmodel: no calibration stats for edge '" +
                                     id + "'");
        auto [lo, hi] = stats_range(it->second, opts.percentile);
        return compute_qparams(lo, hi, opts.bits);
    };

    qm.input_params = edge_params(kGraphInput);
    for (const Node& node : model.nodes) qm.edge_params[node.id] = edge_params(node.id);

    for (Node& node : qm.graph.nodes) {
        if (!node.has_weight_kind()) continue;
        const Tensor& w = *node.weight;
        double lo = 0.0, hi = 0.0;
        for (float v : w.data) {
            lo = std::min<double>(lo, v);
            hi = std::max<double>(hi, v);
        }
        QuantParams p_w = compute_qparams(lo, hi, opts.bits);
        QTensor qw = quantize(w, p_w);
        double s_in = qm.params_of(node.inputs[0]).scale;
        double bias_scale = s_in * p_w.scale;

        int64_t out_c = qw.dims[0];
        std::vector<int32_t> qbias(static_cast<size_t>(out_c), 0);
        if (node.bias)
            for (int64_t c = 0; c < out_c; ++c)
                qbias[c] = static_cast<int32_t>(std::clamp<int64_t>(
                    round_away(node.bias->data[c] / bias_scale), INT32_MIN, INT32_MAX));

        // The graph keeps the dequantized weight so that reports and shape
        // inference see exactly what the integer executor computes with.
        node.weight = dequantize(qw);
        if (node.bias)
            for (int64_t c = 0; c < out_c; ++c)
                node.bias->data[c] = static_cast<float>(qbias[c] * bias_scale);

        qm.weights[node.id] = std::move(qw);
        qm.biases[node.id] = std::move(qbias);
    }
    return qm;
}

}  // namespace subtq
