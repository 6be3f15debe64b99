// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>

#include "subtq/calib.hpp"
#include "subtq/model.hpp"
#include "subtq/quant.hpp"

namespace subtq {

/// Quantized model: graph topology plus int8 weights, int32 biases at scale
/// s_input * s_weight, and affine params for every activation edge.
struct QModel {
    Model graph;  // weights hold the dequantized values, for shape inference only
    std::map<std::string, QTensor> weights;
    std::map<std::string, std::vector<int32_t>> biases;  // every weighted node
    std::map<std::string, QuantParams> edge_params;      // node id -> output edge
    QuantParams input_params;                            // graph input edge

    const QuantParams& params_of(const std::string& edge_id) const {
        if (edge_id == kGraphInput) return input_params;
        return edge_params.at(edge_id);
    }
};

struct QuantizeOptions {
    int bits = 8;
    std::optional<double> percentile;  // e.g. 0.9999; empty = plain min/max
};

/// Builds a per-tensor asymmetric QModel from a float model and calibration
/// stats covering every edge. Weighted nodes without a float bias get a zero
/// int32 bias so that bias correction has a target.
QModel build_qmodel(const Model& model, const CalibrationStats& stats,
                    const QuantizeOptions& opts = {});

/// Input scale of a weighted node (params of its single input edge).
double input_scale_of(const QModel& qm, const Node& node);

}  // namespace subtq
