// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "subtq/model.hpp"
#include "subtq/qmodel.hpp"

namespace subtq {

/// Fixed-point realization of a positive real multiplier M as
/// mantissa * 2^-shift with mantissa in [2^30, 2^31).
struct RequantSpec {
    int32_t mantissa = 0;
    int shift = 0;  // right shift applied after the mantissa multiply

    static RequantSpec from_multiplier(double m);
    double as_double() const;

    /// Rounds value * M half away from zero, in pure integer arithmetic.
    int64_t apply(int64_t value) const;
};

/// Per-node integer operation counts.
struct OpCounts {
    std::map<std::string, int64_t> macs;
    std::map<std::string, int64_t> requants;
    std::map<std::string, int64_t> adds;

    int64_t total_macs() const;
    std::string to_json() const;
};

/// FP32 reference executor. FP64 accumulation in conv/dense, narrowed to FP32.
/// When `edge_out` is non-null, every node's output tensor is recorded.
Tensor run_fp32(const Model& model, const Tensor& input,
                std::map<std::string, Tensor>* edge_out = nullptr);

/// Bit-exact int8 executor with int32 accumulation and fixed-point
/// requantization. When `acc_out` is non-null, the dequantized accumulator
/// (acc + bias, at scale s_in * s_w) of every weighted node is recorded.
Tensor run_int8(const QModel& qm, const Tensor& input, OpCounts* counts = nullptr,
                std::map<std::string, std::vector<double>>* acc_out = nullptr);

/// Fake-quantization executor: same integer semantics carried in FP64
/// (values stay exact integers), independent requantization arithmetic.
/// Verification oracle for run_int8; agrees with it bit-exactly.
Tensor run_fakequant(const QModel& qm, const Tensor& input,
                     std::map<std::string, std::vector<double>>* acc_out = nullptr);

}  // namespace subtq
