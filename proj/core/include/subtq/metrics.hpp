// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subtq/exec.hpp"
#include "subtq/model.hpp"
#include "subtq/qmodel.hpp"

namespace subtq {

/// 10*log10(sum(ref^2) / sum((ref-test)^2)); +inf when identical.
/// Throws on dims mismatch or an all-zero reference with nonzero test.
double sqnr_db(const Tensor& reference, const Tensor& test);

/// Exact byte accounting. Dense widths: 4 bytes per FP32 param, 1 per int8
/// weight, 4 per int32 bias, plus 8 bytes of QuantParams per quantized weight
/// tensor. The sparse projection stores outlier-branch weights as
/// (1 value byte + 4 index bytes) per nonzero.
struct SizeReport {
    int64_t fp32_bytes = 0;
    int64_t dense_bytes = 0;
    int64_t baseline_bytes = 0;  // dense bytes excluding outlier branches
    int64_t outlier_extra_bytes = 0;
    int64_t sparse_projected_bytes = 0;  // baseline + outlier_extra
};

SizeReport size_report(const Model& model);
SizeReport size_report(const QModel& qm);

struct VariantMetrics {
    std::string name;
    double sqnr_db = 0.0;  // +inf sentinel serialized as "inf"
    double mse = 0.0;
    double cosine = 0.0;
    double top1_agreement = 0.0;  // vs FP32 argmax
    std::optional<double> label_accuracy;
    SizeReport size;
    int64_t macs = 0;
    int64_t outlier_macs = 0;
    double mac_overhead = 0.0;           // (macs - baseline) / baseline
    double sparse_size_overhead = 0.0;   // outlier_extra / baseline_bytes
};

struct EvalReport {
    int report_version = 1;
    int64_t baseline_macs = 0;
    int64_t baseline_fp32_bytes = 0;
    int64_t num_inputs = 0;
    std::vector<VariantMetrics> variants;

    std::string to_json() const;
    std::string to_csv() const;
    static EvalReport from_json(const std::string& text);
};

/// Runs the FP32 reference and every variant on all inputs; aggregates error
/// metrics, agreement, size, and compute-overhead ratios.
EvalReport evaluate(const Model& fp32,
                    const std::vector<std::pair<std::string, const QModel*>>& variants,
                    const std::vector<Tensor>& inputs,
                    const std::vector<int>* labels = nullptr);

/// MACs attributable to outlier branches of a split model.
int64_t outlier_branch_macs(const Model& model);

}  // namespace subtq
