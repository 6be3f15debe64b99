// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subtq/calib.hpp"
#include "subtq/model.hpp"
#include "subtq/qmodel.hpp"

namespace subtq {

enum class PassKind { CrossLayerEqualize, ClipWeights, SplitSubtensors, BiasCorrect };

std::string pass_name(PassKind k);
PassKind pass_from_name(const std::string& name);

struct PassConfig {
    std::vector<PassKind> passes = {PassKind::CrossLayerEqualize, PassKind::ClipWeights,
                                    PassKind::SplitSubtensors, PassKind::BiasCorrect};
    int max_splits_per_tensor = 2;
    double outlier_budget_fraction = 0.05;
    double min_mse_gain = 2.0;
    int clip_grid = 100;
    int bias_sample_cap = 64;
    int bits = 8;
    std::optional<double> percentile;

    bool enabled(PassKind k) const;
};

struct PassReport {
    std::string pass;
    std::vector<std::string> nodes_touched;
    // Per-tensor quantization MSE (sum of squared error) before/after; for
    // bias correction these hold squared norms of per-channel mean error.
    std::map<std::string, double> mse_before;
    std::map<std::string, double> mse_after;
    int64_t param_count_delta = 0;
    double wall_time_ms = 0.0;
    // Split accounting
    std::map<std::string, int64_t> outlier_nnz;
    int64_t sparse_projected_extra_bytes = 0;
};

/// Emits pass reports as JSON. Timing is excluded by default so that report
/// files are byte-stable across runs.
std::string reports_to_json(const std::vector<PassReport>& reports,
                            bool include_timing = false);

/// Rescales shared channels of adjacent weighted layers (positively
/// homogeneous activation between them) so their per-channel max-abs ranges
/// match; iterates to convergence. ReLU6 pairs are treated only when `stats`
/// shows the pre-activation max below 6.
std::pair<Model, PassReport> cross_layer_equalize(const Model& model,
                                                  const CalibrationStats* stats = nullptr);

/// Per-tensor symmetric clip threshold search minimizing quantization MSE
/// against the unclipped weights; clips in place when it helps.
std::pair<Model, PassReport> clip_weights(const Model& model, const PassConfig& cfg);

/// Additive magnitude partition of weight tensors into a core and an outlier
/// subtensor merged by an Add node; applied when the pair quantization MSE
/// beats the per-tensor MSE by at least cfg.min_mse_gain.
std::pair<Model, PassReport> split_subtensors(const Model& model, const PassConfig& cfg);

/// Adds the observed per-output-channel mean activation error (FP32 reference
/// minus dequantized integer accumulator) into each node's int32 bias,
/// walking nodes in topological order.
std::pair<QModel, PassReport> bias_correct(const Model& model_fp32, QModel model_q,
                                           const std::vector<Tensor>& calib,
                                           const PassConfig& cfg);

/// Full preparation pipeline: float passes in configured order, then QModel
/// construction from calibration stats, then bias correction.
std::pair<QModel, std::vector<PassReport>> run_pipeline(const Model& model,
                                                        const std::vector<Tensor>& calib,
                                                        const PassConfig& cfg);

}  // namespace subtq
