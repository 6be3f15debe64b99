// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subtq/model.hpp"

namespace subtq {

inline constexpr int kHistogramBins = 2048;

/// Observed float range for one activation edge.
struct EdgeStats {
    double min = 0.0;
    double max = 0.0;
    int64_t count = 0;
    std::vector<int64_t> histogram;  // kHistogramBins bins over [min, max], or empty

    void merge(const EdgeStats& o);
};

/// Per-edge activation statistics, keyed by node id (plus the graph input edge).
struct CalibrationStats {
    std::map<std::string, EdgeStats> edges;

    void merge(const CalibrationStats& o);
};

/// Runs the FP32 executor over every sample and records per-edge min/max.
/// With `with_histogram` a second pass fills 2048-bin histograms.
CalibrationStats calibrate(const Model& model, const std::vector<Tensor>& samples,
                           bool with_histogram = false);

/// Range for quantization: plain min/max, or a two-sided percentile of the
/// histogram (e.g. 0.9999) when requested.
std::pair<double, double> stats_range(const EdgeStats& s,
                                      std::optional<double> percentile = {});

std::string stats_to_json(const CalibrationStats& stats);
CalibrationStats stats_from_json(const std::string& text);

}  // namespace subtq
