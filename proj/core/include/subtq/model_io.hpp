// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "subtq/model.hpp"
#include "subtq/qmodel.hpp"

namespace subtq {

/// Loads and validates a float model directory (manifest.json + tensors.bin,
/// format_version 1). Throws on I/O, parse, or validation failure.
Model load_model(const std::filesystem::path& dir);

/// Saves a float model. load_model(save_model(m)) reproduces m bit-exactly.
void save_model(const Model& model, const std::filesystem::path& dir);

/// Quantized model directory, format_version 2 (int8/int32 tensors, quant
/// blocks per tensor, edge_quant table).
QModel load_qmodel(const std::filesystem::path& dir);
void save_qmodel(const QModel& qm, const std::filesystem::path& dir);

/// True if the directory holds a format_version 2 (quantized) manifest.
bool is_qmodel_dir(const std::filesystem::path& dir);

/// Calibration set: calib_manifest.json listing raw binary32 sample files.
std::vector<Tensor> load_calibration_set(const std::filesystem::path& dir);
void save_calibration_set(const std::vector<Tensor>& samples,
                          const std::filesystem::path& dir);

}  // namespace subtq
