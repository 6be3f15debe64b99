// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "subtq/tensor.hpp"

namespace subtq {

/// Raised when a structurally parseable model violates graph invariants.
/// Kept distinct from plain runtime errors so callers can report validation
/// diagnostics differently from I/O or parse failures.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reserved id for the graph input edge.
inline constexpr const char* kGraphInput = "input";

enum class NodeKind {
    Conv2D,
    DepthwiseConv2D,
    Dense,
    ReLU,
    ReLU6,
    Add,
    GlobalAvgPool,
};

std::string kind_name(NodeKind k);
NodeKind kind_from_name(const std::string& name);

enum class PadMode { Same, Valid };

std::string pad_name(PadMode p);
PadMode pad_from_name(const std::string& name);

struct Node {
    std::string id;
    NodeKind kind = NodeKind::ReLU;
    std::vector<std::string> inputs;  // node ids or kGraphInput

    // Conv2D / DepthwiseConv2D attrs
    int stride = 1;
    PadMode pad = PadMode::Valid;
    int groups = 1;

    // Marks the outlier branch produced by the subtensor split pass.
    bool outlier = false;

    std::optional<Tensor> weight;
    std::optional<Tensor> bias;

    bool has_weight_kind() const {
        return kind == NodeKind::Conv2D || kind == NodeKind::DepthwiseConv2D ||
               kind == NodeKind::Dense;
    }

    bool operator==(const Node& o) const = default;
};

/// DAG of nodes in topological order; single graph input, single output.
struct Model {
    std::vector<Node> nodes;
    std::vector<int64_t> input_shape;
    std::string output_id;

    const Node* find(const std::string& id) const;
    Node* find(const std::string& id);

    int64_t param_count() const;

    bool operator==(const Model& o) const = default;
};

/// Returns empty list iff all invariants hold and shape inference succeeds.
std::vector<std::string> validate(const Model& model);

/// Shape of every node's output edge, keyed by node id. Throws on invalid model.
std::map<std::string, std::vector<int64_t>> infer_shapes(const Model& model);

/// Output shape of a single node given its input shapes. Throws on mismatch.
std::vector<int64_t> infer_node_shape(const Node& node,
                                      const std::vector<std::vector<int64_t>>& in_shapes);

/// Multiply-accumulate count of one weighted node (0 for others).
int64_t node_macs(const Node& node,
                  const std::map<std::string, std::vector<int64_t>>& shapes,
                  const std::vector<int64_t>& input_shape);

/// Total MACs of the model.
int64_t model_macs(const Model& model);

}  // namespace subtq
