// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace subtq {

std::string layout_name(Layout l) {
    switch (l) {
        case Layout::NCHW: return "NCHW";
        case Layout::OIHW: return "OIHW";
        case Layout::C1HW: return "C1HW";
        case Layout::OI: return "OI";
        case Layout::C: return "C";
    }
    throw std::logic_error("bad layout");
}

Layout layout_from_name(const std::string& name) {
    if (name == "NCHW") return Layout::NCHW;
    if (name == "OIHW") return Layout::OIHW;
    if (name == "C1HW") return Layout::C1HW;
    if (name == "OI") return Layout::OI;
    if (name == "C") return Layout::C;
    throw std::runtime_error("unknown layout: " + name);
}

std::string shape_str(const std::vector<int64_t>& dims) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << "]";
    return os.str();
}

std::string kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Conv2D: return "Conv2D";
        case NodeKind::DepthwiseConv2D: return "DepthwiseConv2D";
        case NodeKind::Dense: return "Dense";
        case NodeKind::ReLU: return "ReLU";
        case NodeKind::ReLU6: return "ReLU6";
        case NodeKind::Add: return "Add";
        case NodeKind::GlobalAvgPool: return "GlobalAvgPool";
    }
    throw std::logic_error("bad kind");
}

NodeKind kind_from_name(const std::string& name) {
    if (name == "Conv2D") return NodeKind::Conv2D;
    if (name == "DepthwiseConv2D") return NodeKind::DepthwiseConv2D;
    if (name == "Dense") return NodeKind::Dense;
    if (name == "ReLU") return NodeKind::ReLU;
    if (name == "ReLU6") return NodeKind::ReLU6;
    if (name == "Add") return NodeKind::Add;
    if (name == "GlobalAvgPool") return NodeKind::GlobalAvgPool;
    throw std::runtime_error("unknown node kind: " + name);
}

std::string pad_name(PadMode p) { return p == PadMode::Same ? "same" : "valid"; }

PadMode pad_from_name(const std::string& name) {
    if (name == "same") return PadMode::Same;
    if (name == "valid") return PadMode::Valid;
    throw std::runtime_error("unknown pad mode: " + name);
}

const Node* Model::find(const std::string& id) const {
    for (const Node& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

Node* Model::find(const std::string& id) {
    for (Node& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for (const Node& node : nodes) {
        if (node.weight) n += node.weight->numel();
        if (node.bias) n += node.bias->numel();
    }
    return n;
}

namespace {

int64_t conv_out_dim(int64_t in, int64_t k, int stride, PadMode pad) {
    if (pad == PadMode::Same) return (in + stride - 1) / stride;
    return (in - k) / stride + 1;
}

}  // namespace

std::vector<int64_t> infer_node_shape(const Node& node,
                                      const std::vector<std::vector<int64_t>>& in_shapes) {
    auto fail = [&](const std::string& msg) -> std::vector<int64_t> {
        throw std::runtime_error("node " + node.id + ": " + msg);
    };
    switch (node.kind) {
        case NodeKind::Conv2D: {
            const auto& in = in_shapes.at(0);
            if (in.size() != 4) return fail("Conv2D input must be rank 4");
            const Tensor& w = *node.weight;
            if (w.dims.size() != 4) return fail("Conv2D weight must be OIHW rank 4");
            int64_t out_c = w.dims[0], in_per_group = w.dims[1];
            if (in[1] != in_per_group * node.groups)
                return fail("input channels " + std::to_string(in[1]) +
                            " do not match weight " + shape_str(w.dims) + " with groups " +
                            std::to_string(node.groups));
            if (out_c % node.groups != 0)
                return fail("output channels not divisible by groups");
            int64_t oh = conv_out_dim(in[2], w.dims[2], node.stride, node.pad);
            int64_t ow = conv_out_dim(in[3], w.dims[3], node.stride, node.pad);
            if (oh <= 0 || ow <= 0) return fail("non-positive output spatial size");
            return {in[0], out_c, oh, ow};
        }
        case NodeKind::DepthwiseConv2D: {
            const auto& in = in_shapes.at(0);
            if (in.size() != 4) return fail("DepthwiseConv2D input must be rank 4");
            const Tensor& w = *node.weight;
            if (w.dims.size() != 4 || w.dims[1] != 1)
                return fail("DepthwiseConv2D weight must be C1HW");
            if (w.dims[0] != in[1])
                return fail("weight channel count " + std::to_string(w.dims[0]) +
                            " != input channels " + std::to_string(in[1]));
            int64_t oh = conv_out_dim(in[2], w.dims[2], node.stride, node.pad);
            int64_t ow = conv_out_dim(in[3], w.dims[3], node.stride, node.pad);
            if (oh <= 0 || ow <= 0) return fail("non-positive output spatial size");
            return {in[0], in[1], oh, ow};
        }
        case NodeKind::Dense: {
            const auto& in = in_shapes.at(0);
            const Tensor& w = *node.weight;
            if (w.dims.size() != 2) return fail("Dense weight must be OI rank 2");
            int64_t features = 1;
            for (size_t i = 1; i < in.size(); ++i) features *= in[i];
            if (features != w.dims[1])
                return fail("input features " + std::to_string(features) +
                            " != weight in-dim " + std::to_string(w.dims[1]));
            return {in[0], w.dims[0]};
        }
        case NodeKind::ReLU:
        case NodeKind::ReLU6:
            return in_shapes.at(0);
        case NodeKind::Add: {
            if (in_shapes.at(0) != in_shapes.at(1))
                return fail("Add input shapes differ: " + shape_str(in_shapes[0]) +
                            " vs " + shape_str(in_shapes[1]));
            return in_shapes[0];
        }
        case NodeKind::GlobalAvgPool: {
            const auto& in = in_shapes.at(0);
            if (in.size() != 4) return fail("GlobalAvgPool input must be rank 4");
            return {in[0], in[1], 1, 1};
        }
    }
    return fail("unhandled kind");
}

std::map<std::string, std::vector<int64_t>> infer_shapes(const Model& model) {
    std::map<std::string, std::vector<int64_t>> shapes;
    for (const Node& node : model.nodes) {
        std::vector<std::vector<int64_t>> ins;
        for (const std::string& in : node.inputs) {
            if (in == kGraphInput) {
                ins.push_back(model.input_shape);
            } else {
                auto it = shapes.find(in);
                if (it == shapes.end())
                    throw std::runtime_error("node " + node.id + ": input '" + in +
                                             "' is not defined earlier in the graph");
                ins.push_back(it->second);
            }
        }
        shapes[node.id] = infer_node_shape(node, ins);
    }
    return shapes;
}

std::vector<std::string> validate(const Model& model) {
    std::vector<std::string> diags;
    if (model.nodes.empty()) {
        diags.push_back("empty model");
        return diags;
    }
    if (model.input_shape.empty())
        diags.push_back("missing input_shape");
    for (int64_t d : model.input_shape)
        if (d <= 0) diags.push_back("non-positive input_shape dimension");

    std::set<std::string> seen;
    for (const Node& node : model.nodes) {
        if (node.id == kGraphInput)
            diags.push_back("node id '" + node.id + "' is reserved for the graph input");
        if (!seen.insert(node.id).second)
            diags.push_back("duplicate node id '" + node.id + "'");

        size_t want_inputs = node.kind == NodeKind::Add ? 2 : 1;
        if (node.inputs.size() != want_inputs)
            diags.push_back("node " + node.id + ": expected " +
                            std::to_string(want_inputs) + " inputs, got " +
                            std::to_string(node.inputs.size()));
        for (const std::string& in : node.inputs) {
            if (in != kGraphInput && !seen.count(in))
                diags.push_back("node " + node.id + ": input '" + in +
                                "' is not an earlier node (cycle or forward reference)");
        }

        if (node.has_weight_kind() != node.weight.has_value())
            diags.push_back("node " + node.id + ": weight " +
                            (node.weight ? "present on weightless kind" : "missing"));
        if (node.bias && !node.has_weight_kind())
            diags.push_back("node " + node.id + ": bias on weightless kind");

        for (const auto* t : {node.weight ? &*node.weight : nullptr,
                              node.bias ? &*node.bias : nullptr}) {
            if (!t) continue;
            if (t->numel() != static_cast<int64_t>(t->data.size()))
                diags.push_back("node " + node.id + ": tensor dims/length mismatch");
            else if (!t->all_finite())
                diags.push_back("node " + node.id + ": non-finite tensor value");
            for (int64_t d : t->dims)
                if (d <= 0) diags.push_back("node " + node.id + ": non-positive dim");
        }
    }

    if (!model.find(model.output_id))
        diags.push_back("output_id '" + model.output_id + "' is not a node");

    if (diags.empty()) {
        try {
            auto shapes = infer_shapes(model);
            // bias length must match output channels
            for (const Node& node : model.nodes) {
                if (!node.bias) continue;
                int64_t out_c = shapes.at(node.id).at(1);
                if (node.bias->numel() != out_c)
                    diags.push_back("node " + node.id + ": bias length " +
                                    std::to_string(node.bias->numel()) +
                                    " != output channels " + std::to_string(out_c));
            }
        } catch (const std::exception& e) {
            diags.push_back(e.what());
        }
    }
    return diags;
}

int64_t node_macs(const Node& node,
                  const std::map<std::string, std::vector<int64_t>>& shapes,
                  const std::vector<int64_t>& /*input_shape*/) {
    if (!node.has_weight_kind()) return 0;
    const auto& out = shapes.at(node.id);
    const Tensor& w = *node.weight;
    int64_t out_elems = shape_numel(out);
    switch (node.kind) {
        case NodeKind::Conv2D:
            return out_elems * w.dims[1] * w.dims[2] * w.dims[3];
        case NodeKind::DepthwiseConv2D:
            return out_elems * w.dims[2] * w.dims[3];
        case NodeKind::Dense:
            return out_elems * w.dims[1];
        default:
            return 0;
    }
}

int64_t model_macs(const Model& model) {
    auto shapes = infer_shapes(model);
    int64_t total = 0;
    for (const Node& node : model.nodes)
        total += node_macs(node, shapes, model.input_shape);
    return total;
}

}  // namespace subtq
