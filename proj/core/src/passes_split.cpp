// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

// Subtensor splitting: additive magnitude partition of a weight tensor into a
// narrow-range core and an outlier part, merged back by an Add node.

#include <algorithm>
#include <cmath>

#include "subtq/passes.hpp"
#include "subtq/quant.hpp"

namespace subtq {

namespace detail {
QuantParams weight_qparams(const Tensor& w, int bits);
double per_tensor_sse(const Tensor& w, int bits);
}  // namespace detail

namespace {

struct SplitChoice {
    double threshold = 0.0;
    double pair_sse = 0.0;
    int64_t outlier_count = 0;
};

void partition(const Tensor& w, double tau, Tensor& core, Tensor& outlier) {
    core = w;
    outlier = w;
    for (size_t i = 0; i < w.data.size(); ++i) {
        if (std::fabs(w.data[i]) <= tau) {
            outlier.data[i] = 0.0f;
        } else {
            core.data[i] = 0.0f;
        }
    }
}

double pair_reconstruction_sse(const Tensor& w, const Tensor& core,
                               const Tensor& outlier, int bits) {
    QuantParams pc = detail::weight_qparams(core, bits);
    QuantParams po = detail::weight_qparams(outlier, bits);
    double sse = 0.0;
    for (size_t i = 0; i < w.data.size(); ++i) {
        double rec = dequantize_value(quantize_value(core.data[i], pc), pc) +
                     dequantize_value(quantize_value(outlier.data[i], po), po);
        double err = w.data[i] - rec;
        sse += err * err;
    }
    return sse;
}

// Candidate thresholds: every distinct |w| in the top outlier-budget quantile
// (capped), plus a coarse grid below the quantile.
std::vector<double> candidate_thresholds(const Tensor& w, const PassConfig& cfg) {
    std::vector<double> mags(w.data.size());
    for (size_t i = 0; i < w.data.size(); ++i) mags[i] = std::fabs(w.data[i]);
    std::sort(mags.begin(), mags.end());
    double maxmag = mags.back();
    if (maxmag == 0.0 || cfg.outlier_budget_fraction <= 0.0) return {};

    size_t qidx = static_cast<size_t>(
        std::ceil((1.0 - cfg.outlier_budget_fraction) * (mags.size() - 1)));
    double qval = mags[qidx];

    std::vector<double> cands;
    for (size_t i = qidx; i < mags.size(); ++i) {
        double v = mags[i];
        if (v >= maxmag) break;  // tau = max splits off nothing
        if (cands.empty() || v > cands.back()) cands.push_back(v);
    }
    constexpr size_t kMaxFine = 512;
    if (cands.size() > kMaxFine) {
        std::vector<double> thin;
        for (size_t i = 0; i < kMaxFine; ++i)
            thin.push_back(cands[i * cands.size() / kMaxFine]);
        cands = std::move(thin);
    }
    constexpr int kCoarse = 16;
    for (int j = 1; j <= kCoarse; ++j) {
        double tau = qval * j / (kCoarse + 1);
        if (tau > 0.0 && tau < maxmag) cands.push_back(tau);
    }
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    return cands;
}

std::optional<SplitChoice> best_split(const Tensor& w, const PassConfig& cfg) {
    auto cands = candidate_thresholds(w, cfg);
    std::optional<SplitChoice> best;
    Tensor core, outlier;
    for (double tau : cands) {
        partition(w, tau, core, outlier);
        int64_t nnz_out = 0, nnz_core = 0;
        for (size_t i = 0; i < w.data.size(); ++i) {
            if (outlier.data[i] != 0.0f) ++nnz_out;
            if (core.data[i] != 0.0f) ++nnz_core;
        }
        if (nnz_out == 0 || nnz_core == 0) continue;
        double sse = pair_reconstruction_sse(w, core, outlier, cfg.bits);
        if (!best || sse < best->pair_sse) best = SplitChoice{tau, sse, nnz_out};
    }
    return best;
}

// Splits node `id` in place when profitable; recurses on the core branch.
void try_split(Model& model, const std::string& id, int splits_left,
               const PassConfig& cfg, PassReport& report) {
    if (splits_left <= 0) return;
    Node& node = *model.find(id);
    if (node.kind != NodeKind::Conv2D && node.kind != NodeKind::DepthwiseConv2D &&
        node.kind != NodeKind::Dense)
        return;

    const Tensor& w = *node.weight;
    double base_sse = detail::per_tensor_sse(w, cfg.bits);
    auto choice = best_split(w, cfg);
    if (!choice || choice->pair_sse * cfg.min_mse_gain > base_sse) return;

    report.nodes_touched.push_back(id);
    report.mse_before[id] = base_sse;
    report.mse_after[id] = choice->pair_sse;
    report.outlier_nnz[id] = choice->outlier_count;
    report.param_count_delta += w.numel();
    report.sparse_projected_extra_bytes += choice->outlier_count * 5 + 8;

    Tensor core, outlier;
    partition(w, choice->threshold, core, outlier);

    Node core_node = node;
    core_node.id = id + "_core";
    core_node.weight = std::move(core);

    Node out_node = node;
    out_node.id = id + "_out";
    out_node.weight = std::move(outlier);
    out_node.bias.reset();
    out_node.outlier = true;

    Node add_node;
    add_node.id = id;
    add_node.kind = NodeKind::Add;
    add_node.inputs = {core_node.id, out_node.id};

    auto it = std::find_if(model.nodes.begin(), model.nodes.end(),
                           [&](const Node& n) { return n.id == id; });
    size_t pos = static_cast<size_t>(it - model.nodes.begin());
    *it = std::move(core_node);
    model.nodes.insert(model.nodes.begin() + pos + 1, std::move(out_node));
    model.nodes.insert(model.nodes.begin() + pos + 2, std::move(add_node));

    try_split(model, id + "_core", splits_left - 1, cfg, report);
}

}  // namespace

std::pair<Model, PassReport> split_subtensors(const Model& model, const PassConfig& cfg) {
    Model out = model;
    PassReport report;
    report.pass = pass_name(PassKind::SplitSubtensors);

    std::vector<std::string> candidates;
    for (const Node& n : out.nodes)
        if (n.has_weight_kind()) candidates.push_back(n.id);
    for (const std::string& id : candidates)
        try_split(out, id, cfg.max_splits_per_tensor, cfg, report);

    return {std::move(out), std::move(report)};
}

}  // namespace subtq
