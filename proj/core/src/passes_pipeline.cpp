// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>

#include "subtq/exec.hpp"
#include "subtq/passes.hpp"

namespace subtq {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Per-output-channel mean of (reference - accumulator) over all samples.
std::vector<double> channel_mean_error(const std::vector<Tensor>& refs,
                                       const std::vector<std::vector<double>>& accs,
                                       int64_t channels) {
    std::vector<double> err(static_cast<size_t>(channels), 0.0);
    int64_t count = 0;
    for (size_t s = 0; s < refs.size(); ++s) {
        const auto& ref = refs[s];
        const auto& acc = accs[s];
        int64_t per_channel = static_cast<int64_t>(ref.data.size()) / channels;
        // NCHW with batch 1 per sample: channel-major over [C, H*W] (or [1, C]
        // for dense outputs, where per_channel happens to be 1 per batch row).
        int64_t batch = ref.dims[0];
        int64_t inner = per_channel / batch;
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t c = 0; c < channels; ++c)
                for (int64_t i = 0; i < inner; ++i) {
                    size_t idx = static_cast<size_t>((b * channels + c) * inner + i);
                    err[c] += static_cast<double>(ref.data[idx]) - acc[idx];
                }
        count += batch * inner;
    }
    for (double& e : err) e /= static_cast<double>(count);
    return err;
}

double sq_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

std::pair<QModel, PassReport> bias_correct(const Model& model_fp32, QModel model_q,
                                           const std::vector<Tensor>& calib,
                                           const PassConfig& cfg) {
    if (calib.empty()) throw std::invalid_argument("bias_correct: empty calibration set");
    auto t0 = Clock::now();
    PassReport report;
    report.pass = pass_name(PassKind::BiasCorrect);

    size_t n_samples = std::min<size_t>(calib.size(),
                                        static_cast<size_t>(cfg.bias_sample_cap));

    // FP32 reference activations are fixed; compute them once.
    std::vector<std::map<std::string, Tensor>> fp32_edges(n_samples);
    for (size_t s = 0; s < n_samples; ++s)
        run_fp32(model_fp32, calib[s], &fp32_edges[s]);

    auto collect_accs = [&](const std::string& node_id,
                            std::vector<std::vector<double>>& accs) {
        accs.resize(n_samples);
        for (size_t s = 0; s < n_samples; ++s) {
            std::map<std::string, std::vector<double>> all;
            run_int8(model_q, calib[s], nullptr, &all);
            accs[s] = std::move(all.at(node_id));
        }
    };

    for (const Node& node : model_q.graph.nodes) {
        if (!node.has_weight_kind()) continue;
        const std::string& id = node.id;
        if (!model_fp32.find(id))
            throw std::invalid_argument("bias_correct: reference model lacks node " + id);
        int64_t channels = static_cast<int64_t>(model_q.biases.at(id).size());

        std::vector<std::vector<double>> accs;
        collect_accs(id, accs);
        std::vector<Tensor> refs;
        refs.reserve(n_samples);
        for (size_t s = 0; s < n_samples; ++s) refs.push_back(fp32_edges[s].at(id));

        auto err = channel_mean_error(refs, accs, channels);
        report.mse_before[id] = sq_norm(err);

        double bias_scale =
            input_scale_of(model_q, node) * model_q.weights.at(id).params[0].scale;
        std::vector<int32_t>& bias = model_q.biases.at(id);
        bool changed = false;
        for (int64_t c = 0; c < channels; ++c) {
            int64_t delta = round_away(err[c] / bias_scale);
            if (delta != 0) changed = true;
            bias[c] = static_cast<int32_t>(std::clamp<int64_t>(
                static_cast<int64_t>(bias[c]) + delta, INT32_MIN, INT32_MAX));
        }
        if (changed) report.nodes_touched.push_back(id);

        // Keep the graph's float view consistent with the corrected bias.
        Node* gnode = model_q.graph.find(id);
        if (!gnode->bias) {
            Tensor b({channels}, Layout::C);
            gnode->bias = std::move(b);
        }
        for (int64_t c = 0; c < channels; ++c)
            gnode->bias->data[c] = static_cast<float>(bias[c] * bias_scale);
    }

    // Post-correction residuals for the report.
    for (const Node& node : model_q.graph.nodes) {
        if (!node.has_weight_kind()) continue;
        int64_t channels = static_cast<int64_t>(model_q.biases.at(node.id).size());
        std::vector<std::vector<double>> accs;
        collect_accs(node.id, accs);
        std::vector<Tensor> refs;
        for (size_t s = 0; s < n_samples; ++s) refs.push_back(fp32_edges[s].at(node.id));
        report.mse_after[node.id] = sq_norm(channel_mean_error(refs, accs, channels));
    }

    report.wall_time_ms = ms_since(t0);
    return {std::move(model_q), std::move(report)};
}

std::pair<QModel, std::vector<PassReport>> run_pipeline(const Model& model,
                                                        const std::vector<Tensor>& calib,
                                                        const PassConfig& cfg) {
    Model m = model;
    std::vector<PassReport> reports;

    for (PassKind pass : cfg.passes) {
        auto t0 = Clock::now();
        switch (pass) {
            case PassKind::CrossLayerEqualize: {
                // Pre-pass stats gate ReLU6 pairs.
                CalibrationStats stats = calibrate(m, calib);
                auto [next, report] = cross_layer_equalize(m, &stats);
                report.wall_time_ms = ms_since(t0);
                m = std::move(next);
                reports.push_back(std::move(report));
                break;
            }
            case PassKind::ClipWeights: {
                auto [next, report] = clip_weights(m, cfg);
                report.wall_time_ms = ms_since(t0);
                m = std::move(next);
                reports.push_back(std::move(report));
                break;
            }
            case PassKind::SplitSubtensors: {
                auto [next, report] = split_subtensors(m, cfg);
                report.wall_time_ms = ms_since(t0);
                m = std::move(next);
                reports.push_back(std::move(report));
                break;
            }
            case PassKind::BiasCorrect:
                break;  // runs after quantization, below
        }
    }

    CalibrationStats stats = calibrate(m, calib, cfg.percentile.has_value());
    QModel qm = build_qmodel(m, stats, {cfg.bits, cfg.percentile});

    if (cfg.enabled(PassKind::BiasCorrect)) {
        auto [corrected, report] = bias_correct(m, std::move(qm), calib, cfg);
        qm = std::move(corrected);
        reports.push_back(std::move(report));
    }
    return {std::move(qm), std::move(reports)};
}

}  // namespace subtq
