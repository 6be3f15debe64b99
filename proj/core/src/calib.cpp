// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/calib.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "subtq/exec.hpp"
#include "subtq/threading.hpp"

namespace subtq {

void EdgeStats::merge(const EdgeStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
        *this = o;
        return;
    }
    min = std::min(min, o.min);
    max = std::max(max, o.max);
    count += o.count;
    if (!histogram.empty() && histogram.size() == o.histogram.size())
        for (size_t i = 0; i < histogram.size(); ++i) histogram[i] += o.histogram[i];
}

void CalibrationStats::merge(const CalibrationStats& o) {
    for (const auto& [id, s] : o.edges) edges[id].merge(s);
}

namespace {

void observe(EdgeStats& s, const std::vector<float>& values) {
    for (float v : values) {
        if (s.count == 0) {
            s.min = s.max = v;
        } else {
            s.min = std::min<double>(s.min, v);
            s.max = std::max<double>(s.max, v);
        }
        ++s.count;
    }
}

void fill_histogram(EdgeStats& s, const std::vector<float>& values) {
    if (s.histogram.empty()) s.histogram.assign(kHistogramBins, 0);
    double width = s.max - s.min;
    for (float v : values) {
        int64_t bin = width > 0
                          ? static_cast<int64_t>((v - s.min) / width * kHistogramBins)
                          : 0;
        s.histogram[std::clamp<int64_t>(bin, 0, kHistogramBins - 1)] += 1;
    }
}

}  // namespace

CalibrationStats calibrate(const Model& model, const std::vector<Tensor>& samples,
                           bool with_histogram) {
    if (samples.empty()) throw std::invalid_argument("calibrate: empty calibration set");
    for (const Tensor& s : samples)
        if (s.dims != model.input_shape)
            throw std::invalid_argument("calibrate: sample shape " + shape_str(s.dims) +
                                        " != input shape " +
                                        shape_str(model.input_shape));

    auto pass = [&](int64_t n, auto&& per_sample) {
        std::vector<CalibrationStats> partial(thread_budget());
        parallel_chunks(n, [&](int64_t begin, int64_t end, int worker) {
            for (int64_t i = begin; i < end; ++i) per_sample(partial[worker], samples[i]);
        });
        CalibrationStats merged;
        for (const auto& p : partial) merged.merge(p);
        return merged;
    };

    CalibrationStats stats = pass(samples.size(), [&](CalibrationStats& st,
                                                      const Tensor& sample) {
        std::map<std::string, Tensor> edges;
        run_fp32(model, sample, &edges);
        observe(st.edges[kGraphInput], sample.data);
        for (const auto& [id, t] : edges) observe(st.edges[id], t.data);
    });

    if (with_histogram) {
        // Second pass: bins need the final [min, max].
        CalibrationStats hist = stats;
        for (auto& [id, s] : hist.edges) {
            s.count = 0;
            s.histogram.assign(kHistogramBins, 0);
        }
        std::vector<CalibrationStats> partial(thread_budget(), hist);
        parallel_chunks(samples.size(), [&](int64_t begin, int64_t end, int worker) {
            for (int64_t i = begin; i < end; ++i) {
                std::map<std::string, Tensor> edges;
                run_fp32(model, samples[i], &edges);
                fill_histogram(partial[worker].edges[kGraphInput], samples[i].data);
                for (const auto& [id, t] : edges)
                    fill_histogram(partial[worker].edges[id], t.data);
            }
        });
        for (auto& [id, s] : stats.edges) {
            s.histogram.assign(kHistogramBins, 0);
            for (const auto& p : partial)
                for (size_t b = 0; b < kHistogramBins; ++b)
                    s.histogram[b] += p.edges.at(id).histogram[b];
        }
    }
    return stats;
}

std::pair<double, double> stats_range(const EdgeStats& s,
                                      std::optional<double> percentile) {
    if (s.count < 1) throw std::invalid_argument("stats_range: no observations");
    if (!percentile) return {s.min, s.max};
    if (s.histogram.empty())
        throw std::invalid_argument("stats_range: percentile needs a histogram");
    double frac = *percentile;
    if (!(frac > 0.5 && frac <= 1.0))
        throw std::invalid_argument("stats_range: percentile must be in (0.5, 1]");
    int64_t total = 0;
    for (int64_t b : s.histogram) total += b;
    int64_t cut = static_cast<int64_t>((1.0 - frac) * static_cast<double>(total));
    double width = (s.max - s.min) / kHistogramBins;

    int64_t dropped = 0;
    int lo_bin = 0;
    while (lo_bin < kHistogramBins - 1 && dropped + s.histogram[lo_bin] <= cut) {
        dropped += s.histogram[lo_bin];
        ++lo_bin;
    }
    dropped = 0;
    int hi_bin = kHistogramBins - 1;
    while (hi_bin > 0 && dropped + s.histogram[hi_bin] <= cut) {
        dropped += s.histogram[hi_bin];
        --hi_bin;
    }
    double lo = s.min + lo_bin * width;
    double hi = s.min + (hi_bin + 1) * width;
    return {std::min(lo, hi), std::max(lo, hi)};
}

std::string stats_to_json(const CalibrationStats& stats) {
    nlohmann::json j;
    for (const auto& [id, s] : stats.edges) {
        nlohmann::json e{{"min", s.min}, {"max", s.max}, {"count", s.count}};
        if (!s.histogram.empty()) e["histogram"] = s.histogram;
        j[id] = std::move(e);
    }
    return j.dump(2) + "\n";
}

CalibrationStats stats_from_json(const std::string& text) {
    CalibrationStats stats;
    nlohmann::json j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
        EdgeStats s;
        s.min = it.value().at("min").get<double>();
        s.max = it.value().at("max").get<double>();
        s.count = it.value().at("count").get<int64_t>();
        if (it.value().contains("histogram"))
            s.histogram = it.value().at("histogram").get<std::vector<int64_t>>();
        stats.edges[it.key()] = std::move(s);
    }
    return stats;
}

}  // namespace subtq
