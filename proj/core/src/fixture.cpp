// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/fixture.hpp"

#include <random>

namespace subtq {

namespace {

Tensor uniform_tensor(std::mt19937_64& rng, std::vector<int64_t> dims, Layout layout,
                      double lo, double hi) {
    Tensor t(std::move(dims), layout);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (float& v : t.data) v = static_cast<float>(dist(rng));
    return t;
}

// Depthwise weight with per-channel range disparity in [0.85, 1.2].
Tensor depthwise_tensor(std::mt19937_64& rng, int64_t channels, int64_t k) {
    Tensor t({channels, 1, k, k}, Layout::C1HW);
    std::uniform_real_distribution<double> base(-0.5, 0.5);
    std::uniform_real_distribution<double> range(0.85, 1.2);
    int64_t kk = k * k;
    for (int64_t c = 0; c < channels; ++c) {
        double f = range(rng);
        for (int64_t i = 0; i < kk; ++i)
            t.data[c * kk + i] = static_cast<float>(base(rng) * f);
    }
    return t;
}

// Dense head: tight uniform bulk plus a few large outliers.
Tensor head_tensor(std::mt19937_64& rng, int64_t out_f, int64_t in_f) {
    Tensor t({out_f, in_f}, Layout::OI);
    std::uniform_real_distribution<double> bulk(-0.03, 0.03);
    for (float& v : t.data) v = static_cast<float>(bulk(rng));
    std::uniform_real_distribution<double> mag(3.0, 5.0);
    std::uniform_int_distribution<int64_t> pos(0, out_f * in_f - 1);
    constexpr int kOutliers = 6;
    for (int i = 0; i < kOutliers; ++i) {
        double sign = (i % 2 == 0) ? 1.0 : -1.0;
        t.data[pos(rng)] = static_cast<float>(sign * mag(rng));
    }
    return t;
}

}  // namespace

Model make_tiny_sep2(uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5eb7e9a1c0ffee00ULL);
    Model m;
    m.input_shape = {1, 3, 8, 8};
    m.output_id = "fc";

    auto bias = [&](int64_t c) { return uniform_tensor(rng, {c}, Layout::C, -0.1, 0.1); };
    auto add = [&](const std::string& id, NodeKind kind,
                   std::vector<std::string> inputs, int stride = 1,
                   PadMode pad = PadMode::Valid) -> Node& {
        Node n;
        n.id = id;
        n.kind = kind;
        n.inputs = std::move(inputs);
        n.stride = stride;
        n.pad = pad;
        m.nodes.push_back(std::move(n));
        return m.nodes.back();
    };

    Node& c0 = add("c0", NodeKind::Conv2D, {kGraphInput}, 1, PadMode::Same);
    c0.weight = uniform_tensor(rng, {16, 3, 3, 3}, Layout::OIHW, -0.3, 0.3);
    c0.bias = bias(16);

    add("relu0", NodeKind::ReLU, {"c0"});

    Node& dw1 = add("dw1", NodeKind::DepthwiseConv2D, {"relu0"}, 1, PadMode::Same);
    dw1.weight = depthwise_tensor(rng, 16, 3);
    dw1.bias = bias(16);

    Node& pw1 = add("pw1", NodeKind::Conv2D, {"dw1"});
    pw1.weight = uniform_tensor(rng, {32, 16, 1, 1}, Layout::OIHW, -0.25, 0.25);
    pw1.bias = bias(32);

    add("relu1", NodeKind::ReLU, {"pw1"});

    Node& dw2 = add("dw2", NodeKind::DepthwiseConv2D, {"relu1"}, 2, PadMode::Same);
    dw2.weight = depthwise_tensor(rng, 32, 3);
    dw2.bias = bias(32);

    Node& pw2 = add("pw2", NodeKind::Conv2D, {"dw2"});
    pw2.weight = uniform_tensor(rng, {96, 32, 1, 1}, Layout::OIHW, -0.2, 0.2);
    pw2.bias = bias(96);

    add("gap", NodeKind::GlobalAvgPool, {"pw2"});

    Node& fc = add("fc", NodeKind::Dense, {"gap"});
    fc.weight = head_tensor(rng, 100, 96);
    fc.bias = uniform_tensor(rng, {100}, Layout::C, -0.05, 0.05);

    return m;
}

std::vector<Tensor> make_calib_set(const Model& model, int count, uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xca11b5a7e5eedULL);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Tensor> samples;
    samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Tensor t(model.input_shape, Layout::NCHW);
        for (float& v : t.data) v = static_cast<float>(dist(rng));
        samples.push_back(std::move(t));
    }
    return samples;
}

}  // namespace subtq
