// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "subtq/exec.hpp"
#include "subtq/fixture.hpp"
#include "subtq/passes.hpp"

using namespace subtq;

namespace {

const Model& fixture() {
    static Model m = make_tiny_sep2(0);
    return m;
}

const QModel& qfixture() {
    static QModel qm = [] {
        auto calib = make_calib_set(fixture(), 16, 0);
        return run_pipeline(fixture(), calib, PassConfig{}).first;
    }();
    return qm;
}

void BM_run_fp32(benchmark::State& state) {
    Tensor in = make_calib_set(fixture(), 1, 1)[0];
    for (auto _ : state) benchmark::DoNotOptimize(run_fp32(fixture(), in));
}
BENCHMARK(BM_run_fp32);

void BM_run_int8(benchmark::State& state) {
    Tensor in = make_calib_set(fixture(), 1, 1)[0];
    const QModel& qm = qfixture();
    for (auto _ : state) benchmark::DoNotOptimize(run_int8(qm, in));
}
BENCHMARK(BM_run_int8);

void BM_run_fakequant(benchmark::State& state) {
    Tensor in = make_calib_set(fixture(), 1, 1)[0];
    const QModel& qm = qfixture();
    for (auto _ : state) benchmark::DoNotOptimize(run_fakequant(qm, in));
}
BENCHMARK(BM_run_fakequant);

void BM_calibrate(benchmark::State& state) {
    auto calib = make_calib_set(fixture(), 16, 0);
    for (auto _ : state) benchmark::DoNotOptimize(calibrate(fixture(), calib));
}
BENCHMARK(BM_calibrate);

void BM_full_pipeline(benchmark::State& state) {
    auto calib = make_calib_set(fixture(), 16, 0);
    for (auto _ : state)
        benchmark::DoNotOptimize(run_pipeline(fixture(), calib, PassConfig{}));
}
BENCHMARK(BM_full_pipeline);

void BM_split_pass(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(split_subtensors(fixture(), PassConfig{}));
}
BENCHMARK(BM_split_pass);

}  // namespace

BENCHMARK_MAIN();
