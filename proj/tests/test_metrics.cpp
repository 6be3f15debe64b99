// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "subtq/fixture.hpp"
#include "subtq/metrics.hpp"
#include "subtq/passes.hpp"

using namespace subtq;

TEST_CASE("sqnr examples") {
    Tensor ref({4}, {2.0f, 2.0f, 2.0f, 2.0f}, Layout::C);
    SUBCASE("identical signals have infinite sqnr") {
        CHECK(std::isinf(sqnr_db(ref, ref)));
    }
    SUBCASE("uniform error of half the signal is ~6.02 dB") {
        Tensor test({4}, {1.0f, 1.0f, 1.0f, 1.0f}, Layout::C);
        CHECK(sqnr_db(ref, test) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
    }
    SUBCASE("dims mismatch throws") {
        Tensor other({2}, {1.0f, 1.0f}, Layout::C);
        CHECK_THROWS_AS(sqnr_db(ref, other), std::invalid_argument);
    }
    SUBCASE("all-zero reference with nonzero error throws") {
        Tensor zero({4}, std::vector<float>(4, 0.0f), Layout::C);
        Tensor test({4}, {1.0f, 0.0f, 0.0f, 0.0f}, Layout::C);
        CHECK_THROWS_AS(sqnr_db(zero, test), std::invalid_argument);
    }
}

TEST_CASE("float model size accounting on tiny_sep2") {
    Model m = make_tiny_sep2(0);
    SizeReport r = size_report(m);
    // 14048 weights + 292 biases, 4 bytes each
    CHECK(m.param_count() == 14340);
    CHECK(r.fp32_bytes == 14340 * 4);
    CHECK(r.dense_bytes == r.fp32_bytes);
    CHECK(r.baseline_bytes == r.fp32_bytes);  // no outlier branches yet
    CHECK(r.outlier_extra_bytes == 0);
}

TEST_CASE("split model size accounting separates the outlier branch") {
    Model m = make_tiny_sep2(0);
    auto [split, report] = split_subtensors(m, PassConfig{});
    SizeReport r = size_report(split);
    int64_t nnz = report.outlier_nnz.at("fc");
    CHECK(r.outlier_extra_bytes == nnz * 5);
    // baseline keeps the dense core weights; the duplicated zeros of the
    // outlier branch are excluded
    CHECK(r.baseline_bytes == size_report(m).fp32_bytes);
    CHECK(r.sparse_projected_bytes == r.baseline_bytes + r.outlier_extra_bytes);
}

TEST_CASE("int8 dense size lands in the expected fraction of fp32") {
    Model m = make_tiny_sep2(0);
    auto calib = make_calib_set(m, 8, 0);
    QModel qm = build_qmodel(m, calibrate(m, calib));
    SizeReport r = size_report(qm);
    // int8 weights + int32 biases + 8 bytes of params per weight tensor
    CHECK(r.dense_bytes == 14048 + 292 * 4 + 6 * 8);
    double ratio = static_cast<double>(r.dense_bytes) / r.fp32_bytes;
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 0.27);
}

TEST_CASE("megabyte-scale dense layer shows the ~4x int8 shrink") {
    Model m;
    m.input_shape = {1, 853};
    m.output_id = "d";
    Node d;
    d.id = "d";
    d.kind = NodeKind::Dense;
    d.inputs = {kGraphInput};
    d.weight = Tensor({4096, 853}, Layout::OI);
    d.weight->data[0] = 1.0f;  // nonzero range so qparams are well-formed
    d.bias = Tensor({4096}, Layout::C);
    m.nodes.push_back(std::move(d));

    SizeReport fp = size_report(m);
    CHECK(m.param_count() == 4096 * 853 + 4096);
    CHECK(fp.fp32_bytes == m.param_count() * 4);  // ~13.3 MB

    QModel qm = build_qmodel(m, calibrate(m, make_calib_set(m, 1, 0)));
    SizeReport q8 = size_report(qm);
    double ratio = static_cast<double>(q8.dense_bytes) / q8.fp32_bytes;
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 0.27);
}

TEST_CASE("outlier branch macs counts only outlier nodes") {
    Model m = make_tiny_sep2(0);
    CHECK(outlier_branch_macs(m) == 0);
    auto [split, report] = split_subtensors(m, PassConfig{});
    CHECK(outlier_branch_macs(split) == 96 * 100);  // fc_out dense branch
    CHECK(model_macs(split) == model_macs(m) + 96 * 100);
}

TEST_CASE("evaluate aggregates variants against the fp32 reference") {
    Model m = make_tiny_sep2(33);
    auto calib = make_calib_set(m, 16, 33);

    PassConfig off;
    off.passes = {};
    auto [plain, r1] = run_pipeline(m, calib, off);
    auto [full, r2] = run_pipeline(m, calib, PassConfig{});

    auto inputs = make_calib_set(m, 12, 777);
    EvalReport rep = evaluate(m, {{"baseline", &plain}, {"pipeline", &full}}, inputs);

    CHECK(rep.num_inputs == 12);
    CHECK(rep.baseline_macs == model_macs(m));
    REQUIRE(rep.variants.size() == 2);
    const VariantMetrics& base = rep.variants[0];
    const VariantMetrics& pipe = rep.variants[1];
    CHECK(base.name == "baseline");
    CHECK(base.mac_overhead == 0.0);
    CHECK(base.sparse_size_overhead == 0.0);
    CHECK(pipe.sqnr_db >= base.sqnr_db + 3.0);
    CHECK(pipe.mac_overhead > 0.0);
    CHECK(pipe.mac_overhead <= 0.10);
    CHECK(pipe.sparse_size_overhead > 0.0);
    CHECK(pipe.sparse_size_overhead <= 0.01);
    for (const VariantMetrics& v : rep.variants) {
        CHECK(v.cosine > 0.9);
        CHECK(v.cosine <= 1.0 + 1e-12);
        CHECK(v.top1_agreement >= 0.0);
        CHECK(v.top1_agreement <= 1.0);
        CHECK(v.mse > 0.0);
    }
}

TEST_CASE("evaluate validates its inputs") {
    Model m = make_tiny_sep2(0);
    auto calib = make_calib_set(m, 4, 0);
    QModel qm = build_qmodel(m, calibrate(m, calib));
    CHECK_THROWS_AS(evaluate(m, {{"q", &qm}}, {}), std::invalid_argument);
    std::vector<int> labels = {1, 2};
    CHECK_THROWS_AS(evaluate(m, {{"q", &qm}}, calib, &labels), std::invalid_argument);
}

TEST_CASE("evaluate scores label accuracy when labels are given") {
    Model m = make_tiny_sep2(3);
    auto calib = make_calib_set(m, 4, 3);
    QModel qm = build_qmodel(m, calibrate(m, calib));
    std::vector<int> labels(4, 0);
    EvalReport rep = evaluate(m, {{"q", &qm}}, calib, &labels);
    REQUIRE(rep.variants[0].label_accuracy.has_value());
    CHECK(*rep.variants[0].label_accuracy >= 0.0);
    CHECK(*rep.variants[0].label_accuracy <= 1.0);
}

TEST_CASE("eval report JSON round-trips exactly, including infinity") {
    EvalReport r;
    r.baseline_macs = 12345;
    r.baseline_fp32_bytes = 888;
    r.num_inputs = 3;
    VariantMetrics v;
    v.name = "lossless";
    v.sqnr_db = std::numeric_limits<double>::infinity();
    v.mse = 0.0;
    v.cosine = 1.0;
    v.top1_agreement = 1.0;
    v.label_accuracy = 0.625;
    v.size = SizeReport{400, 100, 90, 10, 100};
    v.macs = 999;
    v.outlier_macs = 9;
    v.mac_overhead = 0.0375;
    v.sparse_size_overhead = 1.0 / 3.0;  // not exactly representable in decimal
    r.variants.push_back(v);

    EvalReport back = EvalReport::from_json(r.to_json());
    CHECK(back.baseline_macs == r.baseline_macs);
    CHECK(back.num_inputs == r.num_inputs);
    REQUIRE(back.variants.size() == 1);
    const VariantMetrics& b = back.variants[0];
    CHECK(b.name == v.name);
    CHECK(std::isinf(b.sqnr_db));
    CHECK(b.mse == v.mse);
    CHECK(b.cosine == v.cosine);
    CHECK(*b.label_accuracy == *v.label_accuracy);
    CHECK(b.sparse_size_overhead == v.sparse_size_overhead);
    CHECK(b.size.sparse_projected_bytes == v.size.sparse_projected_bytes);
    // serialization itself is stable
    CHECK(back.to_json() == r.to_json());
}

TEST_CASE("eval report CSV carries full double precision") {
    EvalReport r;
    VariantMetrics v;
    v.name = "q";
    v.sqnr_db = 31.41592653589793238;
    v.mse = 1.0 / 3.0;
    v.cosine = 0.99999999999999;
    v.top1_agreement = 0.875;
    v.size = SizeReport{4000, 1000, 990, 10, 1000};
    v.macs = 1234;
    v.mac_overhead = 0.072;
    v.sparse_size_overhead = 0.0007;
    r.variants.push_back(v);

    std::string csv = r.to_csv();
    std::istringstream is(csv);
    std::string header, line;
    std::getline(is, header);
    CHECK(header.substr(0, 5) == "name,");
    std::getline(is, line);
    // parse the numeric fields back and compare bit-exactly
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 10);
    CHECK(fields[0] == "q");
    CHECK(std::stod(fields[1]) == v.sqnr_db);
    CHECK(std::stod(fields[2]) == v.mse);
    CHECK(std::stod(fields[3]) == v.cosine);
    CHECK(std::stod(fields[8]) == v.mac_overhead);
    CHECK(std::stod(fields[9]) == v.sparse_size_overhead);
}
