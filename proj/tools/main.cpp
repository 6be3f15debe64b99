// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: inspect / calibrate / quantize / compare, plus a
// hidden gen-fixture subcommand for reproducible test models.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "subtq/calib.hpp"
#include "subtq/exec.hpp"
#include "subtq/fixture.hpp"
#include "subtq/metrics.hpp"
#include "subtq/model_io.hpp"
#include "subtq/passes.hpp"

namespace fs = std::filesystem;
using namespace subtq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

std::vector<PassKind> parse_passes(const std::string& spec) {
    std::vector<PassKind> out;
    if (spec == "none") return out;
    std::string token;
    std::istringstream is(spec);
    while (std::getline(is, token, ',')) out.push_back(pass_from_name(token));
    return out;
}

int cmd_inspect(const fs::path& model_dir) {
    Model m;
    if (is_qmodel_dir(model_dir)) {
        m = load_qmodel(model_dir).graph;
    } else {
        m = load_model(model_dir);
    }
    auto shapes = infer_shapes(m);
    std::cout << "input " << shape_str(m.input_shape) << "\n";
    for (const Node& n : m.nodes) {
        int64_t params = (n.weight ? n.weight->numel() : 0) +
                         (n.bias ? n.bias->numel() : 0);
        std::cout << n.id << "  " << kind_name(n.kind) << "  "
                  << shape_str(shapes.at(n.id)) << "  params=" << params;
        if (n.outlier) std::cout << "  [outlier]";
        std::cout << "\n";
    }
    SizeReport sr = size_report(m);
    std::cout << "total params " << m.param_count() << ", macs " << model_macs(m)
              << ", fp32 bytes " << sr.fp32_bytes << "\n";
    return kExitOk;
}

int cmd_calibrate(const fs::path& model_dir, const fs::path& calib_dir,
                  const fs::path& out_file, bool histogram) {
    Model m = load_model(model_dir);
    auto samples = load_calibration_set(calib_dir);
    CalibrationStats stats = calibrate(m, samples, histogram);
    write_file(out_file, stats_to_json(stats));
    std::cout << "wrote " << out_file.string() << " (" << stats.edges.size()
              << " edges, " << samples.size() << " samples)\n";
    return kExitOk;
}

int cmd_quantize(const fs::path& model_dir, const fs::path& calib_dir,
                 const fs::path& out_dir, const PassConfig& cfg) {
    Model m = load_model(model_dir);
    auto calib = load_calibration_set(calib_dir);

    bool created = !fs::exists(out_dir);
    try {
        auto [qm, reports] = run_pipeline(m, calib, cfg);
        fs::create_directories(out_dir);
        save_qmodel(qm, out_dir);
        write_file(out_dir / "pass_report.json", reports_to_json(reports));
        EvalReport eval = evaluate(m, {{"quantized", &qm}}, calib);
        write_file(out_dir / "eval_report.json", eval.to_json());
    } catch (...) {
        // do not leave a half-written output directory behind
        std::error_code ec;
        if (created) fs::remove_all(out_dir, ec);
        throw;
    }
    std::cout << "wrote quantized model to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_compare(const fs::path& fp32_dir, const std::vector<fs::path>& variant_dirs,
                const fs::path& inputs_dir, const fs::path& out_dir, bool csv) {
    Model fp32 = load_model(fp32_dir);
    auto inputs = load_calibration_set(inputs_dir);

    std::vector<QModel> qmodels;
    qmodels.reserve(variant_dirs.size());
    std::vector<std::pair<std::string, const QModel*>> variants;
    for (const fs::path& dir : variant_dirs)
        qmodels.push_back(load_qmodel(dir));
    for (size_t i = 0; i < qmodels.size(); ++i)
        variants.emplace_back(variant_dirs[i].filename().string(), &qmodels[i]);

    EvalReport report = evaluate(fp32, variants, inputs);
    std::cout << report.to_csv();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(out_dir / "eval_report.json", report.to_json());
        if (csv) write_file(out_dir / "eval_report.csv", report.to_csv());
    }
    return kExitOk;
}

int cmd_gen_fixture(const fs::path& out_dir, uint64_t seed, int samples) {
    Model m = make_tiny_sep2(seed);
    save_model(m, out_dir / "model");
    save_calibration_set(make_calib_set(m, samples, seed), out_dir / "calib");
    std::cout << "wrote fixture model and " << samples << " calibration samples to "
              << out_dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-training int8 quantization toolkit"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    app.add_option("--seed", seed, "Deterministic seed")->capture_default_str();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print a model summary");
    std::string inspect_model;
    inspect->add_option("model", inspect_model, "Model directory")->required();

    // calibrate
    auto* calibrate_cmd =
        app.add_subcommand("calibrate", "Collect activation statistics");
    std::string cal_model, cal_data, cal_out = "calibration.json";
    bool cal_hist = false;
    calibrate_cmd->add_option("model", cal_model, "Model directory")->required();
    calibrate_cmd->add_option("calib", cal_data, "Calibration set directory")->required();
    calibrate_cmd->add_option("--out", cal_out, "Output stats file")
        ->capture_default_str();
    calibrate_cmd->add_flag("--histogram", cal_hist, "Also collect histograms");

    // quantize
    auto* quantize = app.add_subcommand("quantize", "Run the quantization pipeline");
    std::string q_model, q_calib, q_out = "quantized";
    std::string q_passes = "cle,clip,split,bias";
    PassConfig cfg;
    double q_percentile = 0.0;
    quantize->add_option("model", q_model, "Model directory")->required();
    quantize->add_option("calib", q_calib, "Calibration set directory")->required();
    quantize->add_option("--out", q_out, "Output directory")->capture_default_str();
    quantize->add_option("--passes", q_passes, "Comma list of passes, or 'none'")
        ->capture_default_str();
    quantize->add_option("--bits", cfg.bits, "Quantization bit width")
        ->capture_default_str();
    quantize
        ->add_option("--outlier-budget", cfg.outlier_budget_fraction,
                     "Max fraction of weights split into the outlier branch")
        ->capture_default_str();
    quantize
        ->add_option("--max-splits", cfg.max_splits_per_tensor,
                     "Max splits per weight tensor")
        ->capture_default_str();
    quantize
        ->add_option("--min-mse-gain", cfg.min_mse_gain,
                     "Required MSE improvement factor to accept a split")
        ->capture_default_str();
    quantize->add_option("--clip-grid", cfg.clip_grid, "Clip search grid size")
        ->capture_default_str();
    auto* pct = quantize->add_option(
        "--percentile", q_percentile,
        "Activation range percentile (e.g. 0.9999); min/max when omitted");

    // compare
    auto* compare = app.add_subcommand("compare", "Score variants against FP32");
    std::string c_fp32, c_inputs, c_out;
    std::vector<std::string> c_variants;
    bool c_csv = false;
    compare->add_option("fp32", c_fp32, "FP32 model directory")->required();
    compare->add_option("variants", c_variants, "Quantized model directories")
        ->required()
        ->expected(-1);
    compare->add_option("--inputs", c_inputs, "Input set directory")->required();
    compare->add_option("--out", c_out, "Report output directory");
    compare->add_flag("--csv", c_csv, "Also write a CSV report");

    // gen-fixture (hidden): reproducible test model + calibration data
    auto* gen = app.add_subcommand("gen-fixture", "");
    gen->group("");  // hide from help
    std::string g_out = "fixture";
    int g_samples = 32;
    gen->add_option("--out", g_out, "Output directory")->capture_default_str();
    gen->add_option("--samples", g_samples, "Calibration sample count")
        ->capture_default_str();

    // let global options (--seed) appear after the subcommand name
    for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*inspect) return cmd_inspect(inspect_model);
        if (*calibrate_cmd) return cmd_calibrate(cal_model, cal_data, cal_out, cal_hist);
        if (*quantize) {
            cfg.passes = parse_passes(q_passes);
            if (pct->count() > 0) cfg.percentile = q_percentile;
            return cmd_quantize(q_model, q_calib, q_out, cfg);
        }
        if (*compare) {
            std::vector<fs::path> dirs(c_variants.begin(), c_variants.end());
            return cmd_compare(c_fp32, dirs, c_inputs, c_out, c_csv);
        }
        if (*gen) return cmd_gen_fixture(g_out, seed, g_samples);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
