// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "subtq/threading.hpp"

namespace subtq {

double sqnr_db(const Tensor& reference, const Tensor& test) {
    if (reference.dims != test.dims)
        throw std::invalid_argument("sqnr: dims mismatch");
    double sig = 0.0, err = 0.0;
    for (size_t i = 0; i < reference.data.size(); ++i) {
        double r = reference.data[i];
        double d = r - static_cast<double>(test.data[i]);
        sig += r * r;
        err += d * d;
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    if (sig == 0.0) throw std::invalid_argument("sqnr: zero reference");
    return 10.0 * std::log10(sig / err);
}

SizeReport size_report(const Model& model) {
    SizeReport r;
    r.fp32_bytes = model.param_count() * 4;
    r.dense_bytes = r.fp32_bytes;
    int64_t baseline = 0, outlier_extra = 0;
    for (const Node& n : model.nodes) {
        int64_t bytes = (n.weight ? n.weight->numel() * 4 : 0) +
                        (n.bias ? n.bias->numel() * 4 : 0);
        if (n.outlier) {
            int64_t nnz = 0;
            if (n.weight)
                for (float v : n.weight->data)
                    if (v != 0.0f) ++nnz;
            outlier_extra += nnz * (1 + 4);
        } else {
            baseline += bytes;
        }
    }
    r.baseline_bytes = baseline;
    r.outlier_extra_bytes = outlier_extra;
    r.sparse_projected_bytes = baseline + outlier_extra;
    return r;
}

SizeReport size_report(const QModel& qm) {
    SizeReport r;
    r.fp32_bytes = qm.graph.param_count() * 4;
    for (const Node& n : qm.graph.nodes) {
        if (!n.has_weight_kind()) continue;
        const QTensor& w = qm.weights.at(n.id);
        int64_t w_bytes = w.numel() * 1 + 8;  // int8 data + QuantParams
        int64_t b_bytes = static_cast<int64_t>(qm.biases.at(n.id).size()) * 4;
        r.dense_bytes += w_bytes + b_bytes;
        if (n.outlier) {
            int64_t nnz = 0;
            const QuantParams& p = w.params.at(0);
            for (int8_t q : w.data)
                if (q != p.zero_point) ++nnz;
            r.outlier_extra_bytes += nnz * (1 + 4) + 8;
        } else {
            r.baseline_bytes += w_bytes + b_bytes;
        }
    }
    r.sparse_projected_bytes = r.baseline_bytes + r.outlier_extra_bytes;
    return r;
}

int64_t outlier_branch_macs(const Model& model) {
    auto shapes = infer_shapes(model);
    int64_t total = 0;
    for (const Node& n : model.nodes)
        if (n.outlier) total += node_macs(n, shapes, model.input_shape);
    return total;
}

namespace {

int64_t argmax(const Tensor& t) {
    return std::max_element(t.data.begin(), t.data.end()) - t.data.begin();
}

struct Accum {
    double sig = 0.0, err = 0.0;
    double dot = 0.0, ref_norm = 0.0, test_norm = 0.0;
    int64_t agree = 0;
    int64_t label_hits = 0;
    int64_t elems = 0;

    void add(const Accum& o) {
        sig += o.sig;
        err += o.err;
        dot += o.dot;
        ref_norm += o.ref_norm;
        test_norm += o.test_norm;
        agree += o.agree;
        label_hits += o.label_hits;
        elems += o.elems;
    }
};

}  // namespace

EvalReport evaluate(const Model& fp32,
                    const std::vector<std::pair<std::string, const QModel*>>& variants,
                    const std::vector<Tensor>& inputs,
                    const std::vector<int>* labels) {
    if (inputs.empty()) throw std::invalid_argument("evaluate: empty input set");
    if (labels && labels->size() != inputs.size())
        throw std::invalid_argument("evaluate: labels/input count mismatch");

    EvalReport report;
    report.num_inputs = static_cast<int64_t>(inputs.size());
    report.baseline_macs = model_macs(fp32);
    report.baseline_fp32_bytes = size_report(fp32).fp32_bytes;

    std::vector<Tensor> refs(inputs.size());
    parallel_chunks(static_cast<int64_t>(inputs.size()),
                    [&](int64_t begin, int64_t end, int) {
                        for (int64_t i = begin; i < end; ++i)
                            refs[i] = run_fp32(fp32, inputs[i]);
                    });

    for (const auto& [name, qm] : variants) {
        if (qm->graph.input_shape != fp32.input_shape)
            throw std::invalid_argument("evaluate: variant '" + name +
                                        "' input shape incompatible with reference");
        VariantMetrics vm;
        vm.name = name;
        vm.size = size_report(*qm);
        vm.macs = model_macs(qm->graph);
        vm.outlier_macs = outlier_branch_macs(qm->graph);
        vm.mac_overhead = static_cast<double>(vm.macs - report.baseline_macs) /
                          static_cast<double>(report.baseline_macs);
        vm.sparse_size_overhead = static_cast<double>(vm.size.outlier_extra_bytes) /
                                  static_cast<double>(vm.size.baseline_bytes);

        std::vector<Accum> partial(thread_budget());
        parallel_chunks(static_cast<int64_t>(inputs.size()),
                        [&](int64_t begin, int64_t end, int worker) {
                            Accum& a = partial[worker];
                            for (int64_t i = begin; i < end; ++i) {
                                Tensor out = run_int8(*qm, inputs[i]);
                                const Tensor& ref = refs[i];
                                for (size_t k = 0; k < ref.data.size(); ++k) {
                                    double r = ref.data[k], t = out.data[k];
                                    a.sig += r * r;
                                    a.err += (r - t) * (r - t);
                                    a.dot += r * t;
                                    a.ref_norm += r * r;
                                    a.test_norm += t * t;
                                }
                                int64_t pred = argmax(out);
                                if (pred == argmax(ref)) ++a.agree;
                                if (labels && pred == (*labels)[i]) ++a.label_hits;
                                a.elems += static_cast<int64_t>(ref.data.size());
                            }
                        });
        Accum total;
        for (const Accum& a : partial) total.add(a);

        vm.mse = total.err / static_cast<double>(total.elems);
        vm.sqnr_db = total.err == 0.0 ? std::numeric_limits<double>::infinity()
                                      : 10.0 * std::log10(total.sig / total.err);
        double denom = std::sqrt(total.ref_norm) * std::sqrt(total.test_norm);
        vm.cosine = denom > 0.0 ? total.dot / denom : 1.0;
        vm.top1_agreement =
            static_cast<double>(total.agree) / static_cast<double>(inputs.size());
        if (labels)
            vm.label_accuracy = static_cast<double>(total.label_hits) /
                                static_cast<double>(inputs.size());
        report.variants.push_back(std::move(vm));
    }
    return report;
}

namespace {

nlohmann::json size_to_json(const SizeReport& s) {
    return nlohmann::json{{"fp32_bytes", s.fp32_bytes},
                          {"dense_bytes", s.dense_bytes},
                          {"baseline_bytes", s.baseline_bytes},
                          {"outlier_extra_bytes", s.outlier_extra_bytes},
                          {"sparse_projected_bytes", s.sparse_projected_bytes}};
}

SizeReport size_from_json(const nlohmann::json& j) {
    SizeReport s;
    s.fp32_bytes = j.at("fp32_bytes").get<int64_t>();
    s.dense_bytes = j.at("dense_bytes").get<int64_t>();
    s.baseline_bytes = j.at("baseline_bytes").get<int64_t>();
    s.outlier_extra_bytes = j.at("outlier_extra_bytes").get<int64_t>();
    s.sparse_projected_bytes = j.at("sparse_projected_bytes").get<int64_t>();
    return s;
}

// JSON has no inf; use a string sentinel.
nlohmann::json db_to_json(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

double db_from_json(const nlohmann::json& j) {
    if (j.is_string()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["report_version"] = report_version;
    j["baseline_macs"] = baseline_macs;
    j["baseline_fp32_bytes"] = baseline_fp32_bytes;
    j["num_inputs"] = num_inputs;
    nlohmann::json vs = nlohmann::json::array();
    for (const VariantMetrics& v : variants) {
        nlohmann::json jv;
        jv["name"] = v.name;
        jv["sqnr_db"] = db_to_json(v.sqnr_db);
        jv["mse"] = v.mse;
        jv["cosine"] = v.cosine;
        jv["top1_agreement"] = v.top1_agreement;
        if (v.label_accuracy) jv["label_accuracy"] = *v.label_accuracy;
        jv["size"] = size_to_json(v.size);
        jv["macs"] = v.macs;
        jv["outlier_macs"] = v.outlier_macs;
        jv["mac_overhead"] = v.mac_overhead;
        jv["sparse_size_overhead"] = v.sparse_size_overhead;
        vs.push_back(std::move(jv));
    }
    j["variants"] = std::move(vs);
    return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.report_version = j.at("report_version").get<int>();
    r.baseline_macs = j.at("baseline_macs").get<int64_t>();
    r.baseline_fp32_bytes = j.at("baseline_fp32_bytes").get<int64_t>();
    r.num_inputs = j.at("num_inputs").get<int64_t>();
    for (const nlohmann::json& jv : j.at("variants")) {
        VariantMetrics v;
        v.name = jv.at("name").get<std::string>();
        v.sqnr_db = db_from_json(jv.at("sqnr_db"));
        v.mse = jv.at("mse").get<double>();
        v.cosine = jv.at("cosine").get<double>();
        v.top1_agreement = jv.at("top1_agreement").get<double>();
        if (jv.contains("label_accuracy"))
            v.label_accuracy = jv.at("label_accuracy").get<double>();
        v.size = size_from_json(jv.at("size"));
        v.macs = jv.at("macs").get<int64_t>();
        v.outlier_macs = jv.at("outlier_macs").get<int64_t>();
        v.mac_overhead = jv.at("mac_overhead").get<double>();
        v.sparse_size_overhead = jv.at("sparse_size_overhead").get<double>();
        r.variants.push_back(std::move(v));
    }
    return r;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "name,sqnr_db,mse,cosine,top1_agreement,dense_bytes,sparse_projected_bytes,"
          "macs,mac_overhead,sparse_size_overhead\n";
    for (const VariantMetrics& v : variants) {
        os << v.name << "," << v.sqnr_db << "," << v.mse << "," << v.cosine << ","
           << v.top1_agreement << ","
           << v.size.dense_bytes << "," << v.size.sparse_projected_bytes << ","
           << v.macs << "," << v.mac_overhead << "," << v.sparse_size_overhead
           << "\n";
    }
    return os.str();
}

}  // namespace subtq
