// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/model_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace subtq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class DType { F32, I8, I32 };

size_t dtype_size(DType d) { return d == DType::I8 ? 1 : 4; }

DType dtype_from_name(const std::string& s) {
    if (s == "f32") return DType::F32;
    if (s == "i8") return DType::I8;
    if (s == "i32") return DType::I32;
    throw std::runtime_error("unknown dtype: " + s);
}

std::string dtype_name(DType d) {
    switch (d) {
        case DType::F32: return "f32";
        case DType::I8: return "i8";
        case DType::I32: return "i32";
    }
    return "";
}

std::vector<char> read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("missing file: " + p.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());
    return bytes;
}

json read_manifest(const fs::path& dir) {
    auto bytes = read_file(dir / "manifest.json");
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest in " + dir.string() + ": " +
                                 e.what());
    }
}

struct TensorEntry {
    int64_t offset = 0;
    std::vector<int64_t> dims;
    Layout layout = Layout::NCHW;
    DType dtype = DType::F32;
    std::optional<QuantParams> quant;
};

TensorEntry parse_entry(const json& j, bool quantized_format) {
    TensorEntry e;
    e.offset = j.at("offset").get<int64_t>();
    e.dims = j.at("dims").get<std::vector<int64_t>>();
    e.layout = layout_from_name(j.at("layout").get<std::string>());
    if (quantized_format && j.contains("dtype"))
        e.dtype = dtype_from_name(j.at("dtype").get<std::string>());
    if (j.contains("quant")) {
        QuantParams p;
        const json& q = j.at("quant");
        p.scale = q.at("scale").get<double>();
        p.zero_point = q.at("zero_point").get<int32_t>();
        if (q.contains("bits")) {
            p.bits = q.at("bits").get<int>();
            p.qmin = -(1 << (p.bits - 1));
            p.qmax = (1 << (p.bits - 1)) - 1;
        }
        e.quant = p;
    }
    return e;
}

void check_extent(const TensorEntry& e, const std::vector<char>& bin,
                  const std::string& what) {
    int64_t bytes = shape_numel(e.dims) * static_cast<int64_t>(dtype_size(e.dtype));
    if (e.offset < 0 || e.offset + bytes > static_cast<int64_t>(bin.size()))
        throw std::runtime_error(what + ": dims/byte-length mismatch (offset " +
                                 std::to_string(e.offset) + " + " +
                                 std::to_string(bytes) + " bytes > file size " +
                                 std::to_string(bin.size()) + ")");
}

Tensor load_f32_tensor(const TensorEntry& e, const std::vector<char>& bin,
                       const std::string& what) {
    check_extent(e, bin, what);
    Tensor t;
    t.dims = e.dims;
    t.layout = e.layout;
    t.data.resize(static_cast<size_t>(shape_numel(e.dims)));
    std::memcpy(t.data.data(), bin.data() + e.offset, t.data.size() * 4);
    if (!t.all_finite())
        throw std::runtime_error(what + ": non-finite tensor value");
    return t;
}

Node parse_node(const json& j, bool quantized_format, const std::vector<char>& bin,
                std::map<std::string, TensorEntry>* weight_entries,
                std::map<std::string, TensorEntry>* bias_entries) {
    Node n;
    n.id = j.at("id").get<std::string>();
    n.kind = kind_from_name(j.at("kind").get<std::string>());
    n.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (j.contains("attrs")) {
        const json& a = j.at("attrs");
        if (a.contains("stride")) n.stride = a.at("stride").get<int>();
        if (a.contains("pad")) n.pad = pad_from_name(a.at("pad").get<std::string>());
        if (a.contains("groups")) n.groups = a.at("groups").get<int>();
        if (a.contains("outlier")) n.outlier = a.at("outlier").get<bool>();
    }
    if (j.contains("weight")) {
        TensorEntry e = parse_entry(j.at("weight"), quantized_format);
        if (weight_entries) (*weight_entries)[n.id] = e;
        if (e.dtype == DType::F32)
            n.weight = load_f32_tensor(e, bin, "node " + n.id + " weight");
    }
    if (j.contains("bias")) {
        TensorEntry e = parse_entry(j.at("bias"), quantized_format);
        if (bias_entries) (*bias_entries)[n.id] = e;
        if (e.dtype == DType::F32)
            n.bias = load_f32_tensor(e, bin, "node " + n.id + " bias");
    }
    return n;
}

void throw_on_diags(const Model& model, const fs::path& dir) {
    auto diags = validate(model);
    if (!diags.empty()) {
        std::ostringstream os;
        os << "model validation failed for " << dir.string() << ":";
        for (const auto& d : diags) os << "\n  " << d;
        throw ValidationError(os.str());
    }
}

json attrs_json(const Node& n) {
    json a = json::object();
    if (n.kind == NodeKind::Conv2D || n.kind == NodeKind::DepthwiseConv2D) {
        a["stride"] = n.stride;
        a["pad"] = pad_name(n.pad);
        if (n.kind == NodeKind::Conv2D) a["groups"] = n.groups;
    }
    if (n.outlier) a["outlier"] = true;
    return a;
}

json quant_json(const QuantParams& p) {
    return json{{"scale", p.scale}, {"zero_point", p.zero_point}, {"bits", p.bits}};
}

QuantParams quant_from_json(const json& q) {
    QuantParams p;
    p.scale = q.at("scale").get<double>();
    p.zero_point = q.at("zero_point").get<int32_t>();
    p.bits = q.value("bits", 8);
    p.qmin = -(1 << (p.bits - 1));
    p.qmax = (1 << (p.bits - 1)) - 1;
    return p;
}

void write_files(const fs::path& dir, const json& manifest,
                 const std::vector<char>& bin) {
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "manifest.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
        f << manifest.dump(2) << "\n";
    }
    {
        std::ofstream f(dir / "tensors.bin", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir / "tensors.bin").string());
        f.write(bin.data(), static_cast<std::streamsize>(bin.size()));
    }
}

}  // namespace

bool is_qmodel_dir(const fs::path& dir) {
    json m = read_manifest(dir);
    return m.value("format_version", 1) == 2;
}

Model load_model(const fs::path& dir) {
    json m = read_manifest(dir);
    if (!m.contains("format_version") || m.at("format_version").get<int>() != 1)
        throw std::runtime_error("manifest " + dir.string() +
                                 ": format_version must be 1 for float models");
    auto bin = read_file(dir / "tensors.bin");

    Model model;
    model.input_shape = m.at("input_shape").get<std::vector<int64_t>>();
    model.output_id = m.at("output_id").get<std::string>();
    for (const json& jn : m.at("nodes"))
        model.nodes.push_back(parse_node(jn, false, bin, nullptr, nullptr));
    throw_on_diags(model, dir);
    return model;
}

void save_model(const Model& model, const fs::path& dir) {
    if (model.nodes.empty()) throw std::runtime_error("save_model: empty model");
    throw_on_diags(model, dir);

    std::vector<char> bin;
    auto append_f32 = [&bin](const Tensor& t) {
        int64_t off = static_cast<int64_t>(bin.size());
        bin.resize(bin.size() + t.data.size() * 4);
        std::memcpy(bin.data() + off, t.data.data(), t.data.size() * 4);
        return off;
    };

    json m;
    m["format_version"] = 1;
    m["input_shape"] = model.input_shape;
    m["output_id"] = model.output_id;
    json nodes = json::array();
    for (const Node& n : model.nodes) {
        json jn;
        jn["id"] = n.id;
        jn["kind"] = kind_name(n.kind);
        jn["attrs"] = attrs_json(n);
        jn["inputs"] = n.inputs;
        if (n.weight)
            jn["weight"] = json{{"offset", append_f32(*n.weight)},
                                {"dims", n.weight->dims},
                                {"layout", layout_name(n.weight->layout)}};
        if (n.bias)
            jn["bias"] = json{{"offset", append_f32(*n.bias)},
                              {"dims", n.bias->dims},
                              {"layout", layout_name(n.bias->layout)}};
        nodes.push_back(std::move(jn));
    }
    m["nodes"] = std::move(nodes);
    write_files(dir, m, bin);
}

QModel load_qmodel(const fs::path& dir) {
    json m = read_manifest(dir);
    if (m.value("format_version", 1) != 2)
        throw std::runtime_error("manifest " + dir.string() +
                                 ": format_version must be 2 for quantized models");
    auto bin = read_file(dir / "tensors.bin");

    QModel qm;
    qm.graph.input_shape = m.at("input_shape").get<std::vector<int64_t>>();
    qm.graph.output_id = m.at("output_id").get<std::string>();
    qm.input_params = quant_from_json(m.at("input_quant"));
    for (auto it = m.at("edge_quant").begin(); it != m.at("edge_quant").end(); ++it)
        qm.edge_params[it.key()] = quant_from_json(it.value());

    std::map<std::string, TensorEntry> weight_entries, bias_entries;
    for (const json& jn : m.at("nodes"))
        qm.graph.nodes.push_back(parse_node(jn, true, bin, &weight_entries, &bias_entries));

    for (Node& n : qm.graph.nodes) {
        if (!n.has_weight_kind()) continue;
        auto wit = weight_entries.find(n.id);
        if (wit == weight_entries.end() || wit->second.dtype != DType::I8 ||
            !wit->second.quant)
            throw std::runtime_error("node " + n.id +
                                     ": quantized model requires an i8 weight with "
                                     "quant params");
        const TensorEntry& we = wit->second;
        check_extent(we, bin, "node " + n.id + " weight");
        QTensor qw;
        qw.dims = we.dims;
        qw.layout = we.layout;
        qw.params = {*we.quant};
        qw.data.resize(static_cast<size_t>(shape_numel(we.dims)));
        std::memcpy(qw.data.data(), bin.data() + we.offset, qw.data.size());

        auto bit = bias_entries.find(n.id);
        if (bit == bias_entries.end() || bit->second.dtype != DType::I32)
            throw std::runtime_error("node " + n.id +
                                     ": quantized model requires an i32 bias");
        const TensorEntry& be = bit->second;
        check_extent(be, bin, "node " + n.id + " bias");
        std::vector<int32_t> qb(static_cast<size_t>(shape_numel(be.dims)));
        std::memcpy(qb.data(), bin.data() + be.offset, qb.size() * 4);

        n.weight = dequantize(qw);
        double bias_scale =
            qm.params_of(n.inputs.at(0)).scale * qw.params[0].scale;
        Tensor b(be.dims, Layout::C);
        for (size_t i = 0; i < qb.size(); ++i)
            b.data[i] = static_cast<float>(qb[i] * bias_scale);
        n.bias = std::move(b);

        qm.weights[n.id] = std::move(qw);
        qm.biases[n.id] = std::move(qb);
    }
    throw_on_diags(qm.graph, dir);
    for (const Node& n : qm.graph.nodes)
        if (!qm.edge_params.count(n.id))
            throw std::runtime_error("edge_quant missing entry for node " + n.id);
    return qm;
}

void save_qmodel(const QModel& qm, const fs::path& dir) {
    if (qm.graph.nodes.empty()) throw std::runtime_error("save_qmodel: empty model");

    std::vector<char> bin;
    auto append = [&bin](const void* src, size_t bytes) {
        int64_t off = static_cast<int64_t>(bin.size());
        bin.resize(bin.size() + bytes);
        std::memcpy(bin.data() + off, src, bytes);
        return off;
    };

    json m;
    m["format_version"] = 2;
    m["input_shape"] = qm.graph.input_shape;
    m["output_id"] = qm.graph.output_id;
    m["input_quant"] = quant_json(qm.input_params);
    json eq = json::object();
    for (const auto& [id, p] : qm.edge_params) eq[id] = quant_json(p);
    m["edge_quant"] = std::move(eq);

    json nodes = json::array();
    for (const Node& n : qm.graph.nodes) {
        json jn;
        jn["id"] = n.id;
        jn["kind"] = kind_name(n.kind);
        jn["attrs"] = attrs_json(n);
        jn["inputs"] = n.inputs;
        if (n.has_weight_kind()) {
            const QTensor& qw = qm.weights.at(n.id);
            const std::vector<int32_t>& qb = qm.biases.at(n.id);
            jn["weight"] = json{{"offset", append(qw.data.data(), qw.data.size())},
                                {"dims", qw.dims},
                                {"layout", layout_name(qw.layout)},
                                {"dtype", dtype_name(DType::I8)},
                                {"quant", quant_json(qw.params.at(0))}};
            jn["bias"] = json{{"offset", append(qb.data(), qb.size() * 4)},
                              {"dims", json::array({static_cast<int64_t>(qb.size())})},
                              {"layout", layout_name(Layout::C)},
                              {"dtype", dtype_name(DType::I32)}};
        }
        nodes.push_back(std::move(jn));
    }
    m["nodes"] = std::move(nodes);
    write_files(dir, m, bin);
}

std::vector<Tensor> load_calibration_set(const fs::path& dir) {
    auto bytes = read_file(dir / "calib_manifest.json");
    json m;
    try {
        m = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed calib_manifest in " + dir.string() + ": " +
                                 e.what());
    }
    std::vector<Tensor> samples;
    for (const json& js : m.at("samples")) {
        auto dims = js.at("dims").get<std::vector<int64_t>>();
        auto bin = read_file(dir / js.at("file").get<std::string>());
        if (static_cast<int64_t>(bin.size()) != shape_numel(dims) * 4)
            throw std::runtime_error("sample " + js.at("file").get<std::string>() +
                                     ": dims/byte-length mismatch");
        Tensor t(dims, Layout::NCHW);
        std::memcpy(t.data.data(), bin.data(), bin.size());
        if (!t.all_finite())
            throw std::runtime_error("sample " + js.at("file").get<std::string>() +
                                     ": non-finite value");
        samples.push_back(std::move(t));
    }
    if (samples.empty())
        throw std::runtime_error("calibration set " + dir.string() + " is empty");
    return samples;
}

void save_calibration_set(const std::vector<Tensor>& samples, const fs::path& dir) {
    fs::create_directories(dir);
    json m;
    json list = json::array();
    for (size_t i = 0; i < samples.size(); ++i) {
        std::string name = "sample_" + std::to_string(i) + ".bin";
        std::ofstream f(dir / name, std::ios::binary);
        f.write(reinterpret_cast<const char*>(samples[i].data.data()),
                static_cast<std::streamsize>(samples[i].data.size() * 4));
        list.push_back(json{{"file", name}, {"dims", samples[i].dims}});
    }
    m["samples"] = std::move(list);
    std::ofstream f(dir / "calib_manifest.json", std::ios::binary);
    f << m.dump(2) << "\n";
}

}  // namespace subtq
