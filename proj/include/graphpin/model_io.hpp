#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphpin/graph.hpp"

namespace graphpin {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    std::vector<Diagnostic> diagnostics;
    explicit ValidationError(std::vector<Diagnostic> d)
        : std::runtime_error(d.empty() ? "validation failed" : "validation failed: " + d[0].message),
          diagnostics(std::move(d)) {}
};

namespace b64 {

inline const char* alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string encode(const std::vector<uint8_t>& in) {
    const char* tbl = alphabet();
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= in.size(); i += 3) {
        uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    size_t rem = in.size() - i;
    if (rem == 1) {
        uint32_t v = in[i] << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<uint8_t> decode(const std::string& in) {
    auto val = [](char ch) -> int {
        if (ch >= 'A' && ch <= 'Z') return ch - 'A';
        if (ch >= 'a' && ch <= 'z') return ch - 'a' + 26;
        if (ch >= '0' && ch <= '9') return ch - '0' + 52;
        if (ch == '+') return 62;
        if (ch == '/') return 63;
        if (ch == '=') return -1;
        throw ParseError("invalid base64 character");
    };
    std::vector<uint8_t> out;
    if (in.size() % 4) throw ParseError("base64 length must be a multiple of 4");
    for (size_t i = 0; i < in.size(); i += 4) {
        int a = val(in[i]), b = val(in[i + 1]), c = val(in[i + 2]), d = val(in[i + 3]);
        if (a < 0 || b < 0) throw ParseError("malformed base64");
        uint32_t v = (a << 18) | (b << 12) | ((c < 0 ? 0 : c) << 6) | (d < 0 ? 0 : d);
        out.push_back((v >> 16) & 0xFF);
        if (c >= 0) out.push_back((v >> 8) & 0xFF);
        if (d >= 0) out.push_back(v & 0xFF);
    }
    return out;
}

} // namespace b64

// Tensor element bytes are little-endian, u8 one byte per element.
inline std::vector<uint8_t> tensor_bytes(const Tensor& t) {
    std::vector<uint8_t> out;
    size_t cell = dtype_size(t.dtype);
    out.reserve(t.data.size() * cell);
    for (uint32_t v : t.data) {
        out.push_back(v & 0xFF);
        if (cell == 4) {
            out.push_back((v >> 8) & 0xFF);
            out.push_back((v >> 16) & 0xFF);
            out.push_back((v >> 24) & 0xFF);
        }
    }
    return out;
}

inline Tensor tensor_from_bytes(DType dt, Shape shape, const std::vector<uint8_t>& bytes) {
    Tensor t(dt, std::move(shape));
    size_t cell = dtype_size(dt);
    if (bytes.size() != static_cast<size_t>(t.size()) * cell)
        throw ParseError("tensor byte length disagrees with its shape");
    for (size_t i = 0; i < t.data.size(); ++i) {
        uint32_t v = bytes[i * cell];
        if (cell == 4)
            v |= (bytes[i * cell + 1] << 8) | (bytes[i * cell + 2] << 16) |
                 (static_cast<uint32_t>(bytes[i * cell + 3]) << 24);
        t.data[i] = v;
    }
    return t;
}

namespace model_io_detail {

inline bool attr_is_float(const std::string& key) {
    return key == "alpha" || key == "beta" || key == "epsilon" || key == "min" || key == "max";
}
inline bool attr_is_int_list(const std::string& key) {
    return key == "kernel_shape" || key == "strides" || key == "pads" || key == "axes";
}

inline AttrValue parse_attr(const std::string& key, const nlohmann::json& v) {
    if (key == "to") {
        if (v.is_string()) return static_cast<int64_t>(dtype_from_name(v.get<std::string>()));
        return v.get<int64_t>();
    }
    if (attr_is_float(key)) return v.get<float>();
    if (attr_is_int_list(key)) {
        std::vector<int64_t> ints;
        for (const auto& e : v) ints.push_back(e.get<int64_t>());
        return ints;
    }
    if (v.is_number_float()) return v.get<float>();
    if (v.is_array()) {
        std::vector<int64_t> ints;
        for (const auto& e : v) ints.push_back(e.get<int64_t>());
        return ints;
    }
    return v.get<int64_t>();
}

inline nlohmann::json attr_to_json(const std::string& key, const AttrValue& v) {
    if (key == "to") return dtype_name(static_cast<DType>(std::get<int64_t>(v)));
    if (std::holds_alternative<int64_t>(v)) return std::get<int64_t>(v);
    if (std::holds_alternative<float>(v)) return std::get<float>(v);
    return std::get<std::vector<int64_t>>(v);
}

inline Shape parse_shape(const nlohmann::json& v) {
    Shape s;
    for (const auto& e : v) s.push_back(e.get<int64_t>());
    return s;
}

} // namespace model_io_detail

inline Graph load_model(const std::string& text) {
    using nlohmann::json;
    using namespace model_io_detail;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model parse error: ") + e.what());
    }
    Graph g;
    try {
        if (doc.at("version").get<int>() != 1) throw ParseError("unsupported model version");
        for (const auto& e : doc.at("inputs")) {
            std::string name = e.at("name").get<std::string>();
            g.graph_inputs.push_back(name);
            g.edges[name] = EdgeMeta{dtype_from_name(e.at("dtype").get<std::string>()), parse_shape(e.at("shape"))};
        }
        for (const auto& e : doc.at("outputs")) {
            std::string name = e.at("name").get<std::string>();
            g.graph_outputs.push_back(name);
            g.edges[name] = EdgeMeta{dtype_from_name(e.at("dtype").get<std::string>()), parse_shape(e.at("shape"))};
        }
        if (doc.contains("initializers"))
            for (const auto& e : doc.at("initializers")) {
                std::string name = e.at("name").get<std::string>();
                DType dt = dtype_from_name(e.at("dtype").get<std::string>());
                g.initializers[name] =
                    tensor_from_bytes(dt, parse_shape(e.at("shape")), b64::decode(e.at("data").get<std::string>()));
            }
        for (const auto& e : doc.at("nodes")) {
            OpNode n;
            n.id = e.at("id").get<std::string>();
            std::string kind = e.at("kind").get<std::string>();
            auto k = op_kind_from_name(kind);
            if (!k) throw ValidationError({{n.id, "unknown operation kind '" + kind + "'"}});
            n.kind = *k;
            if (e.contains("attributes"))
                for (auto it = e.at("attributes").begin(); it != e.at("attributes").end(); ++it)
                    n.attributes[it.key()] = parse_attr(it.key(), it.value());
            for (const auto& i : e.at("inputs")) n.inputs.push_back(i.get<std::string>());
            for (const auto& o : e.at("outputs")) n.outputs.push_back(o.get<std::string>());
            g.nodes.push_back(std::move(n));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("model parse error: ") + e.what());
    }
    auto diags = validate_graph(g);
    if (!diags.empty()) throw ValidationError(std::move(diags));
    infer_all_edges(g);
    return g;
}

inline std::string save_model(const Graph& g) {
    using nlohmann::json;
    using namespace model_io_detail;
    json doc;
    doc["version"] = 1;
    doc["inputs"] = json::array();
    for (const auto& name : g.graph_inputs) {
        const auto& m = g.edges.at(name);
        doc["inputs"].push_back({{"name", name}, {"dtype", dtype_name(m.dtype)}, {"shape", m.shape}});
    }
    doc["outputs"] = json::array();
    for (const auto& name : g.graph_outputs) {
        const auto& m = g.edges.at(name);
        doc["outputs"].push_back({{"name", name}, {"dtype", dtype_name(m.dtype)}, {"shape", m.shape}});
    }
    doc["initializers"] = json::array();
    for (const auto& [name, t] : g.initializers)
        doc["initializers"].push_back({{"name", name},
                                       {"dtype", dtype_name(t.dtype)},
                                       {"shape", t.shape},
                                       {"data", b64::encode(tensor_bytes(t))}});
    doc["nodes"] = json::array();
    for (const auto& n : g.nodes) {
        json attrs = json::object();
        for (const auto& [key, v] : n.attributes) attrs[key] = attr_to_json(key, v);
        doc["nodes"].push_back({{"id", n.id},
                                {"kind", op_kind_name(n.kind)},
                                {"attributes", attrs},
                                {"inputs", n.inputs},
                                {"outputs", n.outputs}});
    }
    return doc.dump(2);
}

// Input documents: name -> {dtype, shape, data}; data is base64 bytes or a
// plain numeric array.
inline std::map<std::string, Tensor> load_inputs(const std::string& text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("inputs parse error: ") + e.what());
    }
    std::map<std::string, Tensor> out;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const auto& e = it.value();
        DType dt = dtype_from_name(e.at("dtype").get<std::string>());
        Shape shape = model_io_detail::parse_shape(e.at("shape"));
        if (e.at("data").is_string()) {
            out[it.key()] = tensor_from_bytes(dt, shape, b64::decode(e.at("data").get<std::string>()));
        } else {
            Tensor t(dt, shape);
            const auto& arr = e.at("data");
            if (static_cast<int64_t>(arr.size()) != t.size())
                throw ParseError("input '" + it.key() + "' data length disagrees with its shape");
            for (size_t i = 0; i < arr.size(); ++i) {
                switch (dt) {
                    case DType::F32: t.data[i] = f32_to_bits(arr[i].get<float>()); break;
                    case DType::I32: t.data[i] = static_cast<uint32_t>(arr[i].get<int64_t>()); break;
                    case DType::U8: t.data[i] = arr[i].get<uint64_t>() & 0xFF; break;
                }
            }
            out[it.key()] = std::move(t);
        }
    }
    return out;
}

inline std::string save_inputs(const std::map<std::string, Tensor>& inputs) {
    using nlohmann::json;
    json doc = json::object();
    for (const auto& [name, t] : inputs)
        doc[name] = {{"dtype", dtype_name(t.dtype)}, {"shape", t.shape}, {"data", b64::encode(tensor_bytes(t))}};
    return doc.dump(2);
}

} // namespace graphpin
