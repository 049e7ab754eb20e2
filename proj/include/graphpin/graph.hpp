#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "graphpin/tensor.hpp"

namespace graphpin {

enum class OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Relu,
    Clip,
    MaxPool,
    AveragePool,
    ReduceSum,
    ReduceMax,
    MatMul,
    Gemm,
    MatMulInteger,
    ConvInteger,
    BatchNormalization,
    Cast,
    QuantizeLinear,
    DequantizeLinear,
};

inline const std::vector<std::pair<OpKind, const char*>>& op_kind_names() {
    static const std::vector<std::pair<OpKind, const char*>> v = {
        {OpKind::Add, "Add"},
        {OpKind::Sub, "Sub"},
        {OpKind::Mul, "Mul"},
        {OpKind::Div, "Div"},
        {OpKind::Min, "Min"},
        {OpKind::Max, "Max"},
        {OpKind::Relu, "Relu"},
        {OpKind::Clip, "Clip"},
        {OpKind::MaxPool, "MaxPool"},
        {OpKind::AveragePool, "AveragePool"},
        {OpKind::ReduceSum, "ReduceSum"},
        {OpKind::ReduceMax, "ReduceMax"},
        {OpKind::MatMul, "MatMul"},
        {OpKind::Gemm, "Gemm"},
        {OpKind::MatMulInteger, "MatMulInteger"},
        {OpKind::ConvInteger, "ConvInteger"},
        {OpKind::BatchNormalization, "BatchNormalization"},
        {OpKind::Cast, "Cast"},
        {OpKind::QuantizeLinear, "QuantizeLinear"},
        {OpKind::DequantizeLinear, "DequantizeLinear"},
    };
    return v;
}

inline const char* op_kind_name(OpKind k) {
    for (auto& [kind, name] : op_kind_names())
        if (kind == k) return name;
    return "?";
}

inline std::optional<OpKind> op_kind_from_name(const std::string& s) {
    for (auto& [kind, name] : op_kind_names())
        if (s == name) return kind;
    return std::nullopt;
}

using AttrValue = std::variant<int64_t, float, std::vector<int64_t>>;

struct OpNode {
    std::string id;
    OpKind kind = OpKind::Add;
    std::map<std::string, AttrValue> attributes;
    std::vector<std::string> inputs;  // edge names, ordered
    std::vector<std::string> outputs; // edge names, ordered (always one here)

    int64_t attr_int(const std::string& name, int64_t dflt) const {
        auto it = attributes.find(name);
        if (it == attributes.end()) return dflt;
        return std::get<int64_t>(it->second);
    }
    float attr_float(const std::string& name, float dflt) const {
        auto it = attributes.find(name);
        if (it == attributes.end()) return dflt;
        return std::get<float>(it->second);
    }
    std::vector<int64_t> attr_ints(const std::string& name, std::vector<int64_t> dflt) const {
        auto it = attributes.find(name);
        if (it == attributes.end()) return dflt;
        return std::get<std::vector<int64_t>>(it->second);
    }
    bool has_attr(const std::string& name) const { return attributes.count(name) != 0; }
};

struct EdgeMeta {
    DType dtype = DType::F32;
    Shape shape;
    bool operator==(const EdgeMeta& o) const { return dtype == o.dtype && shape == o.shape; }
};

struct Diagnostic {
    std::string node_id; // empty for graph-level findings
    std::string message;
};

struct Graph {
    std::vector<OpNode> nodes;
    std::map<std::string, EdgeMeta> edges; // filled by shape inference
    std::vector<std::string> graph_inputs;
    std::vector<std::string> graph_outputs;
    std::map<std::string, Tensor> initializers;

    const OpNode* find_node(const std::string& id) const {
        for (auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }
};

// ---------------------------------------------------------------------
// Shape inference. Returns the output metadata for one node, or records a
// diagnostic and returns nullopt.
// ---------------------------------------------------------------------

namespace shape_infer_detail {

struct Ctx {
    const OpNode& node;
    const std::vector<EdgeMeta>& in;
    std::vector<Diagnostic>& diags;

    bool fail(const std::string& msg) const {
        diags.push_back({node.id, msg});
        return false;
    }
    bool want_inputs(size_t lo, size_t hi) const {
        if (in.size() < lo || in.size() > hi)
            return fail("expected " + std::to_string(lo) + ".." + std::to_string(hi) + " inputs, got " +
                        std::to_string(in.size()));
        return true;
    }
    bool want_dtype(size_t i, DType dt) const {
        if (in[i].dtype != dt)
            return fail("input " + std::to_string(i) + " must be " + dtype_name(dt));
        return true;
    }
    bool want_rank(size_t i, size_t r) const {
        if (in[i].shape.size() != r)
            return fail("input " + std::to_string(i) + " must have rank " + std::to_string(r));
        return true;
    }
    bool want_scalarish(size_t i) const {
        if (shape_elems(in[i].shape) != 1)
            return fail("input " + std::to_string(i) + " must be a scalar");
        return true;
    }
};

inline std::optional<std::vector<int64_t>> pool_output_hw(const Ctx& c, const Shape& x,
                                                          const std::vector<int64_t>& kernel,
                                                          const std::vector<int64_t>& strides,
                                                          const std::vector<int64_t>& pads) {
    if (kernel.size() != 2 || strides.size() != 2 || pads.size() != 4) {
        c.fail("kernel_shape/strides/pads must describe a 2-D window");
        return std::nullopt;
    }
    int64_t h = x[2] + pads[0] + pads[2] - kernel[0];
    int64_t w = x[3] + pads[1] + pads[3] - kernel[1];
    if (h < 0 || w < 0 || kernel[0] < 1 || kernel[1] < 1 || strides[0] < 1 || strides[1] < 1) {
        c.fail("window does not fit input");
        return std::nullopt;
    }
    if (pads[0] >= kernel[0] || pads[2] >= kernel[0] || pads[1] >= kernel[1] || pads[3] >= kernel[1]) {
        c.fail("pads must be smaller than the kernel");
        return std::nullopt;
    }
    return std::vector<int64_t>{h / strides[0] + 1, w / strides[1] + 1};
}

} // namespace shape_infer_detail

inline std::optional<EdgeMeta> infer_node_output(const OpNode& node, const std::vector<EdgeMeta>& in,
                                                 std::vector<Diagnostic>& diags) {
    using namespace shape_infer_detail;
    Ctx c{node, in, diags};
    switch (node.kind) {
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul:
        case OpKind::Div:
        case OpKind::Min:
        case OpKind::Max: {
            if (!c.want_inputs(2, 2) || !c.want_dtype(0, DType::F32) || !c.want_dtype(1, DType::F32))
                return std::nullopt;
            if (!broadcastable_to(in[1].shape, in[0].shape)) {
                c.fail("second input does not broadcast to the first");
                return std::nullopt;
            }
            return EdgeMeta{DType::F32, in[0].shape};
        }
        case OpKind::Relu: {
            if (!c.want_inputs(1, 1) || !c.want_dtype(0, DType::F32)) return std::nullopt;
            return in[0];
        }
        case OpKind::Clip: {
            if (!c.want_inputs(1, 1) || !c.want_dtype(0, DType::F32)) return std::nullopt;
            return in[0];
        }
        case OpKind::MaxPool:
        case OpKind::AveragePool: {
            if (!c.want_inputs(1, 1) || !c.want_dtype(0, DType::F32) || !c.want_rank(0, 4)) return std::nullopt;
            if (!node.has_attr("kernel_shape")) {
                c.fail("kernel_shape attribute required");
                return std::nullopt;
            }
            auto kernel = node.attr_ints("kernel_shape", {});
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            if (node.kind == OpKind::AveragePool && pads != std::vector<int64_t>{0, 0, 0, 0}) {
                c.fail("AveragePool supports zero pads only");
                return std::nullopt;
            }
            auto hw = pool_output_hw(c, in[0].shape, kernel, strides, pads);
            if (!hw) return std::nullopt;
            return EdgeMeta{DType::F32, {in[0].shape[0], in[0].shape[1], (*hw)[0], (*hw)[1]}};
        }
        case OpKind::ReduceSum:
        case OpKind::ReduceMax: {
            if (!c.want_inputs(1, 1) || !c.want_dtype(0, DType::F32)) return std::nullopt;
            int64_t rank = static_cast<int64_t>(in[0].shape.size());
            std::vector<int64_t> axes = node.attr_ints("axes", {});
            if (axes.empty())
                for (int64_t a = 0; a < rank; ++a) axes.push_back(a);
            std::set<int64_t> axset(axes.begin(), axes.end());
            for (int64_t a : axset)
                if (a < 0 || a >= rank) {
                    c.fail("axis out of range");
                    return std::nullopt;
                }
            bool keepdims = node.attr_int("keepdims", 1) != 0;
            Shape out;
            for (int64_t a = 0; a < rank; ++a) {
                if (axset.count(a)) {
                    if (keepdims) out.push_back(1);
                } else {
                    out.push_back(in[0].shape[a]);
                }
            }
            return EdgeMeta{DType::F32, out};
        }
        case OpKind::MatMul: {
            if (!c.want_inputs(2, 2) || !c.want_dtype(0, DType::F32) || !c.want_dtype(1, DType::F32) ||
                !c.want_rank(1, 2))
                return std::nullopt;
            size_t ra = in[0].shape.size();
            if (ra < 2 || ra > 4) {
                c.fail("first input rank must be 2..4");
                return std::nullopt;
            }
            if (in[0].shape[ra - 1] != in[1].shape[0]) {
                c.fail("inner dimensions disagree");
                return std::nullopt;
            }
            Shape out = in[0].shape;
            out[ra - 1] = in[1].shape[1];
            return EdgeMeta{DType::F32, out};
        }
        case OpKind::Gemm: {
            if (!c.want_inputs(3, 3)) return std::nullopt;
            for (size_t i = 0; i < 3; ++i)
                if (!c.want_dtype(i, DType::F32)) return std::nullopt;
            if (!c.want_rank(0, 2) || !c.want_rank(1, 2)) return std::nullopt;
            bool ta = node.attr_int("transA", 0) != 0, tb = node.attr_int("transB", 0) != 0;
            int64_t m = ta ? in[0].shape[1] : in[0].shape[0];
            int64_t k = ta ? in[0].shape[0] : in[0].shape[1];
            int64_t kb = tb ? in[1].shape[1] : in[1].shape[0];
            int64_t n = tb ? in[1].shape[0] : in[1].shape[1];
            if (k != kb) {
                c.fail("inner dimensions disagree");
                return std::nullopt;
            }
            if (!broadcastable_to(in[2].shape, {m, n})) {
                c.fail("bias does not broadcast to the output");
                return std::nullopt;
            }
            return EdgeMeta{DType::F32, {m, n}};
        }
        case OpKind::MatMulInteger: {
            if (!c.want_inputs(2, 2) || !c.want_rank(0, 2) || !c.want_rank(1, 2)) return std::nullopt;
            for (size_t i = 0; i < 2; ++i)
                if (in[i].dtype == DType::F32) {
                    c.fail("integer matmul takes u8 or i32 inputs");
                    return std::nullopt;
                }
            if (in[0].shape[1] != in[1].shape[0]) {
                c.fail("inner dimensions disagree");
                return std::nullopt;
            }
            return EdgeMeta{DType::I32, {in[0].shape[0], in[1].shape[1]}};
        }
        case OpKind::ConvInteger: {
            if (!c.want_inputs(2, 2) || !c.want_rank(0, 4) || !c.want_rank(1, 4)) return std::nullopt;
            for (size_t i = 0; i < 2; ++i)
                if (in[i].dtype == DType::F32) {
                    c.fail("integer conv takes u8 or i32 inputs");
                    return std::nullopt;
                }
            const Shape& x = in[0].shape;
            const Shape& w = in[1].shape;
            if (x[1] != w[1]) {
                c.fail("channel counts disagree");
                return std::nullopt;
            }
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            if (node.has_attr("kernel_shape")) {
                auto ks = node.attr_ints("kernel_shape", {});
                if (ks != std::vector<int64_t>{w[2], w[3]}) {
                    c.fail("kernel_shape disagrees with the weight tensor");
                    return std::nullopt;
                }
            }
            auto hw = pool_output_hw(c, x, {w[2], w[3]}, strides, pads);
            if (!hw) return std::nullopt;
            return EdgeMeta{DType::I32, {x[0], w[0], (*hw)[0], (*hw)[1]}};
        }
        case OpKind::BatchNormalization: {
            if (!c.want_inputs(5, 5)) return std::nullopt;
            for (size_t i = 0; i < 5; ++i)
                if (!c.want_dtype(i, DType::F32)) return std::nullopt;
            if (in[0].shape.size() < 2) {
                c.fail("input rank must be at least 2");
                return std::nullopt;
            }
            Shape chan{in[0].shape[1]};
            for (size_t i = 1; i < 5; ++i)
                if (in[i].shape != chan) {
                    c.fail("per-channel parameter has wrong shape");
                    return std::nullopt;
                }
            return in[0];
        }
        case OpKind::Cast: {
            if (!c.want_inputs(1, 1)) return std::nullopt;
            if (!node.has_attr("to")) {
                c.fail("to attribute required");
                return std::nullopt;
            }
            DType to = static_cast<DType>(node.attr_int("to", 0));
            if (in[0].dtype == DType::I32 && to == DType::U8) {
                c.fail("i32 to u8 cast is not expressible");
                return std::nullopt;
            }
            return EdgeMeta{to, in[0].shape};
        }
        case OpKind::QuantizeLinear: {
            if (!c.want_inputs(2, 2) || !c.want_dtype(0, DType::F32) || !c.want_dtype(1, DType::F32) ||
                !c.want_scalarish(1))
                return std::nullopt;
            return EdgeMeta{DType::U8, in[0].shape};
        }
        case OpKind::DequantizeLinear: {
            if (!c.want_inputs(2, 3)) return std::nullopt;
            if (in[0].dtype == DType::F32) {
                c.fail("input must be u8 or i32");
                return std::nullopt;
            }
            if (!c.want_dtype(1, DType::F32) || !c.want_scalarish(1)) return std::nullopt;
            if (in.size() == 3) {
                if (in[0].dtype != DType::U8) {
                    c.fail("zero point only applies to u8 input");
                    return std::nullopt;
                }
                if (!c.want_dtype(2, DType::U8) || !c.want_scalarish(2)) return std::nullopt;
            }
            return EdgeMeta{DType::F32, in[0].shape};
        }
    }
    c.fail("unsupported operation kind");
    return std::nullopt;
}

// ---------------------------------------------------------------------
// Validation and topological order
// ---------------------------------------------------------------------

inline std::vector<std::string> topo_order_ops(const Graph& g);

inline std::vector<Diagnostic> validate_graph(const Graph& g) {
    std::vector<Diagnostic> diags;
    std::map<std::string, EdgeMeta> meta;
    std::set<std::string> produced;

    auto produce = [&](const std::string& name, const EdgeMeta& m, const std::string& who) {
        if (produced.count(name)) {
            diags.push_back({who, "edge '" + name + "' has more than one producer"});
            return;
        }
        produced.insert(name);
        meta[name] = m;
    };

    for (const auto& name : g.graph_inputs) {
        auto it = g.edges.find(name);
        if (it == g.edges.end()) {
            diags.push_back({"", "graph input '" + name + "' has no declared metadata"});
            continue;
        }
        produce(name, it->second, "");
    }
    for (const auto& [name, t] : g.initializers) {
        if (static_cast<int64_t>(t.data.size()) != t.size())
            diags.push_back({"", "initializer '" + name + "' data length disagrees with its shape"});
        produce(name, EdgeMeta{t.dtype, t.shape}, "");
    }
    for (const auto& [name, m] : meta)
        for (int64_t d : m.shape)
            if (d <= 0) diags.push_back({"", "edge '" + name + "' has a non-positive extent"});

    // Kahn order over nodes, consuming only defined edges; leftover nodes
    // indicate a cycle or a dangling input.
    std::set<std::string> seen_ids;
    for (const auto& n : g.nodes) {
        if (!seen_ids.insert(n.id).second) diags.push_back({n.id, "duplicate node id"});
        if (n.outputs.size() != 1) diags.push_back({n.id, "nodes must produce exactly one output"});
    }

    std::set<size_t> pending;
    for (size_t i = 0; i < g.nodes.size(); ++i) pending.insert(i);
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto it = pending.begin(); it != pending.end();) {
            const OpNode& n = g.nodes[*it];
            bool ready = true;
            for (const auto& in : n.inputs)
                if (!produced.count(in)) ready = false;
            if (!ready) {
                ++it;
                continue;
            }
            std::vector<EdgeMeta> in_meta;
            for (const auto& in : n.inputs) in_meta.push_back(meta[in]);
            auto out = infer_node_output(n, in_meta, diags);
            if (out && !n.outputs.empty()) {
                for (int64_t d : out->shape)
                    if (d <= 0) diags.push_back({n.id, "output has a non-positive extent"});
                produce(n.outputs[0], *out, n.id);
            } else if (!out && !n.outputs.empty()) {
                // keep downstream nodes checkable: assume declared meta if any
                auto declared = g.edges.find(n.outputs[0]);
                if (declared != g.edges.end()) produce(n.outputs[0], declared->second, n.id);
            }
            it = pending.erase(it);
            progress = true;
        }
    }
    for (size_t i : pending) {
        const OpNode& n = g.nodes[i];
        bool dangling = false;
        for (const auto& in : n.inputs) {
            bool ever_produced = produced.count(in) || g.edges.count(in);
            bool producible = false;
            for (const auto& m : g.nodes)
                if (!m.outputs.empty() && m.outputs[0] == in) producible = true;
            if (!producible && !ever_produced) {
                diags.push_back({n.id, "input edge '" + in + "' is never produced"});
                dangling = true;
            }
        }
        if (!dangling) diags.push_back({n.id, "node participates in a cycle"});
    }

    for (const auto& out : g.graph_outputs) {
        if (!produced.count(out)) {
            diags.push_back({"", "graph output '" + out + "' is never produced"});
            continue;
        }
        auto declared = g.edges.find(out);
        if (declared != g.edges.end() && !(declared->second == meta[out]))
            diags.push_back({"", "graph output '" + out + "' metadata disagrees with inference"});
    }
    return diags;
}

// Populates g.edges with inferred metadata; call after validate_graph is clean.
inline void infer_all_edges(Graph& g) {
    std::vector<Diagnostic> diags;
    std::map<std::string, EdgeMeta> meta;
    for (const auto& name : g.graph_inputs) meta[name] = g.edges.at(name);
    for (const auto& [name, t] : g.initializers) meta[name] = EdgeMeta{t.dtype, t.shape};
    for (const auto& id : topo_order_ops(g)) {
        const OpNode* n = g.find_node(id);
        std::vector<EdgeMeta> in_meta;
        for (const auto& in : n->inputs) in_meta.push_back(meta.at(in));
        auto out = infer_node_output(*n, in_meta, diags);
        if (!out) throw std::runtime_error("shape inference failed on validated graph");
        meta[n->outputs[0]] = *out;
    }
    for (auto& [name, m] : meta) g.edges[name] = m;
}

// Deterministic topological order: Kahn's algorithm, ties broken by
// ascending node id.
inline std::vector<std::string> topo_order_ops(const Graph& g) {
    std::map<std::string, size_t> producer; // edge -> node index
    for (size_t i = 0; i < g.nodes.size(); ++i)
        for (const auto& out : g.nodes[i].outputs) producer[out] = i;
    std::set<std::string> primal(g.graph_inputs.begin(), g.graph_inputs.end());
    for (const auto& [name, t] : g.initializers) primal.insert(name);

    std::vector<int> indeg(g.nodes.size(), 0);
    std::vector<std::vector<size_t>> succ(g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        for (const auto& in : g.nodes[i].inputs) {
            if (primal.count(in)) continue;
            auto it = producer.find(in);
            if (it == producer.end()) throw std::runtime_error("dangling edge: " + in);
            succ[it->second].push_back(i);
            indeg[i] += 1;
        }
    }
    auto cmp = [&](size_t a, size_t b) { return g.nodes[a].id > g.nodes[b].id; };
    std::priority_queue<size_t, std::vector<size_t>, decltype(cmp)> ready(cmp);
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<std::string> order;
    while (!ready.empty()) {
        size_t i = ready.top();
        ready.pop();
        order.push_back(g.nodes[i].id);
        for (size_t s : succ[i])
            if (--indeg[s] == 0) ready.push(s);
    }
    if (order.size() != g.nodes.size()) throw std::runtime_error("graph contains a cycle");
    return order;
}

} // namespace graphpin
