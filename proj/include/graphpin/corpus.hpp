#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphpin/graph.hpp"
#include "graphpin/model_io.hpp"
#include "graphpin/numerics.hpp"

// The bundled synthetic models: deterministic, seeded, desk-scale.

namespace graphpin {

struct CorpusModel {
    std::string id;
    Graph graph;
    std::map<std::string, Tensor> sample_inputs;
};

namespace corpus_detail {

// Seeded values kept in tame ranges so traces stay finite but exercise
// rounding. f32 in [-4, 4), i32 in [-100, 100], u8 anywhere.
inline Tensor seeded_tensor(DType dt, Shape shape, uint64_t seed) {
    Tensor t(dt, std::move(shape));
    for (size_t i = 0; i < t.data.size(); ++i) {
        uint64_t r = numerics::splitmix64(seed);
        switch (dt) {
            case DType::F32: {
                float f = static_cast<float>(static_cast<int64_t>(r % 8192) - 4096) / 1024.0f;
                t.data[i] = f32_to_bits(f);
                break;
            }
            case DType::I32: t.data[i] = static_cast<uint32_t>(static_cast<int64_t>(r % 201) - 100); break;
            case DType::U8: t.data[i] = static_cast<uint32_t>(r & 0xFF); break;
        }
    }
    return t;
}

inline OpNode node(std::string id, OpKind kind, std::vector<std::string> ins, std::vector<std::string> outs,
                   std::map<std::string, AttrValue> attrs = {}) {
    OpNode n;
    n.id = std::move(id);
    n.kind = kind;
    n.inputs = std::move(ins);
    n.outputs = std::move(outs);
    n.attributes = std::move(attrs);
    return n;
}

inline void finalize(Graph& g) {
    auto diags = validate_graph(g);
    if (!diags.empty()) throw std::logic_error("corpus model invalid: " + diags[0].message);
    infer_all_edges(g);
}

} // namespace corpus_detail

// The worked 2x2 by 2x1 integer matrix multiplication.
inline CorpusModel corpus_fig5() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "fig5";
    Graph& g = m.graph;
    g.graph_inputs = {"a", "b"};
    g.graph_outputs = {"y"};
    g.edges["a"] = {DType::I32, {2, 2}};
    g.edges["b"] = {DType::I32, {2, 1}};
    g.edges["y"] = {DType::I32, {2, 1}};
    g.nodes.push_back(node("mm", OpKind::MatMulInteger, {"a", "b"}, {"y"}));
    finalize(g);
    Tensor a(DType::I32, {2, 2}), b(DType::I32, {2, 1});
    for (int i = 0; i < 4; ++i) a.data[i] = static_cast<uint32_t>(i + 1);
    b.data[0] = 5;
    b.data[1] = 6;
    m.sample_inputs = {{"a", a}, {"b", b}};
    return m;
}

// Gemm -> Relu -> Gemm -> ReduceSum at 16x16, large enough that exhaustive
// single-fault sweeps cover more than 10^4 basic operations.
inline CorpusModel corpus_mini_mlp() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "mini-mlp";
    Graph& g = m.graph;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"y"};
    g.edges["x"] = {DType::F32, {16, 16}};
    g.edges["y"] = {DType::F32, {}};
    g.initializers["w1"] = seeded_tensor(DType::F32, {16, 16}, 11);
    g.initializers["c1"] = seeded_tensor(DType::F32, {16}, 12);
    g.initializers["w2"] = seeded_tensor(DType::F32, {16, 16}, 13);
    g.initializers["c2"] = seeded_tensor(DType::F32, {16}, 14);
    g.nodes.push_back(node("g1", OpKind::Gemm, {"x", "w1", "c1"}, {"h1"},
                           {{"alpha", 1.0f}, {"beta", 1.0f}}));
    g.nodes.push_back(node("r1", OpKind::Relu, {"h1"}, {"h2"}));
    g.nodes.push_back(node("g2", OpKind::Gemm, {"h2", "w2", "c2"}, {"h3"},
                           {{"alpha", 0.5f}, {"beta", 1.0f}}));
    g.nodes.push_back(node("rs", OpKind::ReduceSum, {"h3"}, {"y"}, {{"keepdims", int64_t{0}}}));
    finalize(g);
    m.sample_inputs = {{"x", seeded_tensor(DType::F32, {16, 16}, 15)}};
    return m;
}

// Quantize -> ConvInteger -> Dequantize -> Relu -> MaxPool -> MatMul.
inline CorpusModel corpus_mini_cnn() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "mini-cnn";
    Graph& g = m.graph;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"y"};
    g.edges["x"] = {DType::F32, {1, 1, 12, 12}};
    g.edges["y"] = {DType::F32, {1, 2, 5, 3}};
    Tensor scale(DType::F32, Shape{});
    scale.data[0] = f32_to_bits(0.05f);
    g.initializers["qs"] = scale;
    Tensor dscale(DType::F32, Shape{});
    dscale.data[0] = f32_to_bits(0.0125f);
    g.initializers["dqs"] = dscale;
    g.initializers["w"] = seeded_tensor(DType::U8, {2, 1, 3, 3}, 21);
    g.initializers["mw"] = seeded_tensor(DType::F32, {5, 3}, 22);
    g.nodes.push_back(node("q", OpKind::QuantizeLinear, {"x", "qs"}, {"xq"}));
    g.nodes.push_back(node("conv", OpKind::ConvInteger, {"xq", "w"}, {"ci"}));
    g.nodes.push_back(node("dq", OpKind::DequantizeLinear, {"ci", "dqs"}, {"cf"}));
    g.nodes.push_back(node("relu", OpKind::Relu, {"cf"}, {"cr"}));
    g.nodes.push_back(node("pool", OpKind::MaxPool, {"cr"}, {"cp"},
                           {{"kernel_shape", std::vector<int64_t>{2, 2}}, {"strides", std::vector<int64_t>{2, 2}}}));
    g.nodes.push_back(node("mm", OpKind::MatMul, {"cp", "mw"}, {"y"}));
    finalize(g);
    m.sample_inputs = {{"x", seeded_tensor(DType::F32, {1, 1, 12, 12}, 23)}};
    return m;
}

// Deep reduction chains: strict sequencing stress.
inline CorpusModel corpus_reduce_stress() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "reduce-stress";
    Graph& g = m.graph;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"y"};
    g.edges["x"] = {DType::F32, {16, 16, 16}};
    g.edges["y"] = {DType::F32, {}};
    g.nodes.push_back(node("r0", OpKind::ReduceSum, {"x"}, {"t0"},
                           {{"axes", std::vector<int64_t>{2}}, {"keepdims", int64_t{0}}}));
    g.nodes.push_back(node("r1", OpKind::ReduceSum, {"t0"}, {"t1"},
                           {{"axes", std::vector<int64_t>{1}}, {"keepdims", int64_t{0}}}));
    g.nodes.push_back(node("r2", OpKind::ReduceMax, {"t1"}, {"t2"},
                           {{"axes", std::vector<int64_t>{0}}, {"keepdims", int64_t{1}}}));
    g.nodes.push_back(node("r3", OpKind::ReduceSum, {"t2"}, {"y"}, {{"keepdims", int64_t{0}}}));
    finalize(g);
    m.sample_inputs = {{"x", seeded_tensor(DType::F32, {16, 16, 16}, 31)}};
    return m;
}

// Every broadcasting elementwise kind plus Clip and BatchNormalization.
inline CorpusModel corpus_broadcast() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "broadcast";
    Graph& g = m.graph;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"y"};
    g.edges["x"] = {DType::F32, {4, 3, 2}};
    g.edges["y"] = {DType::F32, {4, 3, 2}};
    g.initializers["b32"] = seeded_tensor(DType::F32, {3, 2}, 41);
    g.initializers["b2"] = seeded_tensor(DType::F32, {2}, 42);
    g.initializers["bs"] = seeded_tensor(DType::F32, {}, 43);
    g.initializers["b1"] = seeded_tensor(DType::F32, {1}, 44);
    g.initializers["gam"] = seeded_tensor(DType::F32, {3}, 45);
    g.initializers["bet"] = seeded_tensor(DType::F32, {3}, 46);
    g.initializers["mu"] = seeded_tensor(DType::F32, {3}, 47);
    Tensor var(DType::F32, {3});
    for (int i = 0; i < 3; ++i) var.data[i] = f32_to_bits(0.5f + 0.25f * static_cast<float>(i));
    g.initializers["var"] = var;
    g.nodes.push_back(node("add", OpKind::Add, {"x", "b32"}, {"t0"}));
    g.nodes.push_back(node("mul", OpKind::Mul, {"t0", "b2"}, {"t1"}));
    g.nodes.push_back(node("sub", OpKind::Sub, {"t1", "bs"}, {"t2"}));
    g.nodes.push_back(node("div", OpKind::Div, {"t2", "b1"}, {"t3"}));
    g.nodes.push_back(node("min", OpKind::Min, {"t3", "b32"}, {"t4"}));
    g.nodes.push_back(node("max", OpKind::Max, {"t4", "b2"}, {"t5"}));
    g.nodes.push_back(node("clip", OpKind::Clip, {"t5"}, {"t6"}, {{"min", -2.5f}, {"max", 2.5f}}));
    g.nodes.push_back(node("bn", OpKind::BatchNormalization, {"t6", "gam", "bet", "mu", "var"}, {"y"},
                           {{"epsilon", 1e-4f}}));
    finalize(g);
    m.sample_inputs = {{"x", seeded_tensor(DType::F32, {4, 3, 2}, 48)}};
    return m;
}

// A 1024-operation chain, giving phase-1 trees with exactly 1024 leaves.
inline CorpusModel corpus_chain_1024() {
    using namespace corpus_detail;
    CorpusModel m;
    m.id = "chain-1024";
    Graph& g = m.graph;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"y"};
    g.edges["x"] = {DType::F32, {4}};
    g.edges["y"] = {DType::F32, {4}};
    g.initializers["w"] = seeded_tensor(DType::F32, {4}, 51);
    std::string cur = "x";
    for (int i = 0; i < 1024; ++i) {
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "n%04d", i);
        std::string out = i + 1 == 1024 ? "y" : "e" + std::to_string(i);
        if (i % 2 == 0) {
            g.nodes.push_back(node(idbuf, OpKind::Add, {cur, "w"}, {out}));
        } else {
            g.nodes.push_back(node(idbuf, OpKind::Relu, {cur}, {out}));
        }
        cur = out;
    }
    finalize(g);
    m.sample_inputs = {{"x", seeded_tensor(DType::F32, {4}, 52)}};
    return m;
}

inline std::vector<CorpusModel> build_corpus() {
    return {corpus_fig5(), corpus_mini_mlp(), corpus_mini_cnn(), corpus_reduce_stress(), corpus_broadcast(),
            corpus_chain_1024()};
}

inline CorpusModel corpus_model(const std::string& id) {
    if (id == "fig5") return corpus_fig5();
    if (id == "mini-mlp") return corpus_mini_mlp();
    if (id == "mini-cnn") return corpus_mini_cnn();
    if (id == "reduce-stress") return corpus_reduce_stress();
    if (id == "broadcast") return corpus_broadcast();
    if (id == "chain-1024") return corpus_chain_1024();
    throw std::invalid_argument("unknown corpus model: " + id);
}

inline bool is_corpus_model(const std::string& id) {
    return id == "fig5" || id == "mini-mlp" || id == "mini-cnn" || id == "reduce-stress" || id == "broadcast" ||
           id == "chain-1024";
}

} // namespace graphpin
