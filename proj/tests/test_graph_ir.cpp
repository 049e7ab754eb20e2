#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphpin/corpus.hpp"
#include "graphpin/model_io.hpp"

using namespace graphpin;

namespace {

const char* kMinimalModel = R"({
  "version": 1,
  "inputs": [{"name": "x", "dtype": "f32", "shape": [3]}],
  "outputs": [{"name": "y", "dtype": "f32", "shape": [3]}],
  "nodes": [{"id": "r", "kind": "Relu", "attributes": {}, "inputs": ["x"], "outputs": ["y"]}]
})";

Graph chain3() {
    Graph g;
    g.graph_inputs = {"x"};
    g.graph_outputs = {"c_out"};
    g.edges["x"] = {DType::F32, {4}};
    g.edges["c_out"] = {DType::F32, {4}};
    OpNode a, b, c;
    a.id = "A";
    a.kind = OpKind::Relu;
    a.inputs = {"x"};
    a.outputs = {"a_out"};
    b.id = "B";
    b.kind = OpKind::Relu;
    b.inputs = {"a_out"};
    b.outputs = {"b_out"};
    c.id = "C";
    c.kind = OpKind::Relu;
    c.inputs = {"b_out"};
    c.outputs = {"c_out"};
    g.nodes = {a, b, c};
    return g;
}

} // namespace

TEST_CASE("minimal model loads: one node, two edges") {
    Graph g = load_model(kMinimalModel);
    CHECK(g.nodes.size() == 1);
    CHECK(g.edges.size() == 2);
    CHECK(g.nodes[0].kind == OpKind::Relu);
}

TEST_CASE("fig5 model structure") {
    CorpusModel m = corpus_fig5();
    CHECK(m.graph.nodes.size() == 1);
    CHECK(m.graph.graph_inputs.size() == 2);
    int64_t total = 0;
    for (const auto& name : m.graph.graph_inputs) total += shape_elems(m.graph.edges.at(name).shape);
    CHECK(total == 6); // the six scalar inputs grouped as two tensors
}

TEST_CASE("cycle is a validation error") {
    const char* cyclic = R"({
      "version": 1,
      "inputs": [{"name": "x", "dtype": "f32", "shape": [2]}],
      "outputs": [{"name": "out", "dtype": "f32", "shape": [2]}],
      "nodes": [
        {"id": "A", "kind": "Add", "attributes": {}, "inputs": ["x", "b_out"], "outputs": ["a_out"]},
        {"id": "B", "kind": "Relu", "attributes": {}, "inputs": ["a_out"], "outputs": ["b_out"]},
        {"id": "C", "kind": "Relu", "attributes": {}, "inputs": ["b_out"], "outputs": ["out"]}
      ]
    })";
    CHECK_THROWS_AS(load_model(cyclic), ValidationError);
}

TEST_CASE("malformed document is a parse error") {
    CHECK_THROWS_AS(load_model("{not json"), ParseError);
    CHECK_THROWS_AS(load_model(R"({"version": 2, "inputs": [], "outputs": [], "nodes": []})"), ParseError);
}

TEST_CASE("unknown op kind rejected") {
    const char* bad = R"({
      "version": 1,
      "inputs": [{"name": "x", "dtype": "f32", "shape": [2]}],
      "outputs": [{"name": "y", "dtype": "f32", "shape": [2]}],
      "nodes": [{"id": "n", "kind": "Softmax", "attributes": {}, "inputs": ["x"], "outputs": ["y"]}]
    })";
    CHECK_THROWS_AS(load_model(bad), ValidationError);
}

TEST_CASE("validate_graph diagnostics") {
    SUBCASE("valid 3-op chain is clean") {
        Graph g = chain3();
        CHECK(validate_graph(g).empty());
    }
    SUBCASE("matmul inner-dimension mismatch") {
        Graph g;
        g.graph_inputs = {"a", "b"};
        g.graph_outputs = {"y"};
        g.edges["a"] = {DType::F32, {2, 3}};
        g.edges["b"] = {DType::F32, {2, 1}};
        g.edges["y"] = {DType::F32, {2, 1}};
        OpNode n;
        n.id = "mm";
        n.kind = OpKind::MatMul;
        n.inputs = {"a", "b"};
        n.outputs = {"y"};
        g.nodes = {n};
        auto diags = validate_graph(g);
        REQUIRE(diags.size() == 1);
        CHECK(diags[0].node_id == "mm");
    }
    SUBCASE("dangling edge") {
        Graph g = chain3();
        g.nodes[1].inputs = {"nowhere"};
        auto diags = validate_graph(g);
        REQUIRE(!diags.empty());
        bool found = false;
        for (const auto& d : diags) found |= d.message.find("never produced") != std::string::npos;
        CHECK(found);
    }
    SUBCASE("zero extent rejected") {
        Graph g = chain3();
        g.edges["x"] = {DType::F32, {0}};
        CHECK(!validate_graph(g).empty());
    }
    SUBCASE("duplicate producer rejected") {
        Graph g = chain3();
        g.nodes[1].outputs = {"a_out"};
        CHECK(!validate_graph(g).empty());
    }
}

TEST_CASE("topo order") {
    SUBCASE("chain") {
        Graph g = chain3();
        CHECK(topo_order_ops(g) == std::vector<std::string>{"A", "B", "C"});
    }
    SUBCASE("diamond ties break by id") {
        Graph g;
        g.graph_inputs = {"x"};
        g.graph_outputs = {"y"};
        g.edges["x"] = {DType::F32, {2}};
        g.edges["y"] = {DType::F32, {2}};
        OpNode a, b, c, d;
        a.id = "A";
        a.kind = OpKind::Relu;
        a.inputs = {"x"};
        a.outputs = {"ao"};
        b.id = "B";
        b.kind = OpKind::Relu;
        b.inputs = {"ao"};
        b.outputs = {"bo"};
        c.id = "C";
        c.kind = OpKind::Relu;
        c.inputs = {"ao"};
        c.outputs = {"co"};
        d.id = "D";
        d.kind = OpKind::Add;
        d.inputs = {"bo", "co"};
        d.outputs = {"y"};
        g.nodes = {d, c, b, a}; // shuffled storage order
        CHECK(topo_order_ops(g) == std::vector<std::string>{"A", "B", "C", "D"});
    }
    SUBCASE("single node") {
        CorpusModel m = corpus_fig5();
        CHECK(topo_order_ops(m.graph) == std::vector<std::string>{"mm"});
    }
    SUBCASE("producers precede consumers on every corpus model") {
        for (const auto& m : build_corpus()) {
            auto order = topo_order_ops(m.graph);
            std::map<std::string, size_t> pos;
            for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
            std::map<std::string, std::string> producer;
            for (const auto& n : m.graph.nodes) producer[n.outputs[0]] = n.id;
            for (const auto& n : m.graph.nodes)
                for (const auto& in : n.inputs)
                    if (producer.count(in)) CHECK(pos.at(producer.at(in)) < pos.at(n.id));
        }
    }
}

TEST_CASE("model round-trip is structurally identical") {
    for (const auto& m : build_corpus()) {
        std::string text = save_model(m.graph);
        Graph g2 = load_model(text);
        CHECK(g2.nodes.size() == m.graph.nodes.size());
        CHECK(g2.graph_inputs == m.graph.graph_inputs);
        CHECK(g2.graph_outputs == m.graph.graph_outputs);
        REQUIRE(g2.initializers.size() == m.graph.initializers.size());
        for (const auto& [name, t] : m.graph.initializers) {
            REQUIRE(g2.initializers.count(name));
            CHECK(g2.initializers.at(name) == t); // bit-for-bit
        }
        for (size_t i = 0; i < g2.nodes.size(); ++i) {
            CHECK(g2.nodes[i].id == m.graph.nodes[i].id);
            CHECK(g2.nodes[i].kind == m.graph.nodes[i].kind);
            CHECK(g2.nodes[i].inputs == m.graph.nodes[i].inputs);
            CHECK(g2.nodes[i].attributes == m.graph.nodes[i].attributes);
        }
        // and the reserialization is byte-identical
        CHECK(save_model(g2) == text);
    }
}

TEST_CASE("corpus models validate cleanly; fuzzed mutations do not") {
    uint64_t seed = 77;
    for (const auto& m : build_corpus()) {
        CHECK(validate_graph(m.graph).empty());
        // mutate: retarget a random node input to an undefined edge
        if (m.graph.nodes.empty()) continue;
        for (int trial = 0; trial < 8; ++trial) {
            Graph g = m.graph;
            size_t ni = numerics::splitmix64(seed) % g.nodes.size();
            if (g.nodes[ni].inputs.empty()) continue;
            size_t si = numerics::splitmix64(seed) % g.nodes[ni].inputs.size();
            switch (numerics::splitmix64(seed) % 3) {
                case 0: g.nodes[ni].inputs[si] = "__undefined__"; break;
                case 1: g.nodes[ni].outputs[0] = g.nodes[ni].inputs[si]; break; // self-loop
                default: {
                    if (!g.initializers.empty()) {
                        // shape no longer covers the stored data
                        auto& t = g.initializers.begin()->second;
                        if (t.shape.empty()) {
                            t.shape.push_back(2);
                        } else {
                            t.shape[0] += 1;
                        }
                    } else {
                        g.nodes[ni].inputs[si] = "__undefined__";
                    }
                    break;
                }
            }
            CHECK(!validate_graph(g).empty());
        }
    }
}

TEST_CASE("input documents round-trip") {
    CorpusModel m = corpus_mini_mlp();
    std::string text = save_inputs(m.sample_inputs);
    auto back = load_inputs(text);
    REQUIRE(back.size() == m.sample_inputs.size());
    for (const auto& [name, t] : m.sample_inputs) CHECK(back.at(name) == t);
    // numeric-array form accepted too
    auto arr = load_inputs(R"({"x": {"dtype": "i32", "shape": [2], "data": [7, -3]}})");
    CHECK(arr.at("x").i32(1) == -3);
}
