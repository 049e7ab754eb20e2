#pragma once

#include <chrono>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "graphpin/corpus.hpp"
#include "graphpin/simulate.hpp"

// Experiment drivers: the cross-evaluator consistency suites, the branch
// size sweep, profiling, and the two-phase memory comparison. Counts are
// the acceptance-bearing outputs; wall times are advisory.

namespace graphpin::harness {

struct SuiteResult {
    std::string name;
    uint64_t cases = 0;
    uint64_t failures = 0;
    double seconds = 0.0;
    std::string detail;

    bool pass() const { return failures == 0; }
};

namespace timing {
inline double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
} // namespace timing

// ---------------------------------------------------------------------
// Suite 1: the contract arithmetic against the reference path, corner
// cases plus bulk seeded random tuples.
// ---------------------------------------------------------------------

inline SuiteResult suite_bop_contract(uint64_t random_tuples = 1000000, uint64_t seed = 0xA5A5) {
    SuiteResult r;
    r.name = "bop-contract";
    double t0 = timing::now_s();
    for (int ki = 0; ki < kBopKindCount; ++ki) {
        BopKind k = static_cast<BopKind>(ki);
        if (!bop_is_f32_involved(k)) continue;
        for (const auto& cc : numerics::gen_corner_cases(k)) {
            r.cases += 1;
            if (numerics::eval_bop_reference(cc.kind, cc.operands) !=
                numerics::eval_bop_contract(cc.kind, cc.operands))
                r.failures += 1;
        }
    }
    uint64_t per_kind = random_tuples / kBopKindCount + 1;
    for (int ki = 0; ki < kBopKindCount; ++ki) {
        BopKind k = static_cast<BopKind>(ki);
        for (uint64_t i = 0; i < per_kind; ++i) {
            auto ops = numerics::random_operands(k, seed);
            r.cases += 1;
            if (numerics::eval_bop_reference(k, ops) != numerics::eval_bop_contract(k, ops)) r.failures += 1;
        }
    }
    r.seconds = timing::now_s() - t0;
    return r;
}

// ---------------------------------------------------------------------
// Suite 2: operation kernels against their lowered circuits, corner and
// random instances per supported kind.
// ---------------------------------------------------------------------

namespace instance_gen {

struct OpInstance {
    OpNode node;
    std::vector<EdgeMeta> meta;
};

inline int64_t dim(uint64_t& seed, int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(numerics::splitmix64(seed) % static_cast<uint64_t>(hi - lo + 1));
}

inline OpInstance random_instance(OpKind kind, uint64_t& seed) {
    OpInstance inst;
    inst.node.id = "n";
    inst.node.kind = kind;
    auto& attrs = inst.node.attributes;
    switch (kind) {
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul:
        case OpKind::Div:
        case OpKind::Min:
        case OpKind::Max: {
            Shape a = {dim(seed, 1, 4), dim(seed, 1, 4), dim(seed, 1, 3)};
            Shape b;
            size_t drop = numerics::splitmix64(seed) % 3;
            for (size_t i = drop; i < a.size(); ++i)
                b.push_back(numerics::splitmix64(seed) % 2 ? a[i] : 1);
            inst.meta = {{DType::F32, a}, {DType::F32, b}};
            break;
        }
        case OpKind::Relu: {
            inst.meta = {{DType::F32, {dim(seed, 1, 40)}}};
            break;
        }
        case OpKind::Clip: {
            attrs["min"] = -0.5f - static_cast<float>(numerics::splitmix64(seed) % 4);
            attrs["max"] = 0.5f + static_cast<float>(numerics::splitmix64(seed) % 4);
            inst.meta = {{DType::F32, {dim(seed, 1, 6), dim(seed, 1, 6)}}};
            break;
        }
        case OpKind::MaxPool:
        case OpKind::AveragePool: {
            int64_t kh = dim(seed, 1, 3), kw = dim(seed, 1, 3);
            attrs["kernel_shape"] = std::vector<int64_t>{kh, kw};
            attrs["strides"] = std::vector<int64_t>{dim(seed, 1, 2), dim(seed, 1, 2)};
            if (kind == OpKind::MaxPool && kh > 1 && kw > 1 && numerics::splitmix64(seed) % 2)
                attrs["pads"] = std::vector<int64_t>{1, 1, 1, 1};
            inst.meta = {{DType::F32, {1, dim(seed, 1, 2), kh + dim(seed, 0, 4), kw + dim(seed, 0, 4)}}};
            break;
        }
        case OpKind::ReduceSum:
        case OpKind::ReduceMax: {
            Shape s = {dim(seed, 1, 4), dim(seed, 1, 4), dim(seed, 1, 4)};
            std::vector<int64_t> axes;
            for (int64_t a = 0; a < 3; ++a)
                if (numerics::splitmix64(seed) % 2) axes.push_back(a);
            if (!axes.empty()) attrs["axes"] = axes;
            attrs["keepdims"] = static_cast<int64_t>(numerics::splitmix64(seed) % 2);
            inst.meta = {{DType::F32, s}};
            break;
        }
        case OpKind::MatMul: {
            int64_t mm = dim(seed, 1, 4), kk = dim(seed, 1, 5), nn = dim(seed, 1, 4);
            if (numerics::splitmix64(seed) % 2) {
                inst.meta = {{DType::F32, {mm, kk}}, {DType::F32, {kk, nn}}};
            } else {
                inst.meta = {{DType::F32, {dim(seed, 1, 2), mm, kk}}, {DType::F32, {kk, nn}}};
            }
            break;
        }
        case OpKind::Gemm: {
            int64_t mm = dim(seed, 1, 4), kk = dim(seed, 1, 5), nn = dim(seed, 1, 4);
            bool ta = numerics::splitmix64(seed) % 2, tb = numerics::splitmix64(seed) % 2;
            attrs["transA"] = static_cast<int64_t>(ta);
            attrs["transB"] = static_cast<int64_t>(tb);
            attrs["alpha"] = 0.25f * static_cast<float>(dim(seed, 1, 8));
            attrs["beta"] = 0.25f * static_cast<float>(dim(seed, 0, 8));
            Shape sa = ta ? Shape{kk, mm} : Shape{mm, kk};
            Shape sb = tb ? Shape{nn, kk} : Shape{kk, nn};
            Shape sc = numerics::splitmix64(seed) % 2 ? Shape{nn} : Shape{mm, nn};
            inst.meta = {{DType::F32, sa}, {DType::F32, sb}, {DType::F32, sc}};
            break;
        }
        case OpKind::MatMulInteger: {
            int64_t mm = dim(seed, 1, 4), kk = dim(seed, 1, 5), nn = dim(seed, 1, 4);
            DType da = numerics::splitmix64(seed) % 2 ? DType::U8 : DType::I32;
            DType db = numerics::splitmix64(seed) % 2 ? DType::U8 : DType::I32;
            inst.meta = {{da, {mm, kk}}, {db, {kk, nn}}};
            break;
        }
        case OpKind::ConvInteger: {
            int64_t kh = dim(seed, 1, 3), kw = dim(seed, 1, 3), c = dim(seed, 1, 2), f = dim(seed, 1, 2);
            attrs["strides"] = std::vector<int64_t>{dim(seed, 1, 2), dim(seed, 1, 2)};
            if (numerics::splitmix64(seed) % 2 && kh > 1 && kw > 1)
                attrs["pads"] = std::vector<int64_t>{1, 0, 0, 1};
            DType da = numerics::splitmix64(seed) % 2 ? DType::U8 : DType::I32;
            DType db = numerics::splitmix64(seed) % 2 ? DType::U8 : DType::I32;
            inst.meta = {{da, {1, c, kh + dim(seed, 0, 3), kw + dim(seed, 0, 3)}}, {db, {f, c, kh, kw}}};
            break;
        }
        case OpKind::BatchNormalization: {
            int64_t c = dim(seed, 1, 4);
            attrs["epsilon"] = 1e-5f * static_cast<float>(dim(seed, 1, 1000));
            inst.meta = {{DType::F32, {dim(seed, 1, 2), c, dim(seed, 1, 4)}},
                         {DType::F32, {c}},
                         {DType::F32, {c}},
                         {DType::F32, {c}},
                         {DType::F32, {c}}};
            break;
        }
        case OpKind::Cast: {
            struct Combo {
                DType from, to;
            };
            static const Combo combos[] = {{DType::F32, DType::F32}, {DType::F32, DType::I32},
                                           {DType::F32, DType::U8},  {DType::I32, DType::F32},
                                           {DType::I32, DType::I32}, {DType::U8, DType::F32},
                                           {DType::U8, DType::I32},  {DType::U8, DType::U8}};
            Combo c = combos[numerics::splitmix64(seed) % 8];
            attrs["to"] = static_cast<int64_t>(c.to);
            inst.meta = {{c.from, {dim(seed, 1, 30)}}};
            break;
        }
        case OpKind::QuantizeLinear: {
            inst.meta = {{DType::F32, {dim(seed, 1, 20)}}, {DType::F32, {}}};
            break;
        }
        case OpKind::DequantizeLinear: {
            if (numerics::splitmix64(seed) % 2) {
                inst.meta = {{DType::U8, {dim(seed, 1, 20)}}, {DType::F32, {}}, {DType::U8, {}}};
            } else {
                inst.meta = {{DType::I32, {dim(seed, 1, 20)}}, {DType::F32, {}}};
            }
            break;
        }
    }
    return inst;
}

// Tensor fills: `corner` draws from the f32 special pool and integer edge
// values; scale-like scalars stay benign so quantization stays meaningful.
inline Tensor fill(DType dt, const Shape& shape, uint64_t& seed, bool corner, bool is_scale) {
    Tensor t(dt, shape);
    const auto& pool = numerics::f32_special_pool();
    for (size_t i = 0; i < t.data.size(); ++i) {
        uint64_t r = numerics::splitmix64(seed);
        if (is_scale) {
            t.data[i] = f32_to_bits(0.015625f * static_cast<float>(1 + r % 64));
            continue;
        }
        switch (dt) {
            case DType::F32:
                t.data[i] = corner ? pool[r % pool.size()] : static_cast<uint32_t>(r);
                break;
            case DType::I32:
                t.data[i] = corner && (r & 1) ? (r & 2 ? 0x7FFFFFFFu : 0x80000000u) : static_cast<uint32_t>(r);
                break;
            case DType::U8:
                t.data[i] = corner && (r & 1) ? (r & 2 ? 255 : 0) : (r & 0xFF);
                break;
        }
    }
    return t;
}

} // namespace instance_gen

inline SuiteResult suite_op_bop(int corner_instances = 20, int random_instances = 1000, uint64_t seed = 0xB0B) {
    SuiteResult r;
    r.name = "op-bop";
    double t0 = timing::now_s();
    for (const auto& [kind, name] : op_kind_names()) {
        (void)name;
        int total = corner_instances + random_instances;
        for (int i = 0; i < total; ++i) {
            bool corner = i < corner_instances;
            auto inst = instance_gen::random_instance(kind, seed);
            std::vector<Tensor> tensors;
            for (size_t s = 0; s < inst.meta.size(); ++s) {
                bool is_scale = (kind == OpKind::QuantizeLinear || kind == OpKind::DequantizeLinear) && s == 1;
                tensors.push_back(instance_gen::fill(inst.meta[s].dtype, inst.meta[s].shape, seed, corner, is_scale));
            }
            std::vector<const Tensor*> tptr;
            for (auto& t : tensors) tptr.push_back(&t);
            std::vector<Diagnostic> diags;
            auto out_meta = infer_node_output(inst.node, inst.meta, diags);
            if (!out_meta) throw std::logic_error("generated instance failed inference");
            Tensor via_kernel = kernels::eval_node(inst.node, tptr, *out_meta, 1);
            auto circ = CircuitCache::instance().get_or_lower(inst.node, inst.meta);
            std::vector<ScalarValue> flat;
            for (const auto& t : tensors)
                for (int64_t e = 0; e < t.size(); ++e) flat.push_back(t.at(e));
            BopTrace tr = eval_circuit(circ, flat);
            auto outs = tr.outputs();
            r.cases += 1;
            bool ok = static_cast<int64_t>(outs.size()) == via_kernel.size();
            for (int64_t e = 0; ok && e < via_kernel.size(); ++e) ok = outs[e].bits == via_kernel.data[e];
            if (!ok) r.failures += 1;
        }
    }
    r.seconds = timing::now_s() - t0;
    return r;
}

// ---------------------------------------------------------------------
// Suite 3: whole-graph native evaluation against the operation trace,
// across thread counts and seeded input batches.
// ---------------------------------------------------------------------

inline SuiteResult suite_native_op(int batches = 100, uint64_t seed = 0xC0C0) {
    SuiteResult r;
    r.name = "native-op";
    double t0 = timing::now_s();
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 2) hw = 2;
    std::vector<int> threads = {1, 2, hw};
    for (const auto& m : build_corpus()) {
        for (int b = 0; b < batches; ++b) {
            std::map<std::string, Tensor> inputs;
            for (const auto& name : m.graph.graph_inputs) {
                const auto& meta = m.graph.edges.at(name);
                inputs[name] = corpus_detail::seeded_tensor(meta.dtype, meta.shape,
                                                            seed ^ (static_cast<uint64_t>(b) << 17));
            }
            OpTrace trace = eval_graph_ops(m.graph, inputs);
            for (int t : threads) {
                r.cases += 1;
                if (eval_graph_native(m.graph, inputs, 32, t).result_digest != trace.result_digest)
                    r.failures += 1;
            }
        }
    }
    r.seconds = timing::now_s() - t0;
    return r;
}

struct ConsistencyReport {
    std::vector<SuiteResult> suites;

    bool all_pass() const {
        for (const auto& s : suites)
            if (!s.pass()) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : suites)
            out.push_back({{"suite", s.name},
                           {"cases", s.cases},
                           {"failures", s.failures},
                           {"seconds", s.seconds}});
        return out;
    }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& s : suites)
            os << (s.pass() ? "[PASS] " : "[FAIL] ") << s.name << ": " << s.cases << " cases, " << s.failures
               << " failures (" << s.seconds << " s)\n";
        return os.str();
    }
};

inline ConsistencyReport run_consistency(uint64_t random_tuples = 1000000, int op_corner = 20, int op_random = 1000,
                                         int batches = 100) {
    ConsistencyReport rep;
    rep.suites.push_back(suite_bop_contract(random_tuples));
    rep.suites.push_back(suite_op_bop(op_corner, op_random));
    rep.suites.push_back(suite_native_op(batches));
    return rep;
}

// ---------------------------------------------------------------------
// Branch-size sweep
// ---------------------------------------------------------------------

struct SweepRow {
    uint32_t k = 0;
    uint64_t p1_leaves = 0;
    int p1_rounds = 0;
    int p2_rounds = 0;
    double tree_build_ms = 0.0;
    uint64_t transcript_bytes = 0;
    Tick ticks = 0;
};

inline std::vector<SweepRow> run_sweep_k(const CorpusModel& m, const std::vector<uint32_t>& ks,
                                         uint64_t fault_op = 700, int timing_reps = 31) {
    std::vector<SweepRow> rows;
    for (uint32_t k : ks) {
        ProtocolParams params;
        params.k = k;
        TaskSetup setup = build_task_setup(m.graph, m.sample_inputs, params, m.id);
        SweepRow row;
        row.k = k;
        row.p1_leaves = setup.record.n1;

        // median wall time to hash the concrete phase-1 tree from its leaves
        PartyData honest(setup);
        std::vector<std::vector<uint8_t>> leaves = honest.p1c().body.leaves;
        std::vector<double> times;
        for (int rep = 0; rep < timing_reps; ++rep) {
            auto copy = leaves;
            double t0 = timing::now_s();
            MerkleTree t = build_tree(std::move(copy), k, TreeKind::P1C);
            times.push_back((timing::now_s() - t0) * 1000.0);
        }
        std::sort(times.begin(), times.end());
        row.tree_build_ms = times[times.size() / 2];

        SubmitterSpec sub;
        sub.kind = SubmitterSpec::Kind::WrongResult;
        sub.fault = {true, fault_op % setup.n1(), 1, 1};
        SimResult r = run_dispute_simulation(setup, sub, {{}},
                                             std::make_shared<PartyData>(honest));
        row.p1_rounds = r.max_p1_rounds;
        row.p2_rounds = r.max_p2_rounds;
        row.transcript_bytes = r.message_bytes;
        row.ticks = r.ticks;
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"k", r.k},
                       {"p1_leaves", r.p1_leaves},
                       {"p1_rounds", r.p1_rounds},
                       {"p2_rounds", r.p2_rounds},
                       {"tree_build_ms", r.tree_build_ms},
                       {"transcript_bytes", r.transcript_bytes},
                       {"ticks", r.ticks}});
    return out;
}

inline std::string sweep_to_text(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "k    p1_rounds  p2_rounds  tree_build_ms  transcript_bytes\n";
    for (const auto& r : rows) {
        os << r.k << (r.k < 10 ? "    " : "   ") << r.p1_rounds << "          " << r.p2_rounds << "          "
           << r.tree_build_ms << "           " << r.transcript_bytes << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------
// Two-phase vs one-phase trace footprint
// ---------------------------------------------------------------------

struct MemoryComparison {
    uint64_t n1 = 0;
    uint64_t max_n2 = 0;
    uint64_t total_bops = 0;
    int64_t two_phase_peak = 0; // live trace items during a full dispute
    int64_t one_phase_peak = 0; // live items when the whole graph is one trace
    double ratio() const { return two_phase_peak ? static_cast<double>(one_phase_peak) / two_phase_peak : 0.0; }
};

inline MemoryComparison run_memory_comparison(const CorpusModel& m) {
    MemoryComparison cmp;
    ProtocolParams params;
    TaskSetup setup = build_task_setup(m.graph, m.sample_inputs, params, m.id);
    cmp.n1 = setup.n1();
    cmp.max_n2 = setup.max_n2;
    for (const auto& c : setup.circuits) cmp.total_bops += c->vertices.size();

    {
        int64_t floor0 = TraceStats::live().load();
        TraceStats::reset_peak();
        // the dispute's disputed operation is the largest one
        uint64_t worst = 0;
        for (uint64_t i = 0; i < setup.circuits.size(); ++i)
            if (setup.circuits[i]->vertices.size() == cmp.max_n2) worst = i;
        SubmitterSpec sub;
        sub.kind = SubmitterSpec::Kind::WrongResult;
        sub.fault = {true, worst, cmp.max_n2 / 2, 1};
        run_dispute_simulation(setup, sub, {{}});
        cmp.two_phase_peak = TraceStats::peak().load() - floor0;
    }
    {
        // one-phase contrast: both disputing parties materialize the whole
        // graph as a single concrete sequence
        int64_t floor0 = TraceStats::live().load();
        TraceStats::reset_peak();
        auto whole = std::make_shared<Circuit>(lower_graph(m.graph));
        std::map<std::string, Tensor> store;
        eval_detail::bind_inputs(m.graph, m.sample_inputs, store);
        std::vector<ScalarValue> flat;
        for (const auto& name : source_order(m.graph)) {
            const Tensor& t = store.at(name);
            for (int64_t i = 0; i < t.size(); ++i) flat.push_back(t.at(i));
        }
        BopTrace submitter_side = eval_circuit(whole, flat);
        BopTrace verifier_side = eval_circuit(whole, flat);
        cmp.one_phase_peak = TraceStats::peak().load() - floor0;
    }
    return cmp;
}

// ---------------------------------------------------------------------
// Profile report
// ---------------------------------------------------------------------

inline nlohmann::json profile_to_json(const GraphProfile& p) {
    nlohmann::json ops = nlohmann::json::array();
    for (const auto& op : p.per_op)
        ops.push_back({{"id", op.node_id},
                       {"kind", op_kind_name(op.kind)},
                       {"bops", op.bop_count},
                       {"dedup_hit", op.dedup_hit},
                       {"gen_ms", op.gen_ms}});
    return {{"ops", ops},
            {"op_count", p.op_count},
            {"bop_before_dedup", p.bop_before},
            {"unique_ops", p.unique_ops},
            {"bop_after_dedup", p.bop_after}};
}

inline std::string profile_to_text(const GraphProfile& p) {
    std::ostringstream os;
    os << "op    kind    #BOP    dedup    gen_ms\n";
    for (const auto& op : p.per_op)
        os << op.node_id << "  " << op_kind_name(op.kind) << "  " << op.bop_count << "  "
           << (op.dedup_hit ? "hit" : "new") << "  " << op.gen_ms << "\n";
    os << "total: " << p.op_count << " ops, " << p.bop_before << " bops before dedup, " << p.bop_after
       << " after (" << p.unique_ops << " unique)\n";
    return os.str();
}

} // namespace graphpin::harness
