#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "graphpin/circuit.hpp"
#include "graphpin/graph.hpp"
#include "graphpin/merkle.hpp"
#include "graphpin/numerics.hpp"

namespace graphpin {

// ---------------------------------------------------------------------
// Live trace accounting, used by the two-phase memory checks. Counts the
// number of concrete trace items (operation records and circuit VIs)
// currently resident, and the high-water mark.
// ---------------------------------------------------------------------

struct TraceStats {
    static std::atomic<int64_t>& live() {
        static std::atomic<int64_t> v{0};
        return v;
    }
    static std::atomic<int64_t>& peak() {
        static std::atomic<int64_t> v{0};
        return v;
    }
    static void add(int64_t n) {
        int64_t now = live().fetch_add(n) + n;
        int64_t p = peak().load();
        while (now > p && !peak().compare_exchange_weak(p, now)) {
        }
    }
    static void sub(int64_t n) { live().fetch_sub(n); }
    static void reset_peak() { peak().store(live().load()); }
};

class TraceCounterGuard {
  public:
    TraceCounterGuard() = default;
    explicit TraceCounterGuard(int64_t n) : n_(n) { TraceStats::add(n_); }
    TraceCounterGuard(const TraceCounterGuard& o) : n_(o.n_) { TraceStats::add(n_); }
    TraceCounterGuard(TraceCounterGuard&& o) noexcept : n_(o.n_) { o.n_ = 0; }
    TraceCounterGuard& operator=(TraceCounterGuard o) noexcept {
        std::swap(n_, o.n_);
        return *this;
    }
    ~TraceCounterGuard() {
        if (n_) TraceStats::sub(n_);
    }

  private:
    int64_t n_ = 0;
};

// ---------------------------------------------------------------------
// E_BOP: circuit-granular evaluation producing the concrete VI sequence.
// ---------------------------------------------------------------------

struct BopTrace {
    std::shared_ptr<const Circuit> circuit;
    std::vector<ScalarValue> values; // per variable
    std::vector<ConcreteVI> vis;     // |vertices| + 2 items
    TraceCounterGuard counter;

    const ConcreteVI& at(size_t position) const { return vis.at(position); }
    std::vector<ScalarValue> outputs() const {
        std::vector<ScalarValue> out;
        for (Var v : circuit->outputs) out.push_back(values.at(v));
        return out;
    }
};

inline BopTrace eval_circuit(std::shared_ptr<const Circuit> circuit, const std::vector<ScalarValue>& inputs) {
    const Circuit& c = *circuit;
    if (inputs.size() != c.n_inputs) throw std::invalid_argument("circuit input count mismatch");
    BopTrace tr;
    tr.circuit = circuit;
    tr.values.resize(c.n_vars());
    for (uint32_t i = 0; i < c.n_inputs; ++i) tr.values[i] = inputs[i];
    for (uint32_t i = 0; i < c.n_consts(); ++i) tr.values[c.n_inputs + i] = c.consts[i];

    tr.vis.reserve(c.vertices.size() + 2);
    ConcreteVI in;
    in.tag = ViTag::In;
    in.position = 0;
    in.operands.assign(tr.values.begin(), tr.values.begin() + c.base());
    tr.vis.push_back(std::move(in));
    for (size_t t = 0; t < c.vertices.size(); ++t) {
        const Vertex& vx = c.vertices[t];
        ConcreteVI vi;
        vi.tag = ViTag::Bop;
        vi.position = static_cast<uint32_t>(t + 1);
        vi.kind = vx.kind;
        for (Var v : vx.operands) vi.operands.push_back(tr.values[v]);
        vi.result = vx.operands.size() == 2
                        ? numerics::eval_bop_reference_scalar(vx.kind, vi.operands[0], vi.operands[1])
                        : numerics::eval_bop_reference_scalar(vx.kind, vi.operands[0]);
        tr.values[c.result_var(t)] = vi.result;
        tr.vis.push_back(std::move(vi));
    }
    ConcreteVI out;
    out.tag = ViTag::Out;
    out.position = static_cast<uint32_t>(c.vertices.size() + 1);
    for (Var v : c.outputs) out.operands.push_back(tr.values[v]);
    tr.vis.push_back(std::move(out));
    tr.counter = TraceCounterGuard(static_cast<int64_t>(tr.vis.size()));
    return tr;
}

// ---------------------------------------------------------------------
// E_N kernels. f32 kernels walk elements in the canonical lowering order;
// integer kernels may be cut across threads (wrap-around addition is
// associative, so any order gives the same bits).
// ---------------------------------------------------------------------

namespace kernels {

using numerics::eval_bop_reference_scalar;

inline ScalarValue ev1(BopKind k, ScalarValue a) { return eval_bop_reference_scalar(k, a); }
inline ScalarValue ev2(BopKind k, ScalarValue a, ScalarValue b) { return eval_bop_reference_scalar(k, a, b); }

inline void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& body) {
    if (threads <= 1 || n < 256) {
        body(0, n);
        return;
    }
    int t = std::min<int64_t>(threads, std::max<int64_t>(1, n / 64));
    std::vector<std::thread> pool;
    int64_t chunk = (n + t - 1) / t;
    for (int i = 0; i < t; ++i) {
        int64_t lo = i * chunk, hi = std::min<int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

inline Tensor eval_node(const OpNode& node, const std::vector<const Tensor*>& in, const EdgeMeta& out_meta,
                        int threads) {
    Tensor out(out_meta.dtype, out_meta.shape);
    const Tensor& x = *in.at(0);
    switch (node.kind) {
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul:
        case OpKind::Div:
        case OpKind::Min:
        case OpKind::Max: {
            BopKind k = node.kind == OpKind::Add   ? BopKind::f32_add
                        : node.kind == OpKind::Sub ? BopKind::f32_sub
                        : node.kind == OpKind::Mul ? BopKind::f32_mul
                        : node.kind == OpKind::Div ? BopKind::f32_div
                        : node.kind == OpKind::Min ? BopKind::f32_min
                                                   : BopKind::f32_max;
            const Tensor& y = *in.at(1);
            for (int64_t i = 0; i < out.size(); ++i)
                out.set(i, ev2(k, x.at(i), y.at(broadcast_index(x.shape, y.shape, i))));
            break;
        }
        case OpKind::Relu: {
            ScalarValue zero = ScalarValue::from_f32(0.0f);
            for (int64_t i = 0; i < out.size(); ++i) out.set(i, ev2(BopKind::f32_max, x.at(i), zero));
            break;
        }
        case OpKind::Clip: {
            ScalarValue lo = ScalarValue::from_f32(node.attr_float("min", -3.402823466e38f));
            ScalarValue hi = ScalarValue::from_f32(node.attr_float("max", 3.402823466e38f));
            for (int64_t i = 0; i < out.size(); ++i)
                out.set(i, ev2(BopKind::f32_min, ev2(BopKind::f32_max, x.at(i), lo), hi));
            break;
        }
        case OpKind::MaxPool:
        case OpKind::AveragePool: {
            auto kernel = node.attr_ints("kernel_shape", {});
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            ScalarValue divisor = ScalarValue::from_f32(static_cast<float>(kernel[0] * kernel[1]));
            const Shape& o = out.shape;
            int64_t idx = 0;
            for (int64_t nn = 0; nn < o[0]; ++nn)
                for (int64_t cc = 0; cc < o[1]; ++cc)
                    for (int64_t oy = 0; oy < o[2]; ++oy)
                        for (int64_t ox = 0; ox < o[3]; ++ox, ++idx) {
                            bool first = true;
                            ScalarValue acc{};
                            for (int64_t ky = 0; ky < kernel[0]; ++ky)
                                for (int64_t kx = 0; kx < kernel[1]; ++kx) {
                                    int64_t iy = oy * strides[0] + ky - pads[0];
                                    int64_t ix = ox * strides[1] + kx - pads[1];
                                    if (iy < 0 || iy >= x.shape[2] || ix < 0 || ix >= x.shape[3]) continue;
                                    ScalarValue v = x.at(flat_index(x.shape, {nn, cc, iy, ix}));
                                    if (first) {
                                        // the lowered form defines the first element through
                                        // assign/identity, which canonicalizes NaN bits
                                        acc = node.kind == OpKind::MaxPool ? ev1(BopKind::assign, v) : v;
                                        first = false;
                                    } else {
                                        acc = ev2(node.kind == OpKind::MaxPool ? BopKind::f32_max : BopKind::f32_add,
                                                  acc, v);
                                    }
                                }
                            if (node.kind == OpKind::AveragePool) acc = ev2(BopKind::f32_div, acc, divisor);
                            out.set(idx, acc);
                        }
            break;
        }
        case OpKind::ReduceSum:
        case OpKind::ReduceMax: {
            BopKind k = node.kind == OpKind::ReduceSum ? BopKind::f32_add : BopKind::f32_max;
            int64_t rank = static_cast<int64_t>(x.shape.size());
            std::vector<int64_t> axes = node.attr_ints("axes", {});
            if (axes.empty())
                for (int64_t a = 0; a < rank; ++a) axes.push_back(a);
            std::set<int64_t> axset(axes.begin(), axes.end());
            Shape kept, red;
            std::vector<size_t> kept_dims, red_dims;
            for (int64_t a = 0; a < rank; ++a)
                if (axset.count(a)) {
                    red.push_back(x.shape[a]);
                    red_dims.push_back(a);
                } else {
                    kept.push_back(x.shape[a]);
                    kept_dims.push_back(a);
                }
            int64_t n_red = shape_elems(red);
            std::vector<int64_t> coord(rank);
            for (int64_t i = 0; i < out.size(); ++i) {
                auto kc = unflatten(kept, i);
                ScalarValue acc{};
                for (int64_t j = 0; j < n_red; ++j) {
                    auto rc = unflatten(red, j);
                    for (size_t d = 0; d < kept_dims.size(); ++d) coord[kept_dims[d]] = kc[d];
                    for (size_t d = 0; d < red_dims.size(); ++d) coord[red_dims[d]] = rc[d];
                    ScalarValue v = x.at(flat_index(x.shape, coord));
                    acc = j == 0 ? (n_red == 1 ? ev1(BopKind::assign, v) : v) : ev2(k, acc, v);
                }
                out.set(i, acc);
            }
            break;
        }
        case OpKind::MatMul: {
            const Tensor& y = *in.at(1);
            size_t ra = x.shape.size();
            int64_t M = x.shape[ra - 2], K = x.shape[ra - 1], N = y.shape[1];
            int64_t batch = 1;
            for (size_t i = 0; i + 2 < ra; ++i) batch *= x.shape[i];
            for (int64_t bt = 0; bt < batch; ++bt)
                for (int64_t m = 0; m < M; ++m)
                    for (int64_t n = 0; n < N; ++n) {
                        ScalarValue acc{};
                        for (int64_t k = 0; k < K; ++k) {
                            ScalarValue p = ev2(BopKind::f32_mul, x.at((bt * M + m) * K + k), y.at(k * N + n));
                            acc = k == 0 ? p : ev2(BopKind::f32_add, acc, p);
                        }
                        out.set((bt * M + m) * N + n, acc);
                    }
            break;
        }
        case OpKind::Gemm: {
            const Tensor& y = *in.at(1);
            const Tensor& cbias = *in.at(2);
            bool ta = node.attr_int("transA", 0) != 0, tb = node.attr_int("transB", 0) != 0;
            int64_t M = out.shape[0], N = out.shape[1];
            int64_t K = ta ? x.shape[0] : x.shape[1];
            ScalarValue alpha = ScalarValue::from_f32(node.attr_float("alpha", 1.0f));
            ScalarValue beta = ScalarValue::from_f32(node.attr_float("beta", 1.0f));
            for (int64_t m = 0; m < M; ++m)
                for (int64_t n = 0; n < N; ++n) {
                    ScalarValue acc{};
                    for (int64_t k = 0; k < K; ++k) {
                        ScalarValue av = x.at(ta ? k * M + m : m * K + k);
                        ScalarValue bv = y.at(tb ? n * K + k : k * N + n);
                        ScalarValue p = ev2(BopKind::f32_mul, av, bv);
                        acc = k == 0 ? p : ev2(BopKind::f32_add, acc, p);
                    }
                    ScalarValue t1 = ev2(BopKind::f32_mul, acc, alpha);
                    ScalarValue cv = cbias.at(broadcast_index({M, N}, cbias.shape, m * N + n));
                    ScalarValue t2 = ev2(BopKind::f32_mul, cv, beta);
                    out.set(m * N + n, ev2(BopKind::f32_add, t1, t2));
                }
            break;
        }
        case OpKind::MatMulInteger: {
            const Tensor& y = *in.at(1);
            int64_t M = x.shape[0], K = x.shape[1], N = y.shape[1];
            auto widen = [](const Tensor& t, int64_t i) -> uint32_t {
                return t.dtype == DType::I32 ? t.data[i] : (t.data[i] & 0xFF);
            };
            parallel_for(M * N, threads, [&](int64_t lo, int64_t hi) {
                for (int64_t i = lo; i < hi; ++i) {
                    int64_t m = i / N, n = i % N;
                    uint32_t acc = 0;
                    for (int64_t k = 0; k < K; ++k) acc += widen(x, m * K + k) * widen(y, k * N + n);
                    out.data[i] = acc;
                }
            });
            break;
        }
        case OpKind::ConvInteger: {
            const Tensor& w = *in.at(1);
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            const Shape& o = out.shape;
            int64_t kh = w.shape[2], kw = w.shape[3];
            auto widen = [](const Tensor& t, int64_t i) -> uint32_t {
                return t.dtype == DType::I32 ? t.data[i] : (t.data[i] & 0xFF);
            };
            parallel_for(shape_elems(o), threads, [&](int64_t lo, int64_t hi) {
                for (int64_t i = lo; i < hi; ++i) {
                    auto c4 = unflatten(o, i);
                    int64_t nn = c4[0], mm = c4[1], oy = c4[2], ox = c4[3];
                    uint32_t acc = 0;
                    for (int64_t cc = 0; cc < x.shape[1]; ++cc)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                int64_t iy = oy * strides[0] + ky - pads[0];
                                int64_t ix = ox * strides[1] + kx - pads[1];
                                if (iy < 0 || iy >= x.shape[2] || ix < 0 || ix >= x.shape[3]) continue;
                                acc += widen(x, flat_index(x.shape, {nn, cc, iy, ix})) *
                                       widen(w, flat_index(w.shape, {mm, cc, ky, kx}));
                            }
                    out.data[i] = acc;
                }
            });
            break;
        }
        case OpKind::BatchNormalization: {
            const Tensor& scale = *in.at(1);
            const Tensor& bias = *in.at(2);
            const Tensor& mean = *in.at(3);
            const Tensor& var = *in.at(4);
            ScalarValue eps = ScalarValue::from_f32(node.attr_float("epsilon", 1e-5f));
            int64_t C = x.shape[1];
            std::vector<ScalarValue> denom(static_cast<size_t>(C));
            for (int64_t c = 0; c < C; ++c)
                denom[c] = ev1(BopKind::f32_sqrt, ev2(BopKind::f32_add, var.at(c), eps));
            int64_t inner = 1;
            for (size_t i = 2; i < x.shape.size(); ++i) inner *= x.shape[i];
            for (int64_t i = 0; i < out.size(); ++i) {
                int64_t c = (i / inner) % C;
                ScalarValue s = ev2(BopKind::f32_sub, x.at(i), mean.at(c));
                ScalarValue d = ev2(BopKind::f32_div, s, denom[c]);
                ScalarValue m = ev2(BopKind::f32_mul, d, scale.at(c));
                out.set(i, ev2(BopKind::f32_add, m, bias.at(c)));
            }
            break;
        }
        case OpKind::Cast: {
            DType to = static_cast<DType>(node.attr_int("to", 0));
            BopKind k;
            if (x.dtype == to) {
                k = BopKind::assign;
            } else if (x.dtype == DType::F32) {
                k = to == DType::U8 ? BopKind::f32_to_u8 : BopKind::f32_to_i32;
            } else if (x.dtype == DType::U8) {
                k = to == DType::F32 ? BopKind::u8_to_f32 : BopKind::u8_to_i32;
            } else {
                k = BopKind::i32_to_f32;
            }
            for (int64_t i = 0; i < out.size(); ++i) out.set(i, ev1(k, x.at(i)));
            break;
        }
        case OpKind::QuantizeLinear: {
            ScalarValue scale = in.at(1)->at(0);
            ScalarValue zero = ScalarValue::from_f32(0.0f);
            ScalarValue top = ScalarValue::from_f32(255.0f);
            for (int64_t i = 0; i < out.size(); ++i) {
                ScalarValue d = ev2(BopKind::f32_div, x.at(i), scale);
                ScalarValue r = ev1(BopKind::f32_round, d);
                ScalarValue lo = ev2(BopKind::f32_max, r, zero);
                ScalarValue hi = ev2(BopKind::f32_min, lo, top);
                out.set(i, ev1(BopKind::f32_to_u8, hi));
            }
            break;
        }
        case OpKind::DequantizeLinear: {
            ScalarValue scale = in.at(1)->at(0);
            bool is_u8 = x.dtype == DType::U8;
            ScalarValue zp = is_u8 && in.size() == 3 ? ev1(BopKind::u8_to_f32, in.at(2)->at(0))
                                                     : ScalarValue::from_f32(0.0f);
            for (int64_t i = 0; i < out.size(); ++i) {
                ScalarValue c = ev1(is_u8 ? BopKind::u8_to_f32 : BopKind::i32_to_f32, x.at(i));
                ScalarValue s = ev2(BopKind::f32_sub, c, zp);
                out.set(i, ev2(BopKind::f32_mul, s, scale));
            }
            break;
        }
    }
    return out;
}

} // namespace kernels

// ---------------------------------------------------------------------
// Whole-graph evaluation (E_N) and the operation trace (E_OP)
// ---------------------------------------------------------------------

// The ordered source list every trace references: graph inputs, then
// initializers by name.
inline std::vector<std::string> source_order(const Graph& g) {
    std::vector<std::string> s = g.graph_inputs;
    for (const auto& [name, t] : g.initializers) s.push_back(name);
    return s;
}

struct NativeResult {
    std::map<std::string, Tensor> outputs;
    Digest result_digest;
};

namespace eval_detail {

inline void bind_inputs(const Graph& g, const std::map<std::string, Tensor>& inputs,
                        std::map<std::string, Tensor>& store) {
    for (const auto& name : g.graph_inputs) {
        auto it = inputs.find(name);
        if (it == inputs.end()) throw std::invalid_argument("missing input tensor '" + name + "'");
        const auto& meta = g.edges.at(name);
        if (it->second.dtype != meta.dtype || it->second.shape != meta.shape)
            throw std::invalid_argument("input tensor '" + name + "' does not match the declared signature");
        store[name] = it->second;
    }
    for (const auto& [name, t] : g.initializers) store[name] = t;
}

// Topological levels for node-parallel execution.
inline std::vector<std::vector<std::string>> topo_levels(const Graph& g) {
    auto order = topo_order_ops(g);
    std::map<std::string, int> edge_level;
    for (const auto& name : source_order(g)) edge_level[name] = 0;
    std::vector<std::vector<std::string>> levels;
    for (const auto& id : order) {
        const OpNode* n = g.find_node(id);
        int lvl = 0;
        for (const auto& in : n->inputs) lvl = std::max(lvl, edge_level.at(in));
        if (static_cast<size_t>(lvl) >= levels.size()) levels.resize(lvl + 1);
        levels[static_cast<size_t>(lvl)].push_back(id);
        edge_level[n->outputs[0]] = lvl + 1;
    }
    return levels;
}

} // namespace eval_detail

inline NativeResult eval_graph_native(const Graph& g, const std::map<std::string, Tensor>& inputs, uint32_t k = 32,
                                      int threads = 1) {
    std::map<std::string, Tensor> store;
    eval_detail::bind_inputs(g, inputs, store);
    auto levels = eval_detail::topo_levels(g);
    for (const auto& level : levels) {
        auto run_one = [&](const std::string& id) {
            const OpNode* n = g.find_node(id);
            std::vector<const Tensor*> in;
            for (const auto& e : n->inputs) in.push_back(&store.at(e));
            return kernels::eval_node(*n, in, g.edges.at(n->outputs[0]), threads);
        };
        if (threads > 1 && level.size() > 1) {
            std::vector<Tensor> results(level.size());
            std::vector<std::thread> pool;
            for (size_t i = 0; i < level.size(); ++i)
                pool.emplace_back([&, i] { results[i] = run_one(level[i]); });
            for (auto& t : pool) t.join();
            for (size_t i = 0; i < level.size(); ++i)
                store[g.find_node(level[i])->outputs[0]] = std::move(results[i]);
        } else {
            for (const auto& id : level) store[g.find_node(id)->outputs[0]] = run_one(id);
        }
    }
    NativeResult r;
    std::vector<Digest> outs;
    for (const auto& name : g.graph_outputs) {
        r.outputs[name] = store.at(name);
        outs.push_back(tensor_digest(store.at(name), k));
    }
    r.result_digest = digest_list_root(outs);
    return r;
}

// One record of the operation trace.
struct OpRecord {
    ViTag tag = ViTag::Op;
    std::string node_id;                // Op only
    Digest p2s_root;                    // Op: sequence root of the symbolic circuit
    std::vector<Digest> input_digests;  // Op: per input slot; Out: graph output digests
    std::vector<Digest> output_digests; // Op: exactly one; In: per source tensor
    Tensor output;                      // Op only
};

struct OpTrace {
    uint32_t k = 32;
    std::vector<OpRecord> records; // in, ops in topo order, out
    Digest result_digest;
    TraceCounterGuard counter;

    size_t op_count() const { return records.size() - 2; }
};

inline OpTrace eval_graph_ops(const Graph& g, const std::map<std::string, Tensor>& inputs, uint32_t k = 32,
                              int threads = 1, size_t prefix = SIZE_MAX) {
    std::map<std::string, Tensor> store;
    eval_detail::bind_inputs(g, inputs, store);
    std::map<std::string, Digest> digests;

    OpTrace tr;
    tr.k = k;
    OpRecord in;
    in.tag = ViTag::In;
    for (const auto& name : source_order(g)) {
        Digest d = tensor_digest(store.at(name), k);
        digests[name] = d;
        in.output_digests.push_back(d);
    }
    tr.records.push_back(std::move(in));

    auto order = topo_order_ops(g);
    size_t limit = std::min(prefix, order.size());
    for (size_t i = 0; i < limit; ++i) {
        const OpNode* n = g.find_node(order[i]);
        std::vector<const Tensor*> tin;
        for (const auto& e : n->inputs) tin.push_back(&store.at(e));
        Tensor out = kernels::eval_node(*n, tin, g.edges.at(n->outputs[0]), threads);
        OpRecord rec;
        rec.tag = ViTag::Op;
        rec.node_id = n->id;
        auto circ = CircuitCache::instance().get_or_lower(*n, node_input_meta(g, *n));
        rec.p2s_root = p2s_commitment(circ, k)->root;
        for (const auto& e : n->inputs) rec.input_digests.push_back(digests.at(e));
        Digest od = tensor_digest(out, k);
        rec.output_digests.push_back(od);
        digests[n->outputs[0]] = od;
        rec.output = out;
        store[n->outputs[0]] = std::move(out);
        tr.records.push_back(std::move(rec));
    }
    if (limit == order.size()) {
        OpRecord out;
        out.tag = ViTag::Out;
        for (const auto& name : g.graph_outputs) out.input_digests.push_back(digests.at(name));
        tr.result_digest = digest_list_root(out.input_digests);
        tr.records.push_back(std::move(out));
    }
    tr.counter = TraceCounterGuard(static_cast<int64_t>(tr.records.size()));
    return tr;
}

// Concrete inputs of one traced operation, flattened in slot order, for
// feeding the op's circuit.
inline std::vector<ScalarValue> op_circuit_inputs(const Graph& g, const std::map<std::string, Tensor>& inputs,
                                                  const OpTrace& trace, size_t op_index) {
    std::map<std::string, Tensor> store;
    eval_detail::bind_inputs(g, inputs, store);
    auto order = topo_order_ops(g);
    for (size_t i = 0; i + 1 < op_index; ++i) store[g.find_node(order[i])->outputs[0]] = trace.records[i + 1].output;
    const OpNode* n = g.find_node(order[op_index - 1]); // record index -> node
    std::vector<ScalarValue> flat;
    for (const auto& e : n->inputs) {
        const Tensor* t = nullptr;
        if (store.count(e)) {
            t = &store.at(e);
        } else {
            for (size_t i = 0; i + 1 < op_index; ++i)
                if (g.find_node(order[i])->outputs[0] == e) t = &trace.records[i + 1].output;
        }
        if (!t) throw std::logic_error("operand tensor not materialized");
        for (int64_t i = 0; i < t->size(); ++i) flat.push_back(t->at(i));
    }
    return flat;
}

} // namespace graphpin
