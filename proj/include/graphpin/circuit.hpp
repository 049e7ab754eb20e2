#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphpin/bop.hpp"
#include "graphpin/graph.hpp"
#include "graphpin/numerics.hpp"
#include "graphpin/tensor.hpp"

namespace graphpin {

using Var = uint32_t;

// One interior circuit vertex; vertex t defines variable base() + t.
struct Vertex {
    BopKind kind;
    std::vector<Var> operands;
};

// A basic-operation circuit for one operation (or a whole graph). Variables
// are dense: tensor-backed inputs first, then structural constants, then one
// result per vertex in stored (topological) order.
struct Circuit {
    uint32_t n_inputs = 0;
    std::vector<ScalarValue> consts;
    std::vector<Vertex> vertices;
    std::vector<Var> outputs;                // aliases of vertex results
    std::vector<int64_t> input_tensor_sizes; // element count per input slot
    std::vector<DType> input_tensor_dtypes;

    uint32_t n_consts() const { return static_cast<uint32_t>(consts.size()); }
    uint32_t base() const { return n_inputs + n_consts(); }
    Var result_var(size_t t) const { return base() + static_cast<Var>(t); }
    size_t n_vars() const { return base() + vertices.size(); }

    // Maps an input variable to its (input slot, element offset).
    std::pair<size_t, int64_t> locate_input(Var v) const {
        int64_t x = v;
        for (size_t s = 0; s < input_tensor_sizes.size(); ++s) {
            if (x < input_tensor_sizes[s]) return {s, x};
            x -= input_tensor_sizes[s];
        }
        throw std::out_of_range("not an input variable");
    }

    bool operator==(const Circuit& o) const {
        if (n_inputs != o.n_inputs || outputs != o.outputs || consts.size() != o.consts.size() ||
            vertices.size() != o.vertices.size())
            return false;
        for (size_t i = 0; i < consts.size(); ++i)
            if (consts[i] != o.consts[i]) return false;
        for (size_t i = 0; i < vertices.size(); ++i)
            if (vertices[i].kind != o.vertices[i].kind || vertices[i].operands != o.vertices[i].operands)
                return false;
        return true;
    }
};

namespace lower_detail {

class Builder {
  public:
    explicit Builder(const std::vector<EdgeMeta>& in_meta) {
        for (const auto& m : in_meta) {
            c_.input_tensor_sizes.push_back(shape_elems(m.shape));
            c_.input_tensor_dtypes.push_back(m.dtype);
            c_.n_inputs += static_cast<uint32_t>(shape_elems(m.shape));
        }
    }

    // Structural constants must all be declared before the first vertex so
    // the variable blocks stay contiguous.
    Var konst(ScalarValue v) {
        uint64_t key = (static_cast<uint64_t>(v.dtype) << 32) | v.bits;
        auto it = const_cache_.find(key);
        if (it != const_cache_.end()) return it->second;
        if (!c_.vertices.empty()) throw std::logic_error("constants must precede vertices");
        Var var = c_.n_inputs + c_.n_consts();
        c_.consts.push_back(v);
        const_cache_[key] = var;
        return var;
    }
    Var konst_f32(float f) { return konst(ScalarValue::from_f32(f)); }

    Var input_var(size_t slot, int64_t elem) const {
        int64_t base = 0;
        for (size_t s = 0; s < slot; ++s) base += c_.input_tensor_sizes[s];
        return static_cast<Var>(base + elem);
    }

    Var emit(BopKind kind, std::vector<Var> operands) {
        Var r = c_.result_var(c_.vertices.size());
        c_.vertices.push_back({kind, std::move(operands)});
        return r;
    }

    // Left-associative fold; a single term folds to itself with no vertex.
    Var fold(BopKind kind, const std::vector<Var>& terms) {
        Var acc = terms.at(0);
        for (size_t i = 1; i < terms.size(); ++i) acc = emit(kind, {acc, terms[i]});
        return acc;
    }

    void set_outputs(std::vector<Var> outs) { c_.outputs = std::move(outs); }
    Circuit take() { return std::move(c_); }

  private:
    Circuit c_;
    std::map<uint64_t, Var> const_cache_;
};

inline BopKind widen_kind(DType from) {
    if (from == DType::U8) return BopKind::u8_to_i32;
    throw std::logic_error("only u8 widens to i32");
}

// Forward declarations of per-kind rules.
Circuit lower_elementwise(const OpNode& n, const std::vector<EdgeMeta>& in);
Circuit lower_matmul_like(const OpNode& n, const std::vector<EdgeMeta>& in);

} // namespace lower_detail

// ---------------------------------------------------------------------
// lower_op: the rule table. Float reductions fold strictly left to right;
// integer kernels are committed in the same canonical order even though
// evaluators may reorder them.
// ---------------------------------------------------------------------

inline Circuit lower_op(const OpNode& node, const std::vector<EdgeMeta>& in_meta) {
    using namespace lower_detail;
    std::vector<Diagnostic> diags;
    auto out_meta = infer_node_output(node, in_meta, diags);
    if (!out_meta) throw std::invalid_argument("cannot lower '" + node.id + "': " + diags.at(0).message);
    Builder b(in_meta);

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
            std::vector<Var> outs;
            int64_t n = shape_elems(in_meta[0].shape);
            for (int64_t i = 0; i < n; ++i) {
                Var a = b.input_var(0, i);
                Var bb = b.input_var(1, broadcast_index(in_meta[0].shape, in_meta[1].shape, i));
                outs.push_back(b.emit(k, {a, bb}));
            }
            b.set_outputs(outs);
            break;
        }
        case OpKind::Relu: {
            Var zero = b.konst_f32(0.0f);
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(in_meta[0].shape); ++i)
                outs.push_back(b.emit(BopKind::f32_max, {b.input_var(0, i), zero}));
            b.set_outputs(outs);
            break;
        }
        case OpKind::Clip: {
            Var lo = b.konst_f32(node.attr_float("min", -3.402823466e38f));
            Var hi = b.konst_f32(node.attr_float("max", 3.402823466e38f));
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(in_meta[0].shape); ++i) {
                Var t = b.emit(BopKind::f32_max, {b.input_var(0, i), lo});
                outs.push_back(b.emit(BopKind::f32_min, {t, hi}));
            }
            b.set_outputs(outs);
            break;
        }
        case OpKind::MaxPool:
        case OpKind::AveragePool: {
            const Shape& x = in_meta[0].shape;
            auto kernel = node.attr_ints("kernel_shape", {});
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            Var divisor = 0;
            if (node.kind == OpKind::AveragePool)
                divisor = b.konst_f32(static_cast<float>(kernel[0] * kernel[1]));
            const Shape& o = out_meta->shape;
            std::vector<Var> outs;
            for (int64_t nn = 0; nn < o[0]; ++nn)
                for (int64_t cc = 0; cc < o[1]; ++cc)
                    for (int64_t oy = 0; oy < o[2]; ++oy)
                        for (int64_t ox = 0; ox < o[3]; ++ox) {
                            std::vector<Var> window;
                            for (int64_t ky = 0; ky < kernel[0]; ++ky)
                                for (int64_t kx = 0; kx < kernel[1]; ++kx) {
                                    int64_t iy = oy * strides[0] + ky - pads[0];
                                    int64_t ix = ox * strides[1] + kx - pads[1];
                                    if (iy < 0 || iy >= x[2] || ix < 0 || ix >= x[3]) continue;
                                    window.push_back(b.input_var(0, flat_index(x, {nn, cc, iy, ix})));
                                }
                            if (node.kind == OpKind::MaxPool) {
                                Var m = window.size() == 1 ? b.emit(BopKind::assign, {window[0]})
                                                           : b.fold(BopKind::f32_max, window);
                                outs.push_back(m);
                            } else {
                                Var s = b.fold(BopKind::f32_add, window);
                                outs.push_back(b.emit(BopKind::f32_div, {s, divisor}));
                            }
                        }
            b.set_outputs(outs);
            break;
        }
        case OpKind::ReduceSum:
        case OpKind::ReduceMax: {
            BopKind k = node.kind == OpKind::ReduceSum ? BopKind::f32_add : BopKind::f32_max;
            const Shape& x = in_meta[0].shape;
            int64_t rank = static_cast<int64_t>(x.size());
            std::vector<int64_t> axes = node.attr_ints("axes", {});
            if (axes.empty())
                for (int64_t a = 0; a < rank; ++a) axes.push_back(a);
            std::set<int64_t> axset(axes.begin(), axes.end());
            Shape kept, red;
            std::vector<size_t> kept_dims, red_dims;
            for (int64_t a = 0; a < rank; ++a)
                if (axset.count(a)) {
                    red.push_back(x[a]);
                    red_dims.push_back(a);
                } else {
                    kept.push_back(x[a]);
                    kept_dims.push_back(a);
                }
            int64_t n_out = shape_elems(kept), n_red = shape_elems(red);
            std::vector<Var> outs;
            std::vector<int64_t> coord(rank);
            for (int64_t i = 0; i < n_out; ++i) {
                auto kc = unflatten(kept, i);
                std::vector<Var> terms;
                for (int64_t j = 0; j < n_red; ++j) {
                    auto rc = unflatten(red, j);
                    for (size_t d = 0; d < kept_dims.size(); ++d) coord[kept_dims[d]] = kc[d];
                    for (size_t d = 0; d < red_dims.size(); ++d) coord[red_dims[d]] = rc[d];
                    terms.push_back(b.input_var(0, flat_index(x, coord)));
                }
                Var v = terms.size() == 1 ? b.emit(BopKind::assign, {terms[0]}) : b.fold(k, terms);
                outs.push_back(v);
            }
            b.set_outputs(outs);
            break;
        }
        case OpKind::MatMul: {
            const Shape& sa = in_meta[0].shape;
            const Shape& sb = in_meta[1].shape;
            size_t ra = sa.size();
            int64_t M = sa[ra - 2], K = sa[ra - 1], N = sb[1];
            int64_t batch = 1;
            for (size_t i = 0; i + 2 < ra; ++i) batch *= sa[i];
            // products grouped per output element, then the add folds
            std::vector<std::vector<Var>> prods;
            for (int64_t bt = 0; bt < batch; ++bt)
                for (int64_t m = 0; m < M; ++m)
                    for (int64_t n = 0; n < N; ++n) {
                        std::vector<Var> p;
                        for (int64_t k = 0; k < K; ++k) {
                            Var av = b.input_var(0, (bt * M + m) * K + k);
                            Var bv = b.input_var(1, k * N + n);
                            p.push_back(b.emit(BopKind::f32_mul, {av, bv}));
                        }
                        prods.push_back(std::move(p));
                    }
            std::vector<Var> outs;
            for (auto& p : prods) outs.push_back(b.fold(BopKind::f32_add, p));
            b.set_outputs(outs);
            break;
        }
        case OpKind::Gemm: {
            bool ta = node.attr_int("transA", 0) != 0, tb = node.attr_int("transB", 0) != 0;
            const Shape& sa = in_meta[0].shape;
            const Shape& sb = in_meta[1].shape;
            int64_t M = ta ? sa[1] : sa[0];
            int64_t K = ta ? sa[0] : sa[1];
            int64_t N = tb ? sb[0] : sb[1];
            Var alpha = b.konst_f32(node.attr_float("alpha", 1.0f));
            Var beta = b.konst_f32(node.attr_float("beta", 1.0f));
            std::vector<std::vector<Var>> prods;
            for (int64_t m = 0; m < M; ++m)
                for (int64_t n = 0; n < N; ++n) {
                    std::vector<Var> p;
                    for (int64_t k = 0; k < K; ++k) {
                        Var av = b.input_var(0, ta ? k * M + m : m * K + k);
                        Var bv = b.input_var(1, tb ? n * K + k : k * N + n);
                        p.push_back(b.emit(BopKind::f32_mul, {av, bv}));
                    }
                    prods.push_back(std::move(p));
                }
            std::vector<Var> dots;
            for (auto& p : prods) dots.push_back(b.fold(BopKind::f32_add, p));
            std::vector<Var> outs;
            for (int64_t m = 0; m < M; ++m)
                for (int64_t n = 0; n < N; ++n) {
                    Var dot = dots[static_cast<size_t>(m * N + n)];
                    Var t1 = b.emit(BopKind::f32_mul, {dot, alpha});
                    Var cv = b.input_var(2, broadcast_index({M, N}, in_meta[2].shape, m * N + n));
                    Var t2 = b.emit(BopKind::f32_mul, {cv, beta});
                    outs.push_back(b.emit(BopKind::f32_add, {t1, t2}));
                }
            b.set_outputs(outs);
            break;
        }
        case OpKind::MatMulInteger: {
            const Shape& sa = in_meta[0].shape;
            const Shape& sb = in_meta[1].shape;
            int64_t M = sa[0], K = sa[1], N = sb[1];
            // widen u8 operands to i32 once per element, row-major
            std::vector<Var> avars(static_cast<size_t>(M * K)), bvars(static_cast<size_t>(K * N));
            for (int64_t i = 0; i < M * K; ++i)
                avars[i] = in_meta[0].dtype == DType::I32
                               ? b.input_var(0, i)
                               : b.emit(lower_detail::widen_kind(in_meta[0].dtype), {b.input_var(0, i)});
            for (int64_t i = 0; i < K * N; ++i)
                bvars[i] = in_meta[1].dtype == DType::I32
                               ? b.input_var(1, i)
                               : b.emit(lower_detail::widen_kind(in_meta[1].dtype), {b.input_var(1, i)});
            std::vector<std::vector<Var>> prods;
            for (int64_t m = 0; m < M; ++m)
                for (int64_t n = 0; n < N; ++n) {
                    std::vector<Var> p;
                    for (int64_t k = 0; k < K; ++k)
                        p.push_back(b.emit(BopKind::i32_mul, {avars[m * K + k], bvars[k * N + n]}));
                    prods.push_back(std::move(p));
                }
            std::vector<Var> outs;
            for (auto& p : prods) outs.push_back(p.size() == 1 ? b.emit(BopKind::assign, {p[0]})
                                                               : b.fold(BopKind::i32_add, p));
            b.set_outputs(outs);
            break;
        }
        case OpKind::ConvInteger: {
            const Shape& x = in_meta[0].shape;
            const Shape& w = in_meta[1].shape;
            auto strides = node.attr_ints("strides", {1, 1});
            auto pads = node.attr_ints("pads", {0, 0, 0, 0});
            int64_t kh = w[2], kw = w[3];
            std::vector<Var> xv(static_cast<size_t>(shape_elems(x))), wv(static_cast<size_t>(shape_elems(w)));
            for (int64_t i = 0; i < shape_elems(x); ++i)
                xv[i] = in_meta[0].dtype == DType::I32
                            ? b.input_var(0, i)
                            : b.emit(lower_detail::widen_kind(in_meta[0].dtype), {b.input_var(0, i)});
            for (int64_t i = 0; i < shape_elems(w); ++i)
                wv[i] = in_meta[1].dtype == DType::I32
                            ? b.input_var(1, i)
                            : b.emit(lower_detail::widen_kind(in_meta[1].dtype), {b.input_var(1, i)});
            const Shape& o = out_meta->shape;
            std::vector<std::vector<Var>> prods;
            for (int64_t nn = 0; nn < o[0]; ++nn)
                for (int64_t mm = 0; mm < o[1]; ++mm)
                    for (int64_t oy = 0; oy < o[2]; ++oy)
                        for (int64_t ox = 0; ox < o[3]; ++ox) {
                            std::vector<Var> p;
                            for (int64_t cc = 0; cc < x[1]; ++cc)
                                for (int64_t ky = 0; ky < kh; ++ky)
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        int64_t iy = oy * strides[0] + ky - pads[0];
                                        int64_t ix = ox * strides[1] + kx - pads[1];
                                        if (iy < 0 || iy >= x[2] || ix < 0 || ix >= x[3]) continue;
                                        p.push_back(b.emit(
                                            BopKind::i32_mul,
                                            {xv[flat_index(x, {nn, cc, iy, ix})], wv[flat_index(w, {mm, cc, ky, kx})]}));
                                    }
                            prods.push_back(std::move(p));
                        }
            std::vector<Var> outs;
            for (auto& p : prods) outs.push_back(p.size() == 1 ? b.emit(BopKind::assign, {p[0]})
                                                               : b.fold(BopKind::i32_add, p));
            b.set_outputs(outs);
            break;
        }
        case OpKind::BatchNormalization: {
            Var eps = b.konst_f32(node.attr_float("epsilon", 1e-5f));
            const Shape& x = in_meta[0].shape;
            int64_t C = x[1];
            // the per-channel denominator once, the literal formula per element
            std::vector<Var> denom(static_cast<size_t>(C));
            for (int64_t cidx = 0; cidx < C; ++cidx) {
                Var t = b.emit(BopKind::f32_add, {b.input_var(4, cidx), eps});
                denom[cidx] = b.emit(BopKind::f32_sqrt, {t});
            }
            int64_t inner = 1;
            for (size_t i = 2; i < x.size(); ++i) inner *= x[i];
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(x); ++i) {
                int64_t cidx = (i / inner) % C;
                Var s = b.emit(BopKind::f32_sub, {b.input_var(0, i), b.input_var(3, cidx)});
                Var d = b.emit(BopKind::f32_div, {s, denom[cidx]});
                Var m = b.emit(BopKind::f32_mul, {d, b.input_var(1, cidx)});
                outs.push_back(b.emit(BopKind::f32_add, {m, b.input_var(2, cidx)}));
            }
            b.set_outputs(outs);
            break;
        }
        case OpKind::Cast: {
            DType from = in_meta[0].dtype;
            DType to = static_cast<DType>(node.attr_int("to", 0));
            BopKind k;
            if (from == to) {
                k = BopKind::assign;
            } else if (from == DType::F32 && to == DType::U8) {
                k = BopKind::f32_to_u8;
            } else if (from == DType::F32 && to == DType::I32) {
                k = BopKind::f32_to_i32;
            } else if (from == DType::U8 && to == DType::F32) {
                k = BopKind::u8_to_f32;
            } else if (from == DType::U8 && to == DType::I32) {
                k = BopKind::u8_to_i32;
            } else if (from == DType::I32 && to == DType::F32) {
                k = BopKind::i32_to_f32;
            } else {
                throw std::invalid_argument("cast combination not expressible");
            }
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(in_meta[0].shape); ++i)
                outs.push_back(b.emit(k, {b.input_var(0, i)}));
            b.set_outputs(outs);
            break;
        }
        case OpKind::QuantizeLinear: {
            Var zero = b.konst_f32(0.0f);
            Var topv = b.konst_f32(255.0f);
            Var scale = b.input_var(1, 0);
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(in_meta[0].shape); ++i) {
                Var d = b.emit(BopKind::f32_div, {b.input_var(0, i), scale});
                Var r = b.emit(BopKind::f32_round, {d});
                Var lo = b.emit(BopKind::f32_max, {r, zero});
                Var hi = b.emit(BopKind::f32_min, {lo, topv});
                outs.push_back(b.emit(BopKind::f32_to_u8, {hi}));
            }
            b.set_outputs(outs);
            break;
        }
        case OpKind::DequantizeLinear: {
            bool is_u8 = in_meta[0].dtype == DType::U8;
            bool zp_from_input = is_u8 && in_meta.size() == 3;
            Var zp_f32 = zp_from_input ? 0 : b.konst_f32(0.0f);
            Var scale = b.input_var(1, 0);
            if (zp_from_input) zp_f32 = b.emit(BopKind::u8_to_f32, {b.input_var(2, 0)});
            std::vector<Var> outs;
            for (int64_t i = 0; i < shape_elems(in_meta[0].shape); ++i) {
                Var cst = b.emit(is_u8 ? BopKind::u8_to_f32 : BopKind::i32_to_f32, {b.input_var(0, i)});
                Var s = b.emit(BopKind::f32_sub, {cst, zp_f32});
                outs.push_back(b.emit(BopKind::f32_mul, {s, scale}));
            }
            b.set_outputs(outs);
            break;
        }
    }
    return b.take();
}

// ---------------------------------------------------------------------
// Serialization: position 0 is the "in" item, vertices follow in stored
// order, the last position is the "out" item.
// ---------------------------------------------------------------------

enum class ViTag : uint8_t { In = 0, Bop = 1, Out = 2, Op = 3 };

struct SymbolicVI {
    ViTag tag;
    uint32_t position;
    BopKind kind = BopKind::assign;    // Bop only
    std::vector<Var> operands;         // Bop: operand vars; Out: output vars
    Var result = 0;                    // Bop: result var; In/Out: arity
    std::vector<ScalarValue> consts;   // In only: structural constants
};

struct ConcreteVI {
    ViTag tag;
    uint32_t position;
    BopKind kind = BopKind::assign;
    std::vector<ScalarValue> operands; // Bop: operand values; In: inputs+consts; Out: outputs
    ScalarValue result{};              // Bop only
};

inline std::vector<SymbolicVI> serialize_circuit(const Circuit& c) {
    std::vector<SymbolicVI> out;
    out.reserve(c.vertices.size() + 2);
    SymbolicVI in;
    in.tag = ViTag::In;
    in.position = 0;
    in.result = c.base(); // total source arity, constants included
    in.consts = c.consts;
    out.push_back(std::move(in));
    for (size_t t = 0; t < c.vertices.size(); ++t) {
        SymbolicVI vi;
        vi.tag = ViTag::Bop;
        vi.position = static_cast<uint32_t>(t + 1);
        vi.kind = c.vertices[t].kind;
        vi.operands = c.vertices[t].operands;
        vi.result = c.result_var(t);
        out.push_back(std::move(vi));
    }
    SymbolicVI o;
    o.tag = ViTag::Out;
    o.position = static_cast<uint32_t>(c.vertices.size() + 1);
    o.operands = c.outputs;
    o.result = static_cast<Var>(c.outputs.size());
    out.push_back(std::move(o));
    return out;
}

// Debug/test dump: one line per VI.
inline std::string circuit_dump(const Circuit& c) {
    std::ostringstream os;
    os << "inputs " << c.n_inputs << " consts " << c.n_consts() << " outputs " << c.outputs.size() << "\n";
    auto vis = serialize_circuit(c);
    for (const auto& vi : vis) {
        os << vi.position << " ";
        if (vi.tag == ViTag::In) {
            os << "in arity=" << vi.result;
        } else if (vi.tag == ViTag::Out) {
            os << "out";
            for (Var v : vi.operands) os << " v" << v;
        } else {
            os << bop_name(vi.kind);
            for (Var v : vi.operands) os << " v" << v;
            os << " -> v" << vi.result;
        }
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------
// Deduplication: two nodes with the same kind, attributes and input
// metadata lower to structurally identical circuits.
// ---------------------------------------------------------------------

struct DedupKey {
    std::string bytes;
    bool operator==(const DedupKey& o) const { return bytes == o.bytes; }
    bool operator<(const DedupKey& o) const { return bytes < o.bytes; }
};

inline DedupKey dedup_key(const OpNode& node, const std::vector<EdgeMeta>& in_meta) {
    std::ostringstream os;
    os << op_kind_name(node.kind);
    for (const auto& [name, v] : node.attributes) {
        os << "|" << name << "=";
        if (std::holds_alternative<int64_t>(v)) {
            os << "i" << std::get<int64_t>(v);
        } else if (std::holds_alternative<float>(v)) {
            os << "f" << f32_to_bits(std::get<float>(v));
        } else {
            os << "l";
            for (int64_t x : std::get<std::vector<int64_t>>(v)) os << "," << x;
        }
    }
    for (const auto& m : in_meta) {
        os << "|" << dtype_name(m.dtype) << "[";
        for (int64_t d : m.shape) os << d << ",";
        os << "]";
    }
    return {os.str()};
}

// Process-wide circuit cache; first writer wins.
class CircuitCache {
  public:
    static CircuitCache& instance() {
        static CircuitCache c;
        return c;
    }

    std::shared_ptr<const Circuit> get_or_lower(const OpNode& node, const std::vector<EdgeMeta>& in_meta) {
        DedupKey key = dedup_key(node, in_meta);
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        auto circ = std::make_shared<Circuit>(lower_op(node, in_meta));
        std::lock_guard<std::mutex> lk(mu_);
        auto [it, fresh] = cache_.emplace(key, circ);
        if (!fresh) ++hits_;
        return it->second;
    }

    uint64_t hits() const { return hits_; }

  private:
    std::mutex mu_;
    std::map<DedupKey, std::shared_ptr<const Circuit>> cache_;
    uint64_t hits_ = 0;
};

// ---------------------------------------------------------------------
// Profiling: per-op and total BOP counts, with and without dedup.
// ---------------------------------------------------------------------

struct OpProfile {
    std::string node_id;
    OpKind kind;
    uint64_t bop_count = 0;
    bool dedup_hit = false;
    double gen_ms = 0.0;
};

struct GraphProfile {
    std::vector<OpProfile> per_op;
    uint64_t op_count = 0;
    uint64_t bop_before = 0;
    uint64_t unique_ops = 0;
    uint64_t bop_after = 0; // summed over unique circuits only
};

inline std::vector<EdgeMeta> node_input_meta(const Graph& g, const OpNode& n) {
    std::vector<EdgeMeta> meta;
    for (const auto& in : n.inputs) meta.push_back(g.edges.at(in));
    return meta;
}

inline GraphProfile profile_graph(const Graph& g) {
    GraphProfile p;
    std::set<DedupKey> seen;
    for (const auto& id : topo_order_ops(g)) {
        const OpNode* n = g.find_node(id);
        auto in_meta = node_input_meta(g, *n);
        auto t0 = std::chrono::steady_clock::now();
        Circuit c = lower_op(*n, in_meta);
        auto t1 = std::chrono::steady_clock::now();
        OpProfile op;
        op.node_id = id;
        op.kind = n->kind;
        op.bop_count = c.vertices.size();
        op.dedup_hit = !seen.insert(dedup_key(*n, in_meta)).second;
        op.gen_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        p.op_count += 1;
        p.bop_before += op.bop_count;
        if (!op.dedup_hit) {
            p.unique_ops += 1;
            p.bop_after += op.bop_count;
        }
        p.per_op.push_back(std::move(op));
    }
    return p;
}

// ---------------------------------------------------------------------
// Whole-graph lowering (the one-phase representation).
// ---------------------------------------------------------------------

inline Circuit lower_graph(const Graph& g) {
    auto order = topo_order_ops(g);
    // global inputs: graph inputs then initializers by name
    std::vector<std::string> sources = g.graph_inputs;
    for (const auto& [name, t] : g.initializers) sources.push_back(name);

    Circuit whole;
    std::map<std::string, int64_t> source_base;
    for (const auto& s : sources) {
        const auto& m = g.edges.at(s);
        source_base[s] = whole.n_inputs;
        whole.input_tensor_sizes.push_back(shape_elems(m.shape));
        whole.input_tensor_dtypes.push_back(m.dtype);
        whole.n_inputs += static_cast<uint32_t>(shape_elems(m.shape));
    }

    std::vector<std::shared_ptr<const Circuit>> lowered;
    for (const auto& id : order)
        lowered.push_back(CircuitCache::instance().get_or_lower(*g.find_node(id), node_input_meta(g, *g.find_node(id))));

    // constants block first, then all remapped vertices
    std::map<uint64_t, Var> const_vars;
    for (const auto& c : lowered)
        for (const auto& v : c->consts) {
            uint64_t key = (static_cast<uint64_t>(v.dtype) << 32) | v.bits;
            if (!const_vars.count(key)) {
                const_vars[key] = whole.n_inputs + whole.n_consts();
                whole.consts.push_back(v);
            }
        }

    std::map<std::string, std::vector<Var>> edge_vars; // producer result vars per edge
    for (size_t oi = 0; oi < order.size(); ++oi) {
        const OpNode* n = g.find_node(order[oi]);
        const Circuit& c = *lowered[oi];
        // resolve this op's input variables to whole-graph variables
        std::vector<Var> resolve(c.base());
        int64_t pos = 0;
        for (size_t slot = 0; slot < n->inputs.size(); ++slot) {
            const std::string& edge = n->inputs[slot];
            for (int64_t e = 0; e < c.input_tensor_sizes[slot]; ++e, ++pos) {
                auto sb = source_base.find(edge);
                if (sb != source_base.end()) {
                    resolve[pos] = static_cast<Var>(sb->second + e);
                } else {
                    resolve[pos] = edge_vars.at(edge).at(static_cast<size_t>(e));
                }
            }
        }
        for (uint32_t ci = 0; ci < c.n_consts(); ++ci) {
            const auto& v = c.consts[ci];
            resolve[c.n_inputs + ci] = const_vars.at((static_cast<uint64_t>(v.dtype) << 32) | v.bits);
        }
        std::vector<Var> local_to_global(c.n_vars());
        for (uint32_t v = 0; v < c.base(); ++v) local_to_global[v] = resolve[v];
        for (size_t t = 0; t < c.vertices.size(); ++t) {
            std::vector<Var> ops;
            for (Var v : c.vertices[t].operands) ops.push_back(local_to_global[v]);
            Var r = whole.result_var(whole.vertices.size());
            whole.vertices.push_back({c.vertices[t].kind, std::move(ops)});
            local_to_global[c.base() + t] = r;
        }
        std::vector<Var> outs;
        for (Var v : c.outputs) outs.push_back(local_to_global[v]);
        edge_vars[n->outputs[0]] = std::move(outs);
    }
    for (const auto& out : g.graph_outputs) {
        auto sb = source_base.find(out);
        if (sb != source_base.end()) throw std::invalid_argument("graph output is a graph input");
        for (Var v : edge_vars.at(out)) whole.outputs.push_back(v);
    }
    return whole;
}

} // namespace graphpin
