#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphpin/circuit.hpp"
#include "graphpin/keccak.hpp"
#include "graphpin/tensor.hpp"

// k-ary Merkle commitments over fixed-length leaf encodings.
//
// Preimage layout (all integers little-endian):
//   leaf digest   = keccak256(0x00 || tree_tag || leaf bytes)
//   inner node    = keccak256(0x01 || tree_tag || child_1 .. child_k)
//   sequence root = keccak256(0x02 || tree_tag || in_digest || body_root || out_digest)
// Missing children are the all-zero digest. The in/out items of a VI
// sequence hang directly under the sequence root; narrowing descends only
// into the body tree over the interior items.
//
// Leaf encodings:
//   circuit VI (symbolic and concrete), 40 bytes:
//     [0]     vi tag (0 in, 1 bop, 2 out)
//     [1..2]  bop kind code (0xFFFF for in/out)
//     [3..34] operand commitment (see below)
//     [35]    result tag: dtype, or 0xFD var id, or 0xFE count
//     [36..39] result payload
//   operation record (concrete, P1), 97 bytes:
//     [0] vi tag (0 in, 2 out, 3 op) | [1..32] symbolic-circuit root |
//     [33..64] inputs commitment | [65..96] outputs commitment
//   operation record (symbolic, P1), 73 bytes:
//     [0] vi tag | [1..32] symbolic-circuit root | [33..64] wiring root |
//     [65..68] interior circuit size | [69..72] input slot count
//   value cell, 8 bytes: [0] dtype | [1..4] raw bits | [5..7] zero
//   var cell, 8 bytes:   [0] 0xFD  | [1..4] var index | [5..7] zero
//   wiring cell, 16 bytes: producer record u32 | producer slot u32 |
//     element count u32 | zero u32
//   digest cell, 32 bytes: a raw digest (tensor digests, 32-byte padded
//     value cells in the concrete in-item)

namespace graphpin {

enum class TreeKind : uint8_t {
    P1S = 1,
    P1C = 2,
    P2S = 3,
    P2C = 4,
    Operands = 5, // per-VI operand compression
    Tensor = 6,   // tensor element cells
    Inputs = 7,   // digest lists (op inputs, source lists, claim outputs)
    Wiring = 8,   // P1 symbolic wiring cells
};

// Per-item operand/constant compressions use a fixed binary arity; the
// narrowing trees and tensor digests use the protocol branch factor.
constexpr uint32_t kCellTreeArity = 2;

constexpr uint8_t kResultTagVar = 0xFD;
constexpr uint8_t kResultTagCount = 0xFE;
constexpr uint16_t kKindNone = 0xFFFF;

inline Digest leaf_digest(TreeKind kind, const std::vector<uint8_t>& leaf) {
    std::vector<uint8_t> pre;
    pre.reserve(2 + leaf.size());
    pre.push_back(0x00);
    pre.push_back(static_cast<uint8_t>(kind));
    pre.insert(pre.end(), leaf.begin(), leaf.end());
    return keccak256(pre);
}

inline Digest node_digest(TreeKind kind, const std::vector<Digest>& children) {
    std::vector<uint8_t> pre;
    pre.reserve(2 + 32 * children.size());
    pre.push_back(0x01);
    pre.push_back(static_cast<uint8_t>(kind));
    for (const auto& d : children) pre.insert(pre.end(), d.bytes.begin(), d.bytes.end());
    return keccak256(pre);
}

inline Digest sequence_root_digest(TreeKind kind, const Digest& in_d, const Digest& body, const Digest& out_d) {
    std::vector<uint8_t> pre;
    pre.reserve(2 + 96);
    pre.push_back(0x02);
    pre.push_back(static_cast<uint8_t>(kind));
    pre.insert(pre.end(), in_d.bytes.begin(), in_d.bytes.end());
    pre.insert(pre.end(), body.bytes.begin(), body.bytes.end());
    pre.insert(pre.end(), out_d.bytes.begin(), out_d.bytes.end());
    return keccak256(pre);
}

inline uint32_t tree_depth_for(uint64_t n, uint32_t k) {
    uint64_t cap = 1;
    uint32_t d = 0;
    uint64_t need = n < 2 ? 2 : n;
    while (cap < need) {
        cap *= k;
        d += 1;
    }
    return d;
}

struct MerkleTree {
    TreeKind kind = TreeKind::Tensor;
    uint32_t k = 32;
    std::vector<std::vector<uint8_t>> leaves;
    std::vector<std::vector<Digest>> levels; // levels[0] = leaf digests
    Digest root;

    uint64_t n() const { return levels.empty() ? 0 : levels[0].size(); }
    uint32_t depth() const { return static_cast<uint32_t>(levels.size()) - 1; }
};

struct MerklePath {
    TreeKind kind = TreeKind::Tensor;
    uint32_t k = 32;
    uint64_t n = 0;
    uint64_t index = 0;
    std::vector<uint8_t> leaf;
    std::vector<std::vector<Digest>> siblings; // per level, k-1 digests, ours omitted
};

inline MerkleTree build_tree(std::vector<std::vector<uint8_t>> leaves, uint32_t k, TreeKind kind) {
    if (leaves.empty()) throw std::invalid_argument("a tree needs at least one leaf");
    if (k < 2 || k > 64) throw std::invalid_argument("branch factor must be in [2, 64]");
    MerkleTree t;
    t.kind = kind;
    t.k = k;
    t.levels.emplace_back();
    t.levels[0].reserve(leaves.size());
    for (const auto& l : leaves) t.levels[0].push_back(leaf_digest(kind, l));
    t.leaves = std::move(leaves);
    uint32_t depth = tree_depth_for(t.levels[0].size(), k);
    for (uint32_t lvl = 0; lvl < depth; ++lvl) {
        const auto& prev = t.levels[lvl];
        std::vector<Digest> next((prev.size() + k - 1) / k);
        for (size_t i = 0; i < next.size(); ++i) {
            std::vector<Digest> children(k);
            for (uint32_t c = 0; c < k; ++c) {
                size_t idx = i * k + c;
                if (idx < prev.size()) children[c] = prev[idx];
            }
            next[i] = node_digest(kind, children);
        }
        t.levels.push_back(std::move(next));
    }
    t.root = t.levels.back().at(0);
    return t;
}

// The k children of an inner node, zero-padded.
inline std::vector<Digest> tree_children(const MerkleTree& t, uint32_t level_above, uint64_t node_index) {
    const auto& lvl = t.levels.at(level_above - 1);
    std::vector<Digest> out(t.k);
    for (uint32_t c = 0; c < t.k; ++c) {
        uint64_t idx = node_index * t.k + c;
        if (idx < lvl.size()) out[c] = lvl[idx];
    }
    return out;
}

inline MerklePath open_path(const MerkleTree& t, uint64_t index) {
    if (index >= t.n()) throw std::out_of_range("leaf index out of range");
    MerklePath p;
    p.kind = t.kind;
    p.k = t.k;
    p.n = t.n();
    p.index = index;
    p.leaf = t.leaves.at(index);
    uint64_t idx = index;
    for (uint32_t lvl = 0; lvl < t.depth(); ++lvl) {
        uint64_t group = idx / t.k;
        uint32_t pos = static_cast<uint32_t>(idx % t.k);
        std::vector<Digest> sibs;
        sibs.reserve(t.k - 1);
        for (uint32_t c = 0; c < t.k; ++c) {
            if (c == pos) continue;
            uint64_t s = group * t.k + c;
            sibs.push_back(s < t.levels[lvl].size() ? t.levels[lvl][s] : Digest{});
        }
        p.siblings.push_back(std::move(sibs));
        idx = group;
    }
    return p;
}

inline bool verify_path(const Digest& root, const MerklePath& p) {
    if (p.n == 0 || p.index >= p.n) return false;
    if (p.k < 2 || p.k > 64) return false;
    if (p.siblings.size() != tree_depth_for(p.n, p.k)) return false;
    Digest cur = leaf_digest(p.kind, p.leaf);
    uint64_t idx = p.index;
    for (const auto& sibs : p.siblings) {
        if (sibs.size() != p.k - 1) return false;
        uint32_t pos = static_cast<uint32_t>(idx % p.k);
        std::vector<Digest> children;
        children.reserve(p.k);
        for (uint32_t c = 0, s = 0; c < p.k; ++c) {
            if (c == pos) {
                children.push_back(cur);
            } else {
                children.push_back(sibs[s++]);
            }
        }
        cur = node_digest(p.kind, children);
        idx /= p.k;
    }
    return idx == 0 && cur == root;
}

// ---------------------------------------------------------------------
// Cell and leaf encoders
// ---------------------------------------------------------------------

namespace enc {

inline void put_u16(std::vector<uint8_t>& v, uint16_t x) {
    v.push_back(x & 0xFF);
    v.push_back((x >> 8) & 0xFF);
}
inline void put_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(x & 0xFF);
    v.push_back((x >> 8) & 0xFF);
    v.push_back((x >> 16) & 0xFF);
    v.push_back((x >> 24) & 0xFF);
}
inline void put_digest(std::vector<uint8_t>& v, const Digest& d) {
    v.insert(v.end(), d.bytes.begin(), d.bytes.end());
}

inline std::vector<uint8_t> value_cell(ScalarValue s) {
    std::vector<uint8_t> v;
    v.reserve(8);
    v.push_back(static_cast<uint8_t>(s.dtype));
    put_u32(v, s.bits);
    v.resize(8, 0);
    return v;
}

inline std::vector<uint8_t> var_cell(Var x) {
    std::vector<uint8_t> v;
    v.reserve(8);
    v.push_back(kResultTagVar);
    put_u32(v, x);
    v.resize(8, 0);
    return v;
}

inline std::vector<uint8_t> digest_cell(const Digest& d) {
    return std::vector<uint8_t>(d.bytes.begin(), d.bytes.end());
}

inline std::vector<uint8_t> value_cell32(ScalarValue s) {
    auto v = value_cell(s);
    v.resize(32, 0);
    return v;
}

inline std::vector<uint8_t> wiring_cell(uint32_t producer_record, uint32_t producer_slot, uint32_t elem_count) {
    std::vector<uint8_t> v;
    v.reserve(16);
    put_u32(v, producer_record);
    put_u32(v, producer_slot);
    put_u32(v, elem_count);
    put_u32(v, 0);
    return v;
}

struct WiringCell {
    uint32_t producer_record = 0;
    uint32_t producer_slot = 0;
    uint32_t elem_count = 0;
};

inline WiringCell parse_wiring_cell(const std::vector<uint8_t>& v) {
    auto u32 = [&](size_t off) {
        return static_cast<uint32_t>(v[off]) | (v[off + 1] << 8) | (v[off + 2] << 16) |
               (static_cast<uint32_t>(v[off + 3]) << 24);
    };
    if (v.size() != 16) throw std::invalid_argument("bad wiring cell");
    return {u32(0), u32(4), u32(8)};
}

inline ScalarValue parse_value_cell(const std::vector<uint8_t>& v) {
    if (v.size() < 8) throw std::invalid_argument("bad value cell");
    uint32_t bits = static_cast<uint32_t>(v[1]) | (v[2] << 8) | (v[3] << 16) | (static_cast<uint32_t>(v[4]) << 24);
    return {static_cast<DType>(v[0]), bits};
}

} // namespace enc

inline Digest cells_root(const std::vector<std::vector<uint8_t>>& cells, uint32_t k, TreeKind kind) {
    return build_tree(cells, k, kind).root;
}

inline MerkleTree tensor_tree(const Tensor& t, uint32_t k) {
    std::vector<std::vector<uint8_t>> cells;
    cells.reserve(t.data.size());
    for (int64_t i = 0; i < t.size(); ++i) cells.push_back(enc::value_cell(t.at(i)));
    if (cells.empty()) throw std::invalid_argument("tensor has no elements");
    return build_tree(std::move(cells), k, TreeKind::Tensor);
}

inline Digest tensor_digest(const Tensor& t, uint32_t k) { return tensor_tree(t, k).root; }

// Digest lists (per-record input fields, source lists, the claim digest)
// are field compressions like the operand subtrees: fixed binary arity.
inline MerkleTree digest_list_tree(const std::vector<Digest>& ds) {
    std::vector<std::vector<uint8_t>> cells;
    cells.reserve(ds.size());
    for (const auto& d : ds) cells.push_back(enc::digest_cell(d));
    return build_tree(std::move(cells), kCellTreeArity, TreeKind::Inputs);
}

inline Digest digest_list_root(const std::vector<Digest>& ds) { return digest_list_tree(ds).root; }

// Operand commitment of one VI.
inline MerkleTree operand_tree_symbolic(const SymbolicVI& vi, uint32_t /*k*/) {
    std::vector<std::vector<uint8_t>> cells;
    if (vi.tag == ViTag::In) {
        for (const auto& c : vi.consts) cells.push_back(enc::value_cell(c));
        if (cells.empty()) cells.push_back(enc::value_cell(ScalarValue{})); // placeholder for const-free circuits
    } else {
        for (Var v : vi.operands) cells.push_back(enc::var_cell(v));
    }
    return build_tree(std::move(cells), kCellTreeArity, TreeKind::Operands);
}

// The concrete in-item commits the input tensor digests (32-byte cells)
// followed by the structural constants padded to 32 bytes; the concrete
// out-item commits the output values with the tensor encoding, so its
// operand root equals the output tensor digest.
inline MerkleTree operand_tree_concrete_in(const std::vector<Digest>& input_tensor_digests,
                                           const std::vector<ScalarValue>& consts, uint32_t /*k*/) {
    std::vector<std::vector<uint8_t>> cells;
    for (const auto& d : input_tensor_digests) cells.push_back(enc::digest_cell(d));
    for (const auto& c : consts) cells.push_back(enc::value_cell32(c));
    if (cells.empty()) cells.push_back(enc::digest_cell(Digest{}));
    return build_tree(std::move(cells), kCellTreeArity, TreeKind::Inputs);
}

// The out item commits its values with the tensor encoding, so its operand
// root equals the output tensor digest at the protocol branch factor.
inline MerkleTree operand_tree_concrete(const ConcreteVI& vi, uint32_t k) {
    if (vi.tag == ViTag::In) throw std::logic_error("use operand_tree_concrete_in for the in item");
    std::vector<std::vector<uint8_t>> cells;
    for (const auto& v : vi.operands) cells.push_back(enc::value_cell(v));
    if (vi.tag == ViTag::Out) return build_tree(std::move(cells), k, TreeKind::Tensor);
    return build_tree(std::move(cells), kCellTreeArity, TreeKind::Operands);
}

// 40-byte circuit leaf.
inline std::vector<uint8_t> encode_vi_leaf(ViTag tag, uint16_t kind_code, const Digest& operand_root,
                                           uint8_t result_tag, uint32_t result_payload) {
    std::vector<uint8_t> v;
    v.reserve(40);
    v.push_back(static_cast<uint8_t>(tag));
    enc::put_u16(v, kind_code);
    enc::put_digest(v, operand_root);
    v.push_back(result_tag);
    enc::put_u32(v, result_payload);
    return v;
}

inline std::vector<uint8_t> encode_vi(const SymbolicVI& vi, uint32_t k) {
    Digest ops = operand_tree_symbolic(vi, k).root;
    switch (vi.tag) {
        case ViTag::In: return encode_vi_leaf(ViTag::In, kKindNone, ops, kResultTagCount, vi.result);
        case ViTag::Out:
            return encode_vi_leaf(ViTag::Out, kKindNone, ops, kResultTagCount,
                                  static_cast<uint32_t>(vi.operands.size()));
        default:
            return encode_vi_leaf(ViTag::Bop, static_cast<uint16_t>(vi.kind), ops, kResultTagVar, vi.result);
    }
}

inline std::vector<uint8_t> encode_vi(const ConcreteVI& vi, uint32_t k,
                                      const std::vector<Digest>* in_tensor_digests = nullptr,
                                      const std::vector<ScalarValue>* in_consts = nullptr) {
    if (vi.tag == ViTag::In) {
        if (!in_tensor_digests || !in_consts)
            throw std::logic_error("the concrete in item needs the input tensor digests");
        Digest ops = operand_tree_concrete_in(*in_tensor_digests, *in_consts, k).root;
        return encode_vi_leaf(ViTag::In, kKindNone, ops, kResultTagCount,
                              static_cast<uint32_t>(in_tensor_digests->size() + in_consts->size()));
    }
    Digest ops = operand_tree_concrete(vi, k).root;
    if (vi.tag == ViTag::Out)
        return encode_vi_leaf(ViTag::Out, kKindNone, ops, kResultTagCount,
                              static_cast<uint32_t>(vi.operands.size()));
    return encode_vi_leaf(ViTag::Bop, static_cast<uint16_t>(vi.kind), ops, static_cast<uint8_t>(vi.result.dtype),
                          vi.result.bits);
}

// Parsed view of a 40-byte circuit leaf, as the arbitrator reads it.
struct ViLeafView {
    ViTag tag;
    uint16_t kind_code;
    Digest operand_root;
    uint8_t result_tag;
    uint32_t result_payload;
};

inline ViLeafView parse_vi_leaf(const std::vector<uint8_t>& v) {
    if (v.size() != 40) throw std::invalid_argument("bad circuit leaf size");
    ViLeafView out;
    out.tag = static_cast<ViTag>(v[0]);
    out.kind_code = static_cast<uint16_t>(v[1]) | (v[2] << 8);
    std::copy(v.begin() + 3, v.begin() + 35, out.operand_root.bytes.begin());
    out.result_tag = v[35];
    out.result_payload =
        static_cast<uint32_t>(v[36]) | (v[37] << 8) | (v[38] << 16) | (static_cast<uint32_t>(v[39]) << 24);
    return out;
}

// ---------------------------------------------------------------------
// VI-sequence commitment: in/out items directly under the sequence root.
// ---------------------------------------------------------------------

struct ViCommitment {
    TreeKind kind;
    uint32_t k = 32;
    std::vector<uint8_t> in_leaf, out_leaf;
    Digest in_digest, out_digest;
    MerkleTree body; // interior items
    Digest root;

    uint64_t interior_n() const { return body.n(); }
};

inline ViCommitment build_vi_commitment(TreeKind kind, uint32_t k, std::vector<uint8_t> in_leaf,
                                        std::vector<std::vector<uint8_t>> interior,
                                        std::vector<uint8_t> out_leaf) {
    ViCommitment c;
    c.kind = kind;
    c.k = k;
    c.in_leaf = std::move(in_leaf);
    c.out_leaf = std::move(out_leaf);
    c.in_digest = leaf_digest(kind, c.in_leaf);
    c.out_digest = leaf_digest(kind, c.out_leaf);
    c.body = build_tree(std::move(interior), k, kind);
    c.root = sequence_root_digest(kind, c.in_digest, c.body.root, c.out_digest);
    return c;
}

// ---------------------------------------------------------------------
// P1 record leaves
// ---------------------------------------------------------------------

inline std::vector<uint8_t> encode_p1c_leaf(ViTag tag, const Digest& p2s_root, const Digest& inputs_root,
                                            const Digest& outputs_root) {
    std::vector<uint8_t> v;
    v.reserve(97);
    v.push_back(static_cast<uint8_t>(tag));
    enc::put_digest(v, p2s_root);
    enc::put_digest(v, inputs_root);
    enc::put_digest(v, outputs_root);
    return v;
}

struct P1CLeafView {
    ViTag tag;
    Digest p2s_root, inputs_root, outputs_root;
};

inline P1CLeafView parse_p1c_leaf(const std::vector<uint8_t>& v) {
    if (v.size() != 97) throw std::invalid_argument("bad operation leaf size");
    P1CLeafView out;
    out.tag = static_cast<ViTag>(v[0]);
    std::copy(v.begin() + 1, v.begin() + 33, out.p2s_root.bytes.begin());
    std::copy(v.begin() + 33, v.begin() + 65, out.inputs_root.bytes.begin());
    std::copy(v.begin() + 65, v.begin() + 97, out.outputs_root.bytes.begin());
    return out;
}

inline std::vector<uint8_t> encode_p1s_leaf(ViTag tag, const Digest& p2s_root, const Digest& wiring_root,
                                            uint32_t interior_size, uint32_t input_slots) {
    std::vector<uint8_t> v;
    v.reserve(73);
    v.push_back(static_cast<uint8_t>(tag));
    enc::put_digest(v, p2s_root);
    enc::put_digest(v, wiring_root);
    enc::put_u32(v, interior_size);
    enc::put_u32(v, input_slots);
    return v;
}

struct P1SLeafView {
    ViTag tag;
    Digest p2s_root, wiring_root;
    uint32_t interior_size;
    uint32_t input_slots;
};

inline P1SLeafView parse_p1s_leaf(const std::vector<uint8_t>& v) {
    if (v.size() != 73) throw std::invalid_argument("bad symbolic operation leaf size");
    P1SLeafView out;
    out.tag = static_cast<ViTag>(v[0]);
    std::copy(v.begin() + 1, v.begin() + 33, out.p2s_root.bytes.begin());
    std::copy(v.begin() + 33, v.begin() + 65, out.wiring_root.bytes.begin());
    auto u32 = [&](size_t off) {
        return static_cast<uint32_t>(v[off]) | (v[off + 1] << 8) | (v[off + 2] << 16) |
               (static_cast<uint32_t>(v[off + 3]) << 24);
    };
    out.interior_size = u32(65);
    out.input_slots = u32(69);
    return out;
}

inline ViCommitment build_p2s_commitment(const Circuit& c, uint32_t k) {
    auto vis = serialize_circuit(c);
    std::vector<std::vector<uint8_t>> interior;
    interior.reserve(vis.size() - 2);
    for (size_t i = 1; i + 1 < vis.size(); ++i) interior.push_back(encode_vi(vis[i], k));
    return build_vi_commitment(TreeKind::P2S, k, encode_vi(vis.front(), k), std::move(interior),
                               encode_vi(vis.back(), k));
}

// Symbolic circuit commitment (P2S), cached per circuit identity and k; the
// cache pins the circuit so pointer keys stay unique.
inline std::shared_ptr<const ViCommitment> p2s_commitment(const std::shared_ptr<const Circuit>& c, uint32_t k) {
    static std::mutex mu;
    static std::map<std::pair<const Circuit*, uint32_t>,
                    std::pair<std::shared_ptr<const Circuit>, std::shared_ptr<const ViCommitment>>>
        cache;
    {
        std::lock_guard<std::mutex> lk(mu);
        auto it = cache.find({c.get(), k});
        if (it != cache.end()) return it->second.second;
    }
    auto comm = std::make_shared<ViCommitment>(build_p2s_commitment(*c, k));
    std::lock_guard<std::mutex> lk(mu);
    auto [it, fresh] = cache.emplace(std::make_pair(c.get(), k), std::make_pair(c, comm));
    return it->second.second;
}

} // namespace graphpin
