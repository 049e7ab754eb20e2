#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "graphpin/bop.hpp"
#include "graphpin/dtype.hpp"
#include "graphpin/softfloat.hpp"

#if defined(__FAST_MATH__)
#error "fast-math breaks bit-exact evaluation; build without it"
#endif
static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 binary32 required");

namespace graphpin::numerics {

using softfloat::kQNaN;

// ---------------------------------------------------------------------
// Reference path: host floating point for the arithmetic primitives the
// hardware rounds correctly, bit-level code where comparison idioms would
// miss signed zeros or NaNs. Every f32 result is NaN-canonicalized.
// ---------------------------------------------------------------------

namespace ref {

inline uint32_t canon(uint32_t b) { return softfloat::f32_canon(b); }

inline uint32_t f32_add(uint32_t a, uint32_t b) { return canon(f32_to_bits(bits_to_f32(a) + bits_to_f32(b))); }
inline uint32_t f32_sub(uint32_t a, uint32_t b) { return canon(f32_to_bits(bits_to_f32(a) - bits_to_f32(b))); }
inline uint32_t f32_mul(uint32_t a, uint32_t b) { return canon(f32_to_bits(bits_to_f32(a) * bits_to_f32(b))); }
inline uint32_t f32_div(uint32_t a, uint32_t b) { return canon(f32_to_bits(bits_to_f32(a) / bits_to_f32(b))); }
inline uint32_t f32_sqrt(uint32_t a) { return canon(f32_to_bits(std::sqrt(bits_to_f32(a)))); }

// std::max/std::fmax do not give the semantics we commit to; order on
// sign-magnitude keys instead.
inline uint32_t f32_min(uint32_t a, uint32_t b) { return softfloat::f32_min(a, b); }
inline uint32_t f32_max(uint32_t a, uint32_t b) { return softfloat::f32_max(a, b); }

inline uint32_t f32_round(uint32_t a) {
    float x = bits_to_f32(a);
    if (std::isnan(x)) return kQNaN;
    return f32_to_bits(std::nearbyintf(x)); // process default mode is to-nearest-even
}

inline uint32_t f32_floor(uint32_t a) {
    float x = bits_to_f32(a);
    if (std::isnan(x)) return kQNaN;
    return f32_to_bits(std::floor(x));
}

inline int32_t f32_to_i32(uint32_t a) {
    float x = bits_to_f32(a);
    if (std::isnan(x)) return 0;
    if (x >= 2147483648.0f) return INT32_MAX;
    if (x < -2147483648.0f) return INT32_MIN;
    return static_cast<int32_t>(x); // in [-2^31, 2^31), truncates toward zero
}

inline uint32_t f32_to_u8(uint32_t a) {
    float x = bits_to_f32(a);
    if (std::isnan(x)) return 0;
    if (x >= 256.0f) return 255;
    if (x <= 0.0f) return 0;
    uint32_t t = static_cast<uint32_t>(x); // truncation toward zero
    return t > 255 ? 255 : t;
}

inline uint32_t u8_to_f32(uint32_t v) { return f32_to_bits(static_cast<float>(v & 0xFF)); }
inline int32_t u8_to_i32(uint32_t v) { return static_cast<int32_t>(v & 0xFF); }
inline uint32_t i32_to_f32(int32_t v) { return f32_to_bits(static_cast<float>(v)); }

} // namespace ref

// ---------------------------------------------------------------------
// eval_bop, twice: the contract path uses only integer arithmetic, the
// reference path uses the host. Bit-identical results are mandated and
// exercised by the consistency suites.
// ---------------------------------------------------------------------

inline void check_signature(BopKind kind, const std::vector<ScalarValue>& ops) {
    if (static_cast<int>(ops.size()) != bop_arity(kind))
        throw std::invalid_argument(std::string("bad arity for ") + bop_name(kind));
    if (kind == BopKind::assign) return;
    DType want = bop_operand_dtype(kind);
    for (const auto& v : ops)
        if (v.dtype != want)
            throw std::invalid_argument(std::string("bad operand dtype for ") + bop_name(kind));
}

inline ScalarValue eval_bop_contract_scalar(BopKind kind, ScalarValue x, ScalarValue y = {}) {
    namespace sf = graphpin::softfloat;
    auto F = ScalarValue::f32_bits;
    uint32_t a = x.bits, b = y.bits;
    switch (kind) {
        case BopKind::f32_add: return F(sf::f32_add(a, b));
        case BopKind::f32_sub: return F(sf::f32_sub(a, b));
        case BopKind::f32_mul: return F(sf::f32_mul(a, b));
        case BopKind::f32_div: return F(sf::f32_div(a, b));
        case BopKind::f32_min: return F(sf::f32_min(a, b));
        case BopKind::f32_max: return F(sf::f32_max(a, b));
        case BopKind::f32_sqrt: return F(sf::f32_sqrt(a));
        case BopKind::f32_round: return F(sf::f32_round(a));
        case BopKind::f32_floor: return F(sf::f32_floor(a));
        case BopKind::i32_add: return ScalarValue::from_i32(sf::i32_add(x.as_i32(), y.as_i32()));
        case BopKind::i32_sub: return ScalarValue::from_i32(sf::i32_sub(x.as_i32(), y.as_i32()));
        case BopKind::i32_mul: return ScalarValue::from_i32(sf::i32_mul(x.as_i32(), y.as_i32()));
        case BopKind::assign:
            if (x.dtype == DType::F32) return F(sf::f32_canon(a));
            return x;
        case BopKind::f32_to_u8: return ScalarValue::from_u8(static_cast<uint8_t>(sf::f32_to_u8(a)));
        case BopKind::u8_to_f32: return F(sf::u8_to_f32(a));
        case BopKind::u8_to_i32: return ScalarValue::from_i32(sf::u8_to_i32(a));
        case BopKind::i32_to_f32: return F(sf::i32_to_f32(x.as_i32()));
        case BopKind::f32_to_i32: return ScalarValue::from_i32(sf::f32_to_i32(a));
    }
    throw std::logic_error("unreachable bop kind");
}

inline ScalarValue eval_bop_contract(BopKind kind, const std::vector<ScalarValue>& ops) {
    check_signature(kind, ops);
    return eval_bop_contract_scalar(kind, ops[0], ops.size() > 1 ? ops[1] : ScalarValue{});
}

// Startup self-test: the host fast path is allowed only when it agrees with
// the integer emulation on a spot-check of hard cases. A miscompiled build
// (contraction, fast-math, flush-to-zero) falls back to the integer path.
bool host_float_path_enabled();

inline ScalarValue eval_bop_reference_scalar(BopKind kind, ScalarValue x, ScalarValue y = {}) {
    if (!host_float_path_enabled()) return eval_bop_contract_scalar(kind, x, y);
    auto F = ScalarValue::f32_bits;
    uint32_t a = x.bits, b = y.bits;
    switch (kind) {
        case BopKind::f32_add: return F(ref::f32_add(a, b));
        case BopKind::f32_sub: return F(ref::f32_sub(a, b));
        case BopKind::f32_mul: return F(ref::f32_mul(a, b));
        case BopKind::f32_div: return F(ref::f32_div(a, b));
        case BopKind::f32_min: return F(ref::f32_min(a, b));
        case BopKind::f32_max: return F(ref::f32_max(a, b));
        case BopKind::f32_sqrt: return F(ref::f32_sqrt(a));
        case BopKind::f32_round: return F(ref::f32_round(a));
        case BopKind::f32_floor: return F(ref::f32_floor(a));
        case BopKind::i32_add: return ScalarValue::from_i32(softfloat::i32_add(x.as_i32(), y.as_i32()));
        case BopKind::i32_sub: return ScalarValue::from_i32(softfloat::i32_sub(x.as_i32(), y.as_i32()));
        case BopKind::i32_mul: return ScalarValue::from_i32(softfloat::i32_mul(x.as_i32(), y.as_i32()));
        case BopKind::assign:
            if (x.dtype == DType::F32) return F(ref::canon(a));
            return x;
        case BopKind::f32_to_u8: return ScalarValue::from_u8(static_cast<uint8_t>(ref::f32_to_u8(a)));
        case BopKind::u8_to_f32: return F(ref::u8_to_f32(a));
        case BopKind::u8_to_i32: return ScalarValue::from_i32(ref::u8_to_i32(a));
        case BopKind::i32_to_f32: return F(ref::i32_to_f32(x.as_i32()));
        case BopKind::f32_to_i32: return ScalarValue::from_i32(ref::f32_to_i32(a));
    }
    throw std::logic_error("unreachable bop kind");
}

inline ScalarValue eval_bop_reference(BopKind kind, const std::vector<ScalarValue>& ops) {
    check_signature(kind, ops);
    return eval_bop_reference_scalar(kind, ops[0], ops.size() > 1 ? ops[1] : ScalarValue{});
}

// The evaluator-facing name; E_C always goes through eval_bop_contract.
inline ScalarValue eval_bop(BopKind kind, const std::vector<ScalarValue>& ops) {
    return eval_bop_reference(kind, ops);
}

// ---------------------------------------------------------------------
// Corner-case generation
// ---------------------------------------------------------------------

struct CornerCase {
    BopKind kind;
    std::vector<ScalarValue> operands;
};

inline uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// 87 special f32 bit patterns: signed structured values plus seeded random
// patterns, so the binary cross product clears 7500 tuples.
inline const std::vector<uint32_t>& f32_special_pool() {
    static const std::vector<uint32_t> pool = [] {
        std::vector<uint32_t> mags = {
            0x00000000, // 0
            0x00000001, // min subnormal
            0x007FFFFF, // max subnormal
            0x00800000, // min normal
            0x7F7FFFFF, // max finite
            0x3F800000, // 1
            0x3FC00000, // 1.5
            0x40000000, // 2
            0x3F000000, // 0.5
            0x4B7FFFFF, // 2^24 - 1
            0x4B800000, // 2^24
            0x4B800001, // 2^24 + 2
            0x4AFFFFFF, // just below 2^23
            0x33800000, // 2^-24
            0x337FFFFF, // below 2^-24
            0x33800001, // above 2^-24
            0x7F800000, // inf
            0x7FC00000, // quiet NaN
            0x7F800001, // signaling NaN pattern
            0x7FBFFFFF, // NaN payload
            0x40490FDB, // pi
            0x3DCCCCCD, // 0.1
            0x42FE0000, // 127
            0x437F0000, // 255
            0x43800000, // 256
            0x4E800000, // 2^30
            0x4F000000, // 2^31
            0x4F800000, // 2^32
            0x00C00000, // 1.5 * min normal
            0x3F7FFFFF, // just below 1
        };
        std::vector<uint32_t> p;
        for (uint32_t m : mags) {
            p.push_back(m);
            p.push_back(m | 0x80000000u);
        }
        uint64_t seed = 0xC0FFEE5EEDull;
        while (p.size() < 87) p.push_back(static_cast<uint32_t>(splitmix64(seed)));
        return p;
    }();
    return pool;
}

inline std::vector<CornerCase> gen_corner_cases(BopKind kind) {
    if (!bop_is_f32_involved(kind))
        throw std::invalid_argument(std::string("no f32 corner suite for ") + bop_name(kind));
    std::vector<CornerCase> out;
    const auto& pool = f32_special_pool();
    DType in_dt = kind == BopKind::assign ? DType::F32 : bop_operand_dtype(kind);
    if (bop_arity(kind) == 2) {
        out.reserve(pool.size() * pool.size());
        for (uint32_t a : pool)
            for (uint32_t b : pool)
                out.push_back({kind, {ScalarValue::f32_bits(a), ScalarValue::f32_bits(b)}});
        return out;
    }
    if (in_dt == DType::U8) {
        for (uint32_t v = 0; v < 256; ++v) out.push_back({kind, {ScalarValue::from_u8(static_cast<uint8_t>(v))}});
        return out; // exhaustive over the whole domain
    }
    if (in_dt == DType::I32) {
        std::vector<int32_t> specials = {0,        1,        -1,       INT32_MAX, INT32_MIN,  16777215,
                                         16777216, 16777217, -16777216, -16777217, 2147483520, -2147483520,
                                         255,      256,      65536,     -65536,    33554432,   33554433};
        for (int32_t v : specials) out.push_back({kind, {ScalarValue::from_i32(v)}});
        uint64_t seed = 0x1234ABCDull;
        while (out.size() < 7500)
            out.push_back({kind, {ScalarValue::from_i32(static_cast<int32_t>(splitmix64(seed)))}});
        return out;
    }
    for (uint32_t a : pool) out.push_back({kind, {ScalarValue::f32_bits(a)}});
    uint64_t seed = 0xF00D5EEDull;
    while (out.size() < 7500)
        out.push_back({kind, {ScalarValue::f32_bits(static_cast<uint32_t>(splitmix64(seed)))}});
    return out;
}

// Seeded random operand tuple for any kind, used by the bulk random suites.
inline std::vector<ScalarValue> random_operands(BopKind kind, uint64_t& seed) {
    std::vector<ScalarValue> ops;
    DType dt = kind == BopKind::assign ? static_cast<DType>(splitmix64(seed) % 3) : bop_operand_dtype(kind);
    for (int i = 0; i < bop_arity(kind); ++i) {
        uint64_t r = splitmix64(seed);
        switch (dt) {
            case DType::F32: ops.push_back(ScalarValue::f32_bits(static_cast<uint32_t>(r))); break;
            case DType::I32: ops.push_back(ScalarValue::from_i32(static_cast<int32_t>(r))); break;
            case DType::U8: ops.push_back(ScalarValue::from_u8(static_cast<uint8_t>(r))); break;
        }
    }
    return ops;
}

inline bool run_host_path_self_test() {
    // Compare host primitives against the integer emulation on the corner
    // pool; any disagreement disables the fast path for the process.
    const auto& pool = f32_special_pool();
    namespace sf = graphpin::softfloat;
    for (uint32_t a : pool) {
        if (ref::f32_sqrt(a) != sf::f32_sqrt(a)) return false;
        if (ref::f32_round(a) != sf::f32_round(a)) return false;
        if (ref::f32_floor(a) != sf::f32_floor(a)) return false;
        if (ref::f32_to_i32(a) != sf::f32_to_i32(a)) return false;
        if (ref::f32_to_u8(a) != sf::f32_to_u8(a)) return false;
        for (uint32_t b : pool) {
            if (ref::f32_add(a, b) != sf::f32_add(a, b)) return false;
            if (ref::f32_sub(a, b) != sf::f32_sub(a, b)) return false;
            if (ref::f32_mul(a, b) != sf::f32_mul(a, b)) return false;
            if (ref::f32_div(a, b) != sf::f32_div(a, b)) return false;
        }
    }
    return true;
}

inline bool host_float_path_enabled() {
    static const bool ok = run_host_path_self_test();
    return ok;
}

} // namespace graphpin::numerics
