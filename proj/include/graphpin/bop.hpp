#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "graphpin/dtype.hpp"

namespace graphpin {

// The closed set of eighteen basic operations every circuit is built from.
// `assign` covers all three element types; casts are named source_to_dest.
enum class BopKind : uint16_t {
    f32_add = 0,
    f32_sub,
    f32_mul,
    f32_div,
    f32_min,
    f32_max,
    f32_sqrt,
    f32_round,
    f32_floor,
    i32_add,
    i32_sub,
    i32_mul,
    assign,
    f32_to_u8,
    u8_to_f32,
    u8_to_i32,
    i32_to_f32,
    f32_to_i32,
};

constexpr int kBopKindCount = 18;

inline const char* bop_name(BopKind k) {
    switch (k) {
        case BopKind::f32_add: return "f32_add";
        case BopKind::f32_sub: return "f32_sub";
        case BopKind::f32_mul: return "f32_mul";
        case BopKind::f32_div: return "f32_div";
        case BopKind::f32_min: return "f32_min";
        case BopKind::f32_max: return "f32_max";
        case BopKind::f32_sqrt: return "f32_sqrt";
        case BopKind::f32_round: return "f32_round";
        case BopKind::f32_floor: return "f32_floor";
        case BopKind::i32_add: return "i32_add";
        case BopKind::i32_sub: return "i32_sub";
        case BopKind::i32_mul: return "i32_mul";
        case BopKind::assign: return "assign";
        case BopKind::f32_to_u8: return "f32_to_u8";
        case BopKind::u8_to_f32: return "u8_to_f32";
        case BopKind::u8_to_i32: return "u8_to_i32";
        case BopKind::i32_to_f32: return "i32_to_f32";
        case BopKind::f32_to_i32: return "f32_to_i32";
    }
    return "?";
}

inline BopKind bop_from_name(const std::string& s) {
    for (int i = 0; i < kBopKindCount; ++i) {
        BopKind k = static_cast<BopKind>(i);
        if (s == bop_name(k)) return k;
    }
    throw std::runtime_error("unknown bop kind: " + s);
}

inline int bop_arity(BopKind k) {
    switch (k) {
        case BopKind::f32_add:
        case BopKind::f32_sub:
        case BopKind::f32_mul:
        case BopKind::f32_div:
        case BopKind::f32_min:
        case BopKind::f32_max:
        case BopKind::i32_add:
        case BopKind::i32_sub:
        case BopKind::i32_mul:
            return 2;
        default:
            return 1;
    }
}

// Operand dtype; `assign` takes any dtype (the operand decides).
inline DType bop_operand_dtype(BopKind k) {
    switch (k) {
        case BopKind::i32_add:
        case BopKind::i32_sub:
        case BopKind::i32_mul:
        case BopKind::i32_to_f32:
            return DType::I32;
        case BopKind::u8_to_f32:
        case BopKind::u8_to_i32:
            return DType::U8;
        default:
            return DType::F32;
    }
}

inline DType bop_result_dtype(BopKind k, DType operand_dtype) {
    switch (k) {
        case BopKind::i32_add:
        case BopKind::i32_sub:
        case BopKind::i32_mul:
        case BopKind::u8_to_i32:
        case BopKind::f32_to_i32:
            return DType::I32;
        case BopKind::f32_to_u8:
            return DType::U8;
        case BopKind::assign:
            return operand_dtype;
        default:
            return DType::F32;
    }
}

inline bool bop_is_f32_involved(BopKind k) {
    switch (k) {
        case BopKind::i32_add:
        case BopKind::i32_sub:
        case BopKind::i32_mul:
        case BopKind::u8_to_i32:
            return false;
        default:
            return true;
    }
}

} // namespace graphpin
