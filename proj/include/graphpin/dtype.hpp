#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace graphpin {

enum class DType : uint8_t { F32 = 0, I32 = 1, U8 = 2 };

inline const char* dtype_name(DType t) {
    switch (t) {
        case DType::F32: return "f32";
        case DType::I32: return "i32";
        case DType::U8: return "u8";
    }
    return "?";
}

inline DType dtype_from_name(const std::string& s) {
    if (s == "f32") return DType::F32;
    if (s == "i32") return DType::I32;
    if (s == "u8") return DType::U8;
    throw std::runtime_error("unknown dtype: " + s);
}

inline size_t dtype_size(DType t) { return t == DType::U8 ? 1 : 4; }

// One scalar of any supported element type. The payload is always the raw
// 32-bit pattern: f32 as its bit pattern, i32 as two's complement, u8 in the
// low byte. Trace encodings and the arbitrator operate on these bits only.
struct ScalarValue {
    DType dtype = DType::F32;
    uint32_t bits = 0;

    static ScalarValue f32_bits(uint32_t b) { return {DType::F32, b}; }
    static ScalarValue from_f32(float f);
    static ScalarValue from_i32(int32_t v) { return {DType::I32, static_cast<uint32_t>(v)}; }
    static ScalarValue from_u8(uint8_t v) { return {DType::U8, v}; }

    float as_f32() const;
    int32_t as_i32() const { return static_cast<int32_t>(bits); }
    uint8_t as_u8() const { return static_cast<uint8_t>(bits & 0xFF); }

    bool operator==(const ScalarValue& o) const { return dtype == o.dtype && bits == o.bits; }
    bool operator!=(const ScalarValue& o) const { return !(*this == o); }
};

inline uint32_t f32_to_bits(float f) {
    uint32_t b;
    static_assert(sizeof(float) == 4);
    __builtin_memcpy(&b, &f, 4);
    return b;
}

inline float bits_to_f32(uint32_t b) {
    float f;
    __builtin_memcpy(&f, &b, 4);
    return f;
}

inline ScalarValue ScalarValue::from_f32(float f) { return {DType::F32, f32_to_bits(f)}; }
inline float ScalarValue::as_f32() const { return bits_to_f32(bits); }

} // namespace graphpin
