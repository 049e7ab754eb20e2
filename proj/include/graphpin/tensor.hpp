#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "graphpin/dtype.hpp"

namespace graphpin {

using Shape = std::vector<int64_t>;

inline int64_t shape_elems(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

// Dense row-major tensor; elements stored as uniform 32-bit cells so trace
// and commitment encodings never depend on host layout.
struct Tensor {
    DType dtype = DType::F32;
    Shape shape;
    std::vector<uint32_t> data; // one cell per element

    Tensor() = default;
    Tensor(DType dt, Shape sh) : dtype(dt), shape(std::move(sh)) {
        data.assign(static_cast<size_t>(shape_elems(shape)), 0);
    }

    int64_t size() const { return shape_elems(shape); }
    ScalarValue at(int64_t i) const { return {dtype, data[static_cast<size_t>(i)]}; }
    void set(int64_t i, ScalarValue v) {
        if (v.dtype != dtype) throw std::invalid_argument("tensor element dtype mismatch");
        data[static_cast<size_t>(i)] = v.bits;
    }

    float f32(int64_t i) const { return bits_to_f32(data[static_cast<size_t>(i)]); }
    int32_t i32(int64_t i) const { return static_cast<int32_t>(data[static_cast<size_t>(i)]); }
    uint8_t u8(int64_t i) const { return static_cast<uint8_t>(data[static_cast<size_t>(i)] & 0xFF); }

    bool operator==(const Tensor& o) const {
        return dtype == o.dtype && shape == o.shape && data == o.data;
    }
};

// Row-major index helpers.
inline int64_t flat_index(const Shape& shape, const std::vector<int64_t>& coord) {
    int64_t idx = 0;
    for (size_t i = 0; i < shape.size(); ++i) idx = idx * shape[i] + coord[i];
    return idx;
}

inline std::vector<int64_t> unflatten(const Shape& shape, int64_t idx) {
    std::vector<int64_t> coord(shape.size());
    for (size_t i = shape.size(); i-- > 0;) {
        coord[i] = idx % shape[i];
        idx /= shape[i];
    }
    return coord;
}

// Unidirectional broadcast: `from` must align with the trailing dims of `to`,
// each extent equal or 1.
inline bool broadcastable_to(const Shape& from, const Shape& to) {
    if (from.size() > to.size()) return false;
    size_t off = to.size() - from.size();
    for (size_t i = 0; i < from.size(); ++i)
        if (from[i] != to[off + i] && from[i] != 1) return false;
    return true;
}

// Flat index into `from` for the element of `to` at flat index `idx`.
inline int64_t broadcast_index(const Shape& to, const Shape& from, int64_t idx) {
    auto coord = unflatten(to, idx);
    size_t off = to.size() - from.size();
    int64_t out = 0;
    for (size_t i = 0; i < from.size(); ++i) {
        int64_t c = from[i] == 1 ? 0 : coord[off + i];
        out = out * from[i] + c;
    }
    return out;
}

} // namespace graphpin
