#pragma once

#include <cstdint>
#include <utility>

// Integer-only IEEE-754 binary32 arithmetic, round-to-nearest-ties-even.
// This is the arbitration arithmetic: no float or double type appears in
// this header, so results are identical on any conforming C++ platform.
//
// Conventions shared by all operations:
//   - every NaN result is the canonical quiet NaN 0x7FC00000;
//   - subnormals are kept exact (no flush-to-zero);
//   - min/max are NaN-propagating and order -0 below +0;
//   - casts to integer truncate toward zero and saturate, NaN maps to 0.

namespace graphpin::softfloat {

using u32 = uint32_t;
using u64 = uint64_t;
using i32 = int32_t;
using i64 = int64_t;

constexpr u32 kQNaN = 0x7FC00000u;
constexpr u32 kPosInf = 0x7F800000u;

inline u32 sf_sign(u32 a) { return a >> 31; }
inline u32 sf_exp(u32 a) { return (a >> 23) & 0xFF; }
inline u32 sf_frac(u32 a) { return a & 0x7FFFFF; }
inline bool sf_is_nan(u32 a) { return sf_exp(a) == 0xFF && sf_frac(a) != 0; }
inline bool sf_is_inf(u32 a) { return sf_exp(a) == 0xFF && sf_frac(a) == 0; }
inline bool sf_is_zero(u32 a) { return (a & 0x7FFFFFFF) == 0; }
inline u32 sf_inf(u32 sign) { return (sign << 31) | kPosInf; }
inline u32 sf_zero(u32 sign) { return sign << 31; }

namespace detail {

inline int top_bit(u64 m) { return 63 - __builtin_clzll(m); }

// Significand and scale of a finite nonzero float: value = sig * 2^scale.
// Subnormals keep sig = frac unnormalized.
struct Decomp {
    u64 sig;
    int scale;
};

inline Decomp decompose(u32 a) {
    u32 e = sf_exp(a);
    if (e == 0) return {sf_frac(a), -149};
    return {sf_frac(a) | 0x800000u, static_cast<int>(e) - 150};
}

// Normalized variant: sig in [2^23, 2^24).
inline Decomp decompose_norm(u32 a) {
    Decomp d = decompose(a);
    while (d.sig < 0x800000u) {
        d.sig <<= 1;
        d.scale -= 1;
    }
    return d;
}

// Round and pack value (m + delta) * 2^scale with 0 <= delta < 1, delta > 0
// iff sticky. Caller must guarantee that after normalizing m so its top bit
// sits at position 26, delta still lies strictly below the lowest kept bit
// (true for all call sites: m is either exact or already has top bit >= 26).
inline u32 round_pack(u32 sign, int scale, u64 m, bool sticky) {
    if (m == 0) return sf_zero(sign); // exact zero (delta must be 0 here)
    int t = top_bit(m);
    if (t > 26) {
        int sh = t - 26;
        sticky = sticky || (m & ((1ull << sh) - 1)) != 0;
        m >>= sh;
    } else if (t < 26) {
        m <<= (26 - t);
    }
    // value = m * 2^(scale + t - 26); biased exponent of the leading bit:
    int e = scale + t + 127;
    if (e >= 255) return sf_inf(sign);
    if (e <= 0) {
        // subnormal range: shift down so the result exponent field is 0
        int sh = 1 - e;
        if (sh > 27) {
            m = 0;
            sticky = true;
        } else {
            sticky = sticky || (m & ((1ull << sh) - 1)) != 0;
            m >>= sh;
        }
        e = 1;
    }
    u32 grs = static_cast<u32>(m & 7);
    u64 base = m >> 3;
    bool round_up = grs > 4 || (grs == 4 && (sticky || (base & 1)));
    base += round_up ? 1 : 0;
    // Additive packing: a carry out of the significand bumps the exponent
    // field, and a subnormal rounding up to 2^23 becomes the minimal normal.
    u64 bits = (static_cast<u64>(e - 1) << 23) + base;
    if (((bits >> 23) & 0x1FF) >= 0xFF) return sf_inf(sign);
    return (sign << 31) | static_cast<u32>(bits);
}

// Magnitude ordering on the absolute bit patterns.
inline bool mag_lt(u32 a, u32 b) { return (a & 0x7FFFFFFF) < (b & 0x7FFFFFFF); }

inline u64 isqrt64(u64 x) {
    u64 r = 0, bit = 1ull << 62;
    while (bit > x) bit >>= 2;
    while (bit) {
        if (x >= r + bit) {
            x -= r + bit;
            r = (r >> 1) + bit;
        } else {
            r >>= 1;
        }
        bit >>= 2;
    }
    return r;
}

// Shared magnitude add/sub at scale E_big - 26; exact when the alignment
// distance fits, otherwise jammed into a sticky below bit 0.
inline u32 add_sub_core(u32 sign, u32 big, u32 small, bool subtract) {
    Decomp db = decompose(big), ds = decompose(small);
    int d = db.scale - ds.scale; // >= 0 by magnitude ordering of callers
    u64 mb = db.sig << 26;
    u64 msm;
    bool lost = false;
    if (d <= 26) {
        msm = ds.sig << (26 - d);
    } else {
        int sh = d - 26;
        if (sh > 63) {
            msm = 0;
            lost = ds.sig != 0;
        } else {
            msm = ds.sig >> sh;
            lost = (ds.sig & ((1ull << sh) - 1)) != 0;
        }
    }
    u64 m;
    bool sticky;
    if (!subtract) {
        m = mb + msm;
        sticky = lost;
    } else {
        // Lost low bits make the subtrahend slightly larger: borrow one and
        // report the fractional remainder through the sticky flag.
        m = mb - msm - (lost ? 1 : 0);
        sticky = lost;
        if (m == 0) return sf_zero(0); // equal magnitudes cancel to +0
    }
    return round_pack(sign, db.scale - 26, m, sticky);
}

} // namespace detail

inline u32 f32_add(u32 a, u32 b) {
    using namespace detail;
    if (sf_is_nan(a) || sf_is_nan(b)) return kQNaN;
    u32 sa = sf_sign(a), sb = sf_sign(b);
    if (sf_is_inf(a) || sf_is_inf(b)) {
        if (sf_is_inf(a) && sf_is_inf(b)) return sa == sb ? a : kQNaN;
        return sf_is_inf(a) ? a : b;
    }
    if (sa == sb) {
        if (sf_is_zero(a) && sf_is_zero(b)) return sf_zero(sa);
        if (mag_lt(a, b)) std::swap(a, b);
        return add_sub_core(sa, a, b, false);
    }
    // opposite signs: subtract the smaller magnitude from the larger
    if ((a & 0x7FFFFFFF) == (b & 0x7FFFFFFF)) return sf_zero(0);
    if (mag_lt(a, b)) {
        return add_sub_core(sb, b, a, true);
    }
    return add_sub_core(sa, a, b, true);
}

inline u32 f32_sub(u32 a, u32 b) {
    if (sf_is_nan(b)) return kQNaN;
    return f32_add(a, b ^ 0x80000000u);
}

inline u32 f32_mul(u32 a, u32 b) {
    using namespace detail;
    if (sf_is_nan(a) || sf_is_nan(b)) return kQNaN;
    u32 sign = sf_sign(a) ^ sf_sign(b);
    if (sf_is_inf(a) || sf_is_inf(b)) {
        if (sf_is_zero(a) || sf_is_zero(b)) return kQNaN;
        return sf_inf(sign);
    }
    if (sf_is_zero(a) || sf_is_zero(b)) return sf_zero(sign);
    Decomp da = decompose_norm(a), db = decompose_norm(b);
    u64 prod = da.sig * db.sig; // in [2^46, 2^48)
    return round_pack(sign, da.scale + db.scale, prod, false);
}

inline u32 f32_div(u32 a, u32 b) {
    using namespace detail;
    if (sf_is_nan(a) || sf_is_nan(b)) return kQNaN;
    u32 sign = sf_sign(a) ^ sf_sign(b);
    if (sf_is_inf(a)) return sf_is_inf(b) ? kQNaN : sf_inf(sign);
    if (sf_is_inf(b)) return sf_zero(sign);
    if (sf_is_zero(b)) return sf_is_zero(a) ? kQNaN : sf_inf(sign);
    if (sf_is_zero(a)) return sf_zero(sign);
    Decomp da = decompose_norm(a), db = decompose_norm(b);
    u64 num = da.sig << 31; // in [2^54, 2^55)
    u64 q = num / db.sig;   // in (2^30, 2^32)
    u64 rem = num - q * db.sig;
    return round_pack(sign, da.scale - db.scale - 31, q, rem != 0);
}

inline u32 f32_sqrt(u32 a) {
    using namespace detail;
    if (sf_is_nan(a)) return kQNaN;
    if (sf_is_zero(a)) return a; // sqrt(+-0) = +-0
    if (sf_sign(a)) return kQNaN;
    if (sf_is_inf(a)) return a;
    Decomp d = decompose_norm(a);
    // Write the value as f * 2^t with t = scale + 23 even and
    // F = f * 2^23 in [2^23, 2^25).
    u64 F = d.sig;
    int t = d.scale + 23;
    if (t & 1) {
        F <<= 1;
        t -= 1;
    }
    u64 q = isqrt64(F << 29); // sqrt(f) * 2^26, in [2^26, 2^27)
    u64 rem = (F << 29) - q * q;
    return round_pack(0, t / 2 - 26, q, rem != 0);
}

// NaN-propagating min/max with -0 < +0: total ordering on sign-magnitude.
namespace detail {
inline i64 order_key(u32 a) {
    i32 ia = static_cast<i32>(a);
    return ia < 0 ? -static_cast<i64>(a & 0x7FFFFFFF) - 1 : static_cast<i64>(a & 0x7FFFFFFF);
}
} // namespace detail

inline u32 f32_min(u32 a, u32 b) {
    if (sf_is_nan(a) || sf_is_nan(b)) return kQNaN;
    return detail::order_key(a) <= detail::order_key(b) ? a : b;
}

inline u32 f32_max(u32 a, u32 b) {
    if (sf_is_nan(a) || sf_is_nan(b)) return kQNaN;
    return detail::order_key(a) >= detail::order_key(b) ? a : b;
}

// Round to the nearest integer-valued float, ties to even.
inline u32 f32_round(u32 a) {
    using namespace detail;
    if (sf_is_nan(a)) return kQNaN;
    u32 e = sf_exp(a);
    if (e >= 150) return a; // already integral (covers inf)
    u32 sign = sf_sign(a);
    if (e <= 125) return sf_zero(sign); // |x| < 0.5
    u32 sig = sf_frac(a) | 0x800000u;
    int shift = 150 - static_cast<int>(e); // in [1, 24]
    u32 mask = (1u << shift) - 1;
    u32 rem = sig & mask;
    u64 base = sig >> shift;
    u32 half = 1u << (shift - 1);
    if (rem > half || (rem == half && (base & 1))) base += 1;
    return round_pack(sign, 0, base, false);
}

inline u32 f32_floor(u32 a) {
    using namespace detail;
    if (sf_is_nan(a)) return kQNaN;
    u32 e = sf_exp(a);
    if (e >= 150) return a;
    u32 sign = sf_sign(a);
    if (sf_is_zero(a)) return a;
    if (e <= 126) return sign ? 0xBF800000u /* -1.0 */ : sf_zero(0);
    u32 sig = sf_frac(a) | 0x800000u;
    int shift = 150 - static_cast<int>(e);
    u32 mask = (1u << shift) - 1;
    u64 base = sig >> shift;
    if (sign && (sig & mask)) base += 1;
    return round_pack(sign, 0, base, false);
}

// ---- casts -----------------------------------------------------------

inline i32 f32_to_i32(u32 a) {
    if (sf_is_nan(a)) return 0;
    u32 e = sf_exp(a);
    u32 sign = sf_sign(a);
    if (e < 127) return 0; // |x| < 1 truncates to 0
    u64 sig = sf_frac(a) | 0x800000u;
    int shift = static_cast<int>(e) - 150;
    u64 mag;
    if (e >= 0xFF || shift > 8) { // inf or >= 2^32
        mag = 0x100000000ull;
    } else if (shift >= 0) {
        mag = sig << shift;
    } else {
        mag = sig >> (-shift);
    }
    if (sign) {
        if (mag > 0x80000000ull) return INT32_MIN;
        return static_cast<i32>(-static_cast<i64>(mag));
    }
    if (mag > 0x7FFFFFFFull) return INT32_MAX;
    return static_cast<i32>(mag);
}

inline u32 f32_to_u8(u32 a) {
    if (sf_is_nan(a)) return 0;
    if (sf_sign(a)) return 0; // negatives truncate toward zero, clamp at 0
    u32 e = sf_exp(a);
    if (e < 127) return 0;
    u64 sig = sf_frac(a) | 0x800000u;
    int shift = static_cast<int>(e) - 150;
    u64 mag;
    if (e >= 0xFF || shift > 8) {
        mag = 256;
    } else if (shift >= 0) {
        mag = sig << shift;
    } else {
        mag = sig >> (-shift);
    }
    return mag > 255 ? 255 : static_cast<u32>(mag);
}

inline u32 u8_to_f32(u32 v) {
    return detail::round_pack(0, 0, v & 0xFF, false); // always exact
}

inline i32 u8_to_i32(u32 v) { return static_cast<i32>(v & 0xFF); }

inline u32 i32_to_f32(i32 v) {
    if (v == 0) return 0;
    u32 sign = v < 0 ? 1u : 0u;
    u64 mag = sign ? (~static_cast<u32>(v) + 1ull) : static_cast<u64>(static_cast<u32>(v));
    return detail::round_pack(sign, 0, mag, false);
}

// ---- wrap-around i32 arithmetic --------------------------------------

inline i32 i32_add(i32 a, i32 b) {
    return static_cast<i32>(static_cast<u32>(a) + static_cast<u32>(b));
}
inline i32 i32_sub(i32 a, i32 b) {
    return static_cast<i32>(static_cast<u32>(a) - static_cast<u32>(b));
}
inline i32 i32_mul(i32 a, i32 b) {
    return static_cast<i32>(static_cast<u32>(a) * static_cast<u32>(b));
}

// Canonicalize any NaN pattern to the single quiet representative.
inline u32 f32_canon(u32 a) { return sf_is_nan(a) ? kQNaN : a; }

} // namespace graphpin::softfloat
