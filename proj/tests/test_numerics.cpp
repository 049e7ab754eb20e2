#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "graphpin/numerics.hpp"

using namespace graphpin;
namespace nm = graphpin::numerics;
namespace sf = graphpin::softfloat;

namespace {

ScalarValue F(float x) { return ScalarValue::from_f32(x); }
ScalarValue B(uint32_t b) { return ScalarValue::f32_bits(b); }
ScalarValue I(int32_t v) { return ScalarValue::from_i32(v); }

uint32_t add_c(uint32_t a, uint32_t b) { return nm::eval_bop_contract(BopKind::f32_add, {B(a), B(b)}).bits; }

// Independent oracle for correctly rounded binary32 ops: compute in double
// and round once. Safe for +,-,*,/ when the double result is re-rounded via
// a single conversion only when the operation is exactly representable in
// double (true for binary32 operands), and for sqrt by the 2p+2 margin.
uint32_t oracle_sqrt(uint32_t a) {
    float x = bits_to_f32(a);
    if (std::isnan(x)) return sf::kQNaN;
    double r = std::sqrt(static_cast<double>(x));
    return sf::f32_canon(f32_to_bits(static_cast<float>(r)));
}

} // namespace

TEST_CASE("f32_add basics") {
    CHECK(nm::eval_bop_contract(BopKind::f32_add, {F(1.0f), F(2.0f)}) == F(3.0f));
    // +0 + -0 is +0 under round-to-nearest
    CHECK(add_c(0x00000000u, 0x80000000u) == 0x00000000u);
    CHECK(add_c(0x80000000u, 0x80000000u) == 0x80000000u);
    // rounding at 2^24: 16777216 + 1 stays put
    CHECK(nm::eval_bop_contract(BopKind::f32_add, {F(16777216.0f), F(1.0f)}) == F(16777216.0f));
    CHECK(nm::eval_bop_contract(BopKind::f32_add, {F(16777216.0f), F(2.0f)}) == F(16777218.0f));
    // inf - inf is NaN
    CHECK(add_c(0x7F800000u, 0xFF800000u) == sf::kQNaN);
}

TEST_CASE("f32_min/max signed zero and NaN semantics") {
    CHECK(nm::eval_bop_contract(BopKind::f32_min, {B(0x80000000), B(0x00000000)}).bits == 0x80000000u);
    CHECK(nm::eval_bop_contract(BopKind::f32_max, {B(0x80000000), B(0x00000000)}).bits == 0x00000000u);
    CHECK(nm::eval_bop_contract(BopKind::f32_min, {B(sf::kQNaN), F(1.0f)}).bits == sf::kQNaN);
    CHECK(nm::eval_bop_contract(BopKind::f32_max, {F(1.0f), B(0x7F800001)}).bits == sf::kQNaN);
    CHECK(nm::eval_bop_contract(BopKind::f32_min, {F(-3.0f), F(2.0f)}) == F(-3.0f));
}

TEST_CASE("i32 wrap-around") {
    CHECK(nm::eval_bop_contract(BopKind::i32_mul, {I(65536), I(65536)}) == I(0));
    CHECK(nm::eval_bop_contract(BopKind::i32_add, {I(INT32_MAX), I(1)}) == I(INT32_MIN));
    CHECK(nm::eval_bop_contract(BopKind::i32_sub, {I(INT32_MIN), I(1)}) == I(INT32_MAX));
}

TEST_CASE("casts") {
    CHECK(nm::eval_bop_contract(BopKind::f32_to_i32, {F(1.7f)}) == I(1));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_i32, {F(-1.7f)}) == I(-1));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_i32, {B(sf::kQNaN)}) == I(0));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_i32, {F(3e9f)}) == I(INT32_MAX));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_i32, {F(-3e9f)}) == I(INT32_MIN));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_u8, {F(255.9f)}) == ScalarValue::from_u8(255));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_u8, {F(-0.5f)}) == ScalarValue::from_u8(0));
    CHECK(nm::eval_bop_contract(BopKind::f32_to_u8, {F(977.0f)}) == ScalarValue::from_u8(255));
    CHECK(nm::eval_bop_contract(BopKind::u8_to_f32, {ScalarValue::from_u8(200)}) == F(200.0f));
    CHECK(nm::eval_bop_contract(BopKind::u8_to_i32, {ScalarValue::from_u8(200)}) == I(200));
    CHECK(nm::eval_bop_contract(BopKind::i32_to_f32, {I(16777217)}) == F(16777216.0f));
    CHECK(nm::eval_bop_contract(BopKind::i32_to_f32, {I(INT32_MIN)}) == F(-2147483648.0f));
}

TEST_CASE("round and floor") {
    CHECK(nm::eval_bop_contract(BopKind::f32_round, {F(2.5f)}) == F(2.0f));
    CHECK(nm::eval_bop_contract(BopKind::f32_round, {F(3.5f)}) == F(4.0f));
    CHECK(nm::eval_bop_contract(BopKind::f32_round, {F(-0.5f)}).bits == 0x80000000u);
    CHECK(nm::eval_bop_contract(BopKind::f32_floor, {F(-0.5f)}) == F(-1.0f));
    CHECK(nm::eval_bop_contract(BopKind::f32_floor, {F(2.9f)}) == F(2.0f));
    CHECK(nm::eval_bop_contract(BopKind::f32_round, {B(0x7F800000)}).bits == 0x7F800000u);
}

TEST_CASE("assign canonicalizes f32 NaN") {
    CHECK(nm::eval_bop_contract(BopKind::assign, {B(0x7F800001)}).bits == sf::kQNaN);
    CHECK(nm::eval_bop_contract(BopKind::assign, {I(-7)}) == I(-7));
}

TEST_CASE("non-associativity witness") {
    uint32_t a = f32_to_bits(1e30f), b = f32_to_bits(-1e30f), c = f32_to_bits(1.0f);
    uint32_t left = add_c(add_c(a, b), c);
    uint32_t right = add_c(a, add_c(b, c));
    CHECK(left == f32_to_bits(1.0f));
    CHECK(right == f32_to_bits(0.0f));
    CHECK(left != right);
}

TEST_CASE("commutativity of add and mul on corner pool") {
    const auto& pool = nm::f32_special_pool();
    for (uint32_t a : pool)
        for (uint32_t b : pool) {
            CHECK(sf::f32_add(a, b) == sf::f32_add(b, a));
            CHECK(sf::f32_mul(a, b) == sf::f32_mul(b, a));
        }
}

TEST_CASE("sqrt correctly rounded on corner pool and seeded patterns") {
    const auto& pool = nm::f32_special_pool();
    for (uint32_t a : pool) CHECK(sf::f32_sqrt(a) == oracle_sqrt(a));
    uint64_t seed = 99;
    for (int i = 0; i < 200000; ++i) {
        uint32_t a = static_cast<uint32_t>(nm::splitmix64(seed));
        CHECK(sf::f32_sqrt(a) == oracle_sqrt(a));
    }
}

TEST_CASE("corner suite sizes") {
    CHECK(nm::f32_special_pool().size() == 87);
    CHECK(nm::gen_corner_cases(BopKind::f32_add).size() == 87 * 87);
    CHECK(nm::gen_corner_cases(BopKind::f32_add).size() >= 7500);
    CHECK(nm::gen_corner_cases(BopKind::f32_sqrt).size() >= 7500);
    CHECK(nm::gen_corner_cases(BopKind::u8_to_f32).size() == 256);
    CHECK_THROWS(nm::gen_corner_cases(BopKind::i32_add));
}

TEST_CASE("contract path equals reference path on corner suites") {
    REQUIRE(nm::host_float_path_enabled());
    for (int ki = 0; ki < kBopKindCount; ++ki) {
        BopKind k = static_cast<BopKind>(ki);
        if (!bop_is_f32_involved(k)) continue;
        for (const auto& cc : nm::gen_corner_cases(k)) {
            auto r = nm::eval_bop_reference(cc.kind, cc.operands);
            auto c = nm::eval_bop_contract(cc.kind, cc.operands);
            if (r != c) {
                CAPTURE(bop_name(cc.kind));
                CAPTURE(cc.operands[0].bits);
                if (cc.operands.size() > 1) CAPTURE(cc.operands[1].bits);
                REQUIRE(r == c);
            }
        }
    }
}

TEST_CASE("contract path equals reference path on random tuples") {
    uint64_t seed = 0xDEADBEEF;
    for (int ki = 0; ki < kBopKindCount; ++ki) {
        BopKind k = static_cast<BopKind>(ki);
        for (int i = 0; i < 20000; ++i) {
            auto ops = nm::random_operands(k, seed);
            auto r = nm::eval_bop_reference(k, ops);
            auto c = nm::eval_bop_contract(k, ops);
            if (r != c) {
                CAPTURE(bop_name(k));
                CAPTURE(ops[0].bits);
                REQUIRE(r == c);
            }
        }
    }
}

TEST_CASE("signature checking") {
    CHECK_THROWS(nm::eval_bop_contract(BopKind::f32_add, {F(1.0f)}));
    CHECK_THROWS(nm::eval_bop_contract(BopKind::f32_add, {F(1.0f), I(2)}));
    CHECK_THROWS(nm::eval_bop_contract(BopKind::f32_sqrt, {I(4)}));
}

// The reference path must also agree with the plain host double-rounding
// oracle for add/sub/mul/div, which pins the host down to IEEE semantics.
TEST_CASE("host arithmetic spot oracle") {
    uint64_t seed = 7;
    for (int i = 0; i < 50000; ++i) {
        uint32_t a = static_cast<uint32_t>(nm::splitmix64(seed));
        uint32_t b = static_cast<uint32_t>(nm::splitmix64(seed));
        float fa = bits_to_f32(a), fb = bits_to_f32(b);
        if (std::isnan(fa) || std::isnan(fb)) continue;
        float s = fa * fb;
        CHECK(sf::f32_mul(a, b) == sf::f32_canon(f32_to_bits(s)));
    }
}
