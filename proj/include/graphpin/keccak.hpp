#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

// Keccak-256 with the original 0x01 padding (the Ethereum variant, not the
// SHA-3 0x06 padding). Rate 1088 bits, capacity 512, 32-byte digest.

namespace graphpin {

struct Digest {
    std::array<uint8_t, 32> bytes{};

    bool operator==(const Digest& o) const { return bytes == o.bytes; }
    bool operator!=(const Digest& o) const { return !(*this == o); }
    bool operator<(const Digest& o) const { return bytes < o.bytes; }
    bool is_zero() const {
        for (uint8_t b : bytes)
            if (b) return false;
        return true;
    }
    std::string hex() const {
        static const char* d = "0123456789abcdef";
        std::string s;
        s.reserve(64);
        for (uint8_t b : bytes) {
            s.push_back(d[b >> 4]);
            s.push_back(d[b & 15]);
        }
        return s;
    }
};

namespace keccak_detail {

constexpr uint64_t kRoundConstants[24] = {
    0x0000000000000001ull, 0x0000000000008082ull, 0x800000000000808aull, 0x8000000080008000ull,
    0x000000000000808bull, 0x0000000080000001ull, 0x8000000080008081ull, 0x8000000000008009ull,
    0x000000000000008aull, 0x0000000000000088ull, 0x0000000080008009ull, 0x000000008000000aull,
    0x000000008000808bull, 0x800000000000008bull, 0x8000000000008089ull, 0x8000000000008003ull,
    0x8000000000008002ull, 0x8000000000000080ull, 0x000000000000800aull, 0x800000008000000aull,
    0x8000000080008081ull, 0x8000000000008080ull, 0x0000000080000001ull, 0x8000000080008008ull};

constexpr int kRotc[24] = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                           27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
constexpr int kPiln[24] = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                           15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

inline uint64_t rotl(uint64_t x, int n) { return (x << n) | (x >> (64 - n)); }

inline void keccakf(uint64_t st[25]) {
    uint64_t bc0, bc1, bc2, bc3, bc4, t;
    for (int round = 0; round < 24; ++round) {
        // theta
        bc0 = st[0] ^ st[5] ^ st[10] ^ st[15] ^ st[20];
        bc1 = st[1] ^ st[6] ^ st[11] ^ st[16] ^ st[21];
        bc2 = st[2] ^ st[7] ^ st[12] ^ st[17] ^ st[22];
        bc3 = st[3] ^ st[8] ^ st[13] ^ st[18] ^ st[23];
        bc4 = st[4] ^ st[9] ^ st[14] ^ st[19] ^ st[24];
        t = bc4 ^ rotl(bc1, 1);
        st[0] ^= t;
        st[5] ^= t;
        st[10] ^= t;
        st[15] ^= t;
        st[20] ^= t;
        t = bc0 ^ rotl(bc2, 1);
        st[1] ^= t;
        st[6] ^= t;
        st[11] ^= t;
        st[16] ^= t;
        st[21] ^= t;
        t = bc1 ^ rotl(bc3, 1);
        st[2] ^= t;
        st[7] ^= t;
        st[12] ^= t;
        st[17] ^= t;
        st[22] ^= t;
        t = bc2 ^ rotl(bc4, 1);
        st[3] ^= t;
        st[8] ^= t;
        st[13] ^= t;
        st[18] ^= t;
        st[23] ^= t;
        t = bc3 ^ rotl(bc0, 1);
        st[4] ^= t;
        st[9] ^= t;
        st[14] ^= t;
        st[19] ^= t;
        st[24] ^= t;
        // rho + pi
        t = st[1];
        uint64_t u;
        u = st[10];
        st[10] = rotl(t, 1);
        t = u;
        u = st[7];
        st[7] = rotl(t, 3);
        t = u;
        u = st[11];
        st[11] = rotl(t, 6);
        t = u;
        u = st[17];
        st[17] = rotl(t, 10);
        t = u;
        u = st[18];
        st[18] = rotl(t, 15);
        t = u;
        u = st[3];
        st[3] = rotl(t, 21);
        t = u;
        u = st[5];
        st[5] = rotl(t, 28);
        t = u;
        u = st[16];
        st[16] = rotl(t, 36);
        t = u;
        u = st[8];
        st[8] = rotl(t, 45);
        t = u;
        u = st[21];
        st[21] = rotl(t, 55);
        t = u;
        u = st[24];
        st[24] = rotl(t, 2);
        t = u;
        u = st[4];
        st[4] = rotl(t, 14);
        t = u;
        u = st[15];
        st[15] = rotl(t, 27);
        t = u;
        u = st[23];
        st[23] = rotl(t, 41);
        t = u;
        u = st[19];
        st[19] = rotl(t, 56);
        t = u;
        u = st[13];
        st[13] = rotl(t, 8);
        t = u;
        u = st[12];
        st[12] = rotl(t, 25);
        t = u;
        u = st[2];
        st[2] = rotl(t, 43);
        t = u;
        u = st[20];
        st[20] = rotl(t, 62);
        t = u;
        u = st[14];
        st[14] = rotl(t, 18);
        t = u;
        u = st[22];
        st[22] = rotl(t, 39);
        t = u;
        u = st[9];
        st[9] = rotl(t, 61);
        t = u;
        u = st[6];
        st[6] = rotl(t, 20);
        t = u;
        u = st[1];
        st[1] = rotl(t, 44);
        t = u;
        // chi
        bc0 = st[0]; bc1 = st[1]; bc2 = st[2]; bc3 = st[3]; bc4 = st[4];
        st[0] = bc0 ^ (~bc1 & bc2);
        st[1] = bc1 ^ (~bc2 & bc3);
        st[2] = bc2 ^ (~bc3 & bc4);
        st[3] = bc3 ^ (~bc4 & bc0);
        st[4] = bc4 ^ (~bc0 & bc1);
        bc0 = st[5]; bc1 = st[6]; bc2 = st[7]; bc3 = st[8]; bc4 = st[9];
        st[5] = bc0 ^ (~bc1 & bc2);
        st[6] = bc1 ^ (~bc2 & bc3);
        st[7] = bc2 ^ (~bc3 & bc4);
        st[8] = bc3 ^ (~bc4 & bc0);
        st[9] = bc4 ^ (~bc0 & bc1);
        bc0 = st[10]; bc1 = st[11]; bc2 = st[12]; bc3 = st[13]; bc4 = st[14];
        st[10] = bc0 ^ (~bc1 & bc2);
        st[11] = bc1 ^ (~bc2 & bc3);
        st[12] = bc2 ^ (~bc3 & bc4);
        st[13] = bc3 ^ (~bc4 & bc0);
        st[14] = bc4 ^ (~bc0 & bc1);
        bc0 = st[15]; bc1 = st[16]; bc2 = st[17]; bc3 = st[18]; bc4 = st[19];
        st[15] = bc0 ^ (~bc1 & bc2);
        st[16] = bc1 ^ (~bc2 & bc3);
        st[17] = bc2 ^ (~bc3 & bc4);
        st[18] = bc3 ^ (~bc4 & bc0);
        st[19] = bc4 ^ (~bc0 & bc1);
        bc0 = st[20]; bc1 = st[21]; bc2 = st[22]; bc3 = st[23]; bc4 = st[24];
        st[20] = bc0 ^ (~bc1 & bc2);
        st[21] = bc1 ^ (~bc2 & bc3);
        st[22] = bc2 ^ (~bc3 & bc4);
        st[23] = bc3 ^ (~bc4 & bc0);
        st[24] = bc4 ^ (~bc0 & bc1);
        // iota
        st[0] ^= kRoundConstants[round];
    }
}

} // namespace keccak_detail

inline Digest keccak256(const uint8_t* data, size_t len) {
    constexpr size_t kRate = 136; // 1088-bit rate
    uint64_t st[25] = {};
    uint8_t block[kRate];
    size_t off = 0;
    while (len - off >= kRate) {
        for (size_t i = 0; i < kRate / 8; ++i) {
            uint64_t lane;
            std::memcpy(&lane, data + off + i * 8, 8);
            st[i] ^= lane; // little-endian hosts only; asserted in tests
        }
        keccak_detail::keccakf(st);
        off += kRate;
    }
    size_t rem = len - off;
    std::memset(block, 0, kRate);
    if (rem) std::memcpy(block, data + off, rem);
    block[rem] ^= 0x01;
    block[kRate - 1] ^= 0x80;
    for (size_t i = 0; i < kRate / 8; ++i) {
        uint64_t lane;
        std::memcpy(&lane, block + i * 8, 8);
        st[i] ^= lane;
    }
    keccak_detail::keccakf(st);
    Digest out;
    std::memcpy(out.bytes.data(), st, 32);
    return out;
}

inline Digest keccak256(const std::vector<uint8_t>& v) { return keccak256(v.data(), v.size()); }
inline Digest keccak256(const std::string& s) {
    return keccak256(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

} // namespace graphpin
