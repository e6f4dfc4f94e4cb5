#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "fairflip/numerics.hpp"
#include "fairflip/rng.hpp"

namespace fairflip {

// Fixed-width bit strings carried between parties. XOR sharing operates on the
// raw bits; `kind` says how to decode a reconstructed value.
enum class EncodingKind : std::uint8_t { Bit, SignedInt, Delta64, Bundle };

struct EncodedValue {
    EncodingKind kind = EncodingKind::Bit;
    std::uint32_t width_bits = 1;
    std::uint32_t int_width = 0;  // for SignedInt and the integer half of Bundle
    std::vector<std::uint8_t> bytes;

    bool operator==(const EncodedValue&) const = default;
};

namespace detail {

inline std::size_t byte_len(std::uint32_t width_bits) { return (width_bits + 7) / 8; }

inline void mask_top(EncodedValue& v) {
    if (v.bytes.empty()) return;
    unsigned rem = v.width_bits % 8;
    if (rem != 0) v.bytes.back() &= static_cast<std::uint8_t>((1u << rem) - 1);
}

inline void store_bits(std::vector<std::uint8_t>& bytes, std::size_t bit_off, std::uint64_t value, unsigned nbits) {
    for (unsigned b = 0; b < nbits; ++b) {
        std::size_t pos = bit_off + b;
        std::uint8_t bit = static_cast<std::uint8_t>((value >> b) & 1);
        bytes[pos / 8] = static_cast<std::uint8_t>((bytes[pos / 8] & ~(1u << (pos % 8))) | (bit << (pos % 8)));
    }
}

inline std::uint64_t load_bits(const std::vector<std::uint8_t>& bytes, std::size_t bit_off, unsigned nbits) {
    std::uint64_t v = 0;
    for (unsigned b = 0; b < nbits; ++b) {
        std::size_t pos = bit_off + b;
        v |= static_cast<std::uint64_t>((bytes[pos / 8] >> (pos % 8)) & 1) << b;
    }
    return v;
}

}  // namespace detail

inline EncodedValue encode_bit(int bit) {
    EncodedValue v;
    v.kind = EncodingKind::Bit;
    v.width_bits = 1;
    v.bytes = {static_cast<std::uint8_t>(bit & 1)};
    return v;
}

inline int decode_bit(const EncodedValue& v) {
    if (v.kind != EncodingKind::Bit) throw std::invalid_argument("decode_bit: wrong kind");
    return v.bytes[0] & 1;
}

// Two's complement at the given width.
inline EncodedValue encode_signed(long value, std::uint32_t width_bits) {
    if (width_bits == 0 || width_bits > 63) throw std::invalid_argument("encode_signed: bad width");
    long lo = -(1L << (width_bits - 1)), hi = (1L << (width_bits - 1)) - 1;
    if (value < lo || value > hi) throw std::invalid_argument("encode_signed: value out of range");
    EncodedValue v;
    v.kind = EncodingKind::SignedInt;
    v.width_bits = width_bits;
    v.int_width = width_bits;
    v.bytes.assign(detail::byte_len(width_bits), 0);
    detail::store_bits(v.bytes, 0, static_cast<std::uint64_t>(value) & ((width_bits == 64 ? ~0ULL : (1ULL << width_bits) - 1)), width_bits);
    return v;
}

inline long decode_signed(const EncodedValue& v) {
    if (v.kind != EncodingKind::SignedInt) throw std::invalid_argument("decode_signed: wrong kind");
    std::uint64_t raw = detail::load_bits(v.bytes, 0, v.int_width);
    if (v.int_width < 64 && (raw >> (v.int_width - 1)) & 1) raw |= ~((1ULL << v.int_width) - 1);
    return static_cast<long>(raw);
}

inline EncodedValue encode_delta64(const DeltaValue& d) {
    EncodedValue v;
    v.kind = EncodingKind::Delta64;
    v.width_bits = 64;
    v.bytes.assign(8, 0);
    detail::store_bits(v.bytes, 0, d.fixed64, 64);
    return v;
}

inline DeltaValue decode_delta64(const EncodedValue& v) {
    if (v.kind != EncodingKind::Delta64) throw std::invalid_argument("decode_delta64: wrong kind");
    std::uint64_t raw = detail::load_bits(v.bytes, 0, 64);
    return DeltaValue{delta_from_fixed64(raw), raw};
}

// (coin, delta) bundle: two's-complement integer followed by a delta64.
inline EncodedValue encode_coin_delta(long coin, std::uint32_t coin_width, const DeltaValue& d) {
    EncodedValue v;
    v.kind = EncodingKind::Bundle;
    v.width_bits = coin_width + 64;
    v.int_width = coin_width;
    v.bytes.assign(detail::byte_len(v.width_bits), 0);
    detail::store_bits(v.bytes, 0, static_cast<std::uint64_t>(coin) & ((1ULL << coin_width) - 1), coin_width);
    detail::store_bits(v.bytes, coin_width, d.fixed64, 64);
    return v;
}

inline std::pair<long, DeltaValue> decode_coin_delta(const EncodedValue& v) {
    if (v.kind != EncodingKind::Bundle) throw std::invalid_argument("decode_coin_delta: wrong kind");
    std::uint64_t raw = detail::load_bits(v.bytes, 0, v.int_width);
    if ((raw >> (v.int_width - 1)) & 1) raw |= ~((1ULL << v.int_width) - 1);
    std::uint64_t draw = detail::load_bits(v.bytes, v.int_width, 64);
    return {static_cast<long>(raw), DeltaValue{delta_from_fixed64(draw), draw}};
}

// t-out-of-t XOR shares of an encoded value.
struct ShareSet {
    std::uint32_t count = 0;
    EncodingKind kind = EncodingKind::Bit;
    std::uint32_t width_bits = 0;
    std::uint32_t int_width = 0;
    std::vector<std::vector<std::uint8_t>> shares;  // one byte vector per party

    EncodedValue share_as_value(std::size_t idx) const {
        EncodedValue v;
        v.kind = kind;
        v.width_bits = width_bits;
        v.int_width = int_width;
        v.bytes = shares.at(idx);
        return v;
    }
};

inline ShareSet share(const EncodedValue& value, std::uint32_t t, SplitRng& rng) {
    if (t == 0) throw std::domain_error("share: need at least one share");
    ShareSet s;
    s.count = t;
    s.kind = value.kind;
    s.width_bits = value.width_bits;
    s.int_width = value.int_width;
    s.shares.assign(t, std::vector<std::uint8_t>(value.bytes.size(), 0));
    std::vector<std::uint8_t> acc = value.bytes;
    for (std::uint32_t i = 0; i + 1 < t; ++i) {
        EncodedValue tmp{value.kind, value.width_bits, value.int_width,
                         std::vector<std::uint8_t>(acc.size(), 0)};
        for (auto& b : tmp.bytes) b = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
        detail::mask_top(tmp);
        s.shares[i] = tmp.bytes;
        for (std::size_t b = 0; b < acc.size(); ++b) acc[b] ^= tmp.bytes[b];
    }
    s.shares[t - 1] = acc;
    return s;
}

inline EncodedValue reconstruct(const ShareSet& s) {
    if (s.shares.size() != s.count || s.count == 0) throw std::invalid_argument("reconstruct: incomplete share set");
    EncodedValue v;
    v.kind = s.kind;
    v.width_bits = s.width_bits;
    v.int_width = s.int_width;
    v.bytes.assign(s.shares[0].size(), 0);
    for (const auto& sh : s.shares) {
        if (sh.size() != v.bytes.size()) throw std::invalid_argument("reconstruct: ragged shares");
        for (std::size_t b = 0; b < sh.size(); ++b) v.bytes[b] ^= sh[b];
    }
    detail::mask_top(v);
    return v;
}

// XOR of share vectors from two parties' halves (used when a value is
// reconstructed from transmitted shares rather than a full ShareSet).
inline EncodedValue xor_values(const EncodedValue& a, const EncodedValue& b) {
    if (a.width_bits != b.width_bits || a.kind != b.kind) throw std::invalid_argument("xor_values: mismatched operands");
    EncodedValue v = a;
    for (std::size_t i = 0; i < v.bytes.size(); ++i) v.bytes[i] ^= b.bytes[i];
    detail::mask_top(v);
    return v;
}

inline ShareSet share_coin_delta(long coin, std::uint32_t coin_width, const DeltaValue& d, std::uint32_t t, SplitRng& rng) {
    return share(encode_coin_delta(coin, coin_width, d), t, rng);
}

}  // namespace fairflip
