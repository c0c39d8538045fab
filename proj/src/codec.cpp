#include "bms/codec.hpp"

#include <bit>
#include <cstring>

namespace bms {

Writer& Writer::u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
}

Writer& Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
}

Writer& Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
}

Writer& Writer::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

Writer& Writer::bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    out_.insert(out_.end(), b.begin(), b.end());
    return *this;
}

Writer& Writer::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
    return *this;
}

Writer& Writer::config(const Configuration& c) {
    u64(c.number);
    u32(static_cast<std::uint32_t>(c.members.size()));
    for (NodeId m : c.members) node(m);
    u32(static_cast<std::uint32_t>(c.v));
    return *this;
}

void Reader::need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated input");
}

std::uint8_t Reader::u8() {
    need(1);
    return in_[pos_++];
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

Bytes Reader::bytes() {
    const std::uint32_t n = u32();
    need(n);
    Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
}

std::string Reader::str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
}

Configuration Reader::config() {
    Configuration c;
    c.number = u64();
    const std::uint32_t n = u32();
    // Each member needs at least four bytes; reject absurd counts before allocating.
    need(static_cast<std::size_t>(n) * 4);
    c.members.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) c.members.push_back(node());
    c.v = u32();
    return c;
}

void Reader::expect_done() const {
    if (!done()) throw DecodeError("trailing bytes");
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : data) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace bms
