#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

#include "bms/membership.hpp"
#include "bms/types.hpp"

namespace bms {

class DecodeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Little-endian, length-prefixed canonical encoding.
class Writer {
  public:
    Writer& u8(std::uint8_t v);
    Writer& u32(std::uint32_t v);
    Writer& u64(std::uint64_t v);
    Writer& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
    Writer& f64(double v);
    Writer& node(NodeId id) { return u32(id.value); }
    Writer& bytes(std::span<const std::uint8_t> b);
    Writer& str(std::string_view s);
    Writer& config(const Configuration& c);

    const Bytes& data() const& { return out_; }
    Bytes take() && { return std::move(out_); }

  private:
    Bytes out_;
};

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    NodeId node() { return NodeId{u32()}; }
    Bytes bytes();
    std::string str();
    Configuration config();

    bool done() const { return pos_ == in_.size(); }
    void expect_done() const;

  private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> data);

}  // namespace bms
