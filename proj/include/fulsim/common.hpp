#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fulsim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Digest sha256(ByteView data);
Digest sha256(std::string_view text);

std::string to_hex(ByteView data);
inline std::string to_hex(const Digest& d) { return to_hex(ByteView(d)); }
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Canonical byte encoding: fields are concatenated in declaration order.
// Integers are 8-byte little-endian; variable-length fields carry an 8-byte
// little-endian length prefix. See docs/canonical_encoding.md.
class Encoder {
 public:
  Encoder& u64(std::uint64_t v);
  Encoder& f64(double v);
  Encoder& bytes(ByteView b);
  Encoder& str(std::string_view s) { return bytes(as_bytes(s)); }
  // Fixed-size field, no length prefix.
  Encoder& raw(ByteView b);

  const Bytes& data() const& { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Deterministic byte generator: block_i = SHA-256(domain || seed || i).
class HashDrbg {
 public:
  HashDrbg(ByteView seed, std::string_view domain);

  void fill(std::span<std::uint8_t> out);
  Bytes next_bytes(std::size_t n);
  std::uint64_t next_u64();
  // Uniform in [0, bound) by rejection sampling; bound > 0.
  std::uint64_t uniform(std::uint64_t bound);

 private:
  Bytes prefix_;
  std::uint64_t counter_ = 0;
  Digest block_{};
  std::size_t used_ = block_.size();
};

Bytes seed_bytes(std::uint64_t seed);

}  // namespace fulsim
