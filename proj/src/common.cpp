#include "fulsim/common.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <limits>

namespace fulsim {

Digest sha256(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error("sha256: EVP_Digest failed");
  }
  return out;
}

Digest sha256(std::string_view text) { return sha256(as_bytes(text)); }

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(data.size() * 2);
  for (auto b : data) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error("from_hex: odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error("from_hex: invalid digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Encoder& Encoder::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

Encoder& Encoder::bytes(ByteView b) {
  u64(b.size());
  return raw(b);
}

Encoder& Encoder::raw(ByteView b) {
  out_.insert(out_.end(), b.begin(), b.end());
  return *this;
}

HashDrbg::HashDrbg(ByteView seed, std::string_view domain) {
  prefix_ = Encoder().str(domain).bytes(seed).take();
}

void HashDrbg::fill(std::span<std::uint8_t> out) {
  for (auto& b : out) {
    if (used_ == block_.size()) {
      Bytes input = prefix_;
      Encoder e;
      e.u64(counter_++);
      input.insert(input.end(), e.data().begin(), e.data().end());
      block_ = sha256(input);
      used_ = 0;
    }
    b = block_[used_++];
  }
}

Bytes HashDrbg::next_bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t HashDrbg::next_u64() {
  std::array<std::uint8_t, 8> buf{};
  fill(buf);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t HashDrbg::uniform(std::uint64_t bound) {
  if (bound == 0) throw Error("HashDrbg::uniform: zero bound");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

Bytes seed_bytes(std::uint64_t seed) { return Encoder().u64(seed).take(); }

}  // namespace fulsim
