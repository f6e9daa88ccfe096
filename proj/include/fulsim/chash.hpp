#pragma once

// Discrete-log chameleon hash: h = g^H(m) * y^r mod p over the order-q
// subgroup of Z_p^*. Whoever holds x = log_g(y) can re-randomize r so that
// any new payload maps onto an existing digest.

#include <gmpxx.h>

#include <cstdint>
#include <string>

#include "fulsim/common.hpp"

namespace fulsim::chash {

struct GroupParams {
  mpz_class p;
  mpz_class q;
  mpz_class g;

  std::size_t element_bytes() const { return (mpz_sizeinbase(p.get_mpz_t(), 2) + 7) / 8; }
  bool operator==(const GroupParams&) const = default;
};

// Throws Error if q is composite, q does not divide p-1, p is composite, or g
// does not generate the order-q subgroup.
void validate(const GroupParams& params);

// Schnorr group with a p_bits-bit modulus, derived deterministically from
// seed. Test-scale: the default 256 bits is fast, not production-secure.
GroupParams generate_group(unsigned p_bits, std::uint64_t seed);

// 256-bit group used when a scenario does not supply its own.
const GroupParams& default_group();

struct PublicKey {
  GroupParams params;
  mpz_class y;
};

struct SecretKey {
  GroupParams params;
  mpz_class x;
};

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
};

KeyPair keygen(const GroupParams& params, ByteView seed);

// Payload-to-scalar map: SHA-256(payload) read big-endian, reduced mod q.
mpz_class payload_scalar(const GroupParams& params, ByteView payload);

// Uniform scalar in [0, q) drawn from the generator.
mpz_class random_scalar(const GroupParams& params, HashDrbg& rng);

mpz_class hash(const PublicKey& pk, ByteView payload, const mpz_class& r);

bool verify(const PublicKey& pk, ByteView payload, const mpz_class& r,
            const mpz_class& digest) noexcept;

// Returns r' with hash(pk, new_payload, r') == hash(pk, payload, r).
mpz_class forge(const SecretKey& sk, ByteView payload, const mpz_class& r,
                ByteView new_payload);

bool matches(const SecretKey& sk, const PublicKey& pk);

// Fixed-width big-endian encoding of a group element or scalar.
Bytes element_bytes(const GroupParams& params, const mpz_class& v);
Bytes to_bytes_be(const mpz_class& v, std::size_t width);
mpz_class from_bytes_be(ByteView b);

std::string to_hex_string(const mpz_class& v);
mpz_class from_hex_string(const std::string& hex);

}  // namespace fulsim::chash
