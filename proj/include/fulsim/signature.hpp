#pragma once

// Deterministic Schnorr signatures over the chameleon-hash group. Used to
// sign model nodes before they are broadcast; nonces are derived from the
// secret and the message so signing needs no RNG.

#include "fulsim/chash.hpp"

namespace fulsim::sig {

struct SigningKey {
  chash::GroupParams params;
  mpz_class x;
};

struct VerifyingKey {
  chash::GroupParams params;
  mpz_class y;
};

struct KeyPair {
  SigningKey signing;
  VerifyingKey verifying;
};

KeyPair keygen(const chash::GroupParams& params, ByteView seed);

// Signature bytes: e || s, each a fixed-width big-endian scalar.
Bytes sign(const SigningKey& key, ByteView message);
bool verify(const VerifyingKey& key, ByteView message, ByteView signature) noexcept;

}  // namespace fulsim::sig
