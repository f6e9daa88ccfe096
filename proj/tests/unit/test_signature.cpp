#include "doctest.h"
#include "fulsim/signature.hpp"

using namespace fulsim;

TEST_CASE("Schnorr signatures verify, are deterministic and bind the message") {
  const auto& g = chash::default_group();
  auto kp = sig::keygen(g, seed_bytes(1));
  auto other = sig::keygen(g, seed_bytes(2));
  const auto msg = as_bytes("node payload");
  auto s = sig::sign(kp.signing, msg);
  CHECK(s == sig::sign(kp.signing, msg));
  CHECK(sig::verify(kp.verifying, msg, s));
  CHECK_FALSE(sig::verify(other.verifying, msg, s));
  CHECK_FALSE(sig::verify(kp.verifying, as_bytes("node payloaD"), s));
  auto t = s;
  t.back() ^= 1;
  CHECK_FALSE(sig::verify(kp.verifying, msg, t));
  CHECK_FALSE(sig::verify(kp.verifying, msg, Bytes{1, 2, 3}));
}
