#include <random>
#include <set>

#include "doctest.h"
#include "fulsim/chash.hpp"

using namespace fulsim;
using namespace fulsim::chash;

namespace {

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

mpz_class powm(const mpz_class& b, const mpz_class& e, const mpz_class& m) {
  mpz_class r;
  mpz_powm(r.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return r;
}

}  // namespace

TEST_CASE("default group is a valid Schnorr group") {
  const auto& g = default_group();
  CHECK_NOTHROW(validate(g));
  CHECK(mpz_sizeinbase(g.p.get_mpz_t(), 2) == 256);
  CHECK(powm(g.g, g.q, g.p) == 1);
  CHECK(g.g != 1);
}

TEST_CASE("group generation is deterministic and validates") {
  auto a = generate_group(160, 9);
  auto b = generate_group(160, 9);
  CHECK(a == b);
  CHECK_NOTHROW(validate(a));
  auto broken = a;
  broken.g = 1;
  CHECK_THROWS_AS(validate(broken), Error);
  broken = a;
  broken.q += 2;
  CHECK_THROWS_AS(validate(broken), Error);
}

TEST_CASE("keygen is deterministic and y = g^x") {
  const auto& g = default_group();
  auto k1 = keygen(g, seed_bytes(7));
  auto k2 = keygen(g, seed_bytes(7));
  CHECK(k1.sk.x == k2.sk.x);
  CHECK(k1.pk.y == powm(g.g, k1.sk.x, g.p));
  CHECK(matches(k1.sk, k1.pk));
}

TEST_CASE("distinct seeds give distinct secret keys") {
  const auto& g = default_group();
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(keygen(g, seed_bytes(s)).sk.x.get_str(16));
  CHECK(seen.size() == 100);
}

TEST_CASE("hash determinism, r sensitivity and the r = 0 case") {
  const auto& g = default_group();
  auto kp = keygen(g, seed_bytes(1));
  const auto m = as_bytes("model-uri");
  mpz_class r = 12345;
  CHECK(hash(kp.pk, m, r) == hash(kp.pk, m, r));
  CHECK(hash(kp.pk, m, r) != hash(kp.pk, m, (r + 1) % g.q));
  CHECK(hash(kp.pk, m, 0) == powm(g.g, payload_scalar(g, m), g.p));
  CHECK_THROWS_AS(hash(kp.pk, m, g.q), Error);
  CHECK_THROWS_AS(hash(kp.pk, m, -1), Error);
}

TEST_CASE("payload scalar reads SHA-256 big-endian mod q") {
  const auto& g = default_group();
  const auto d = sha256(std::string_view("abc"));
  mpz_class expected = from_bytes_be(ByteView(d));
  expected %= g.q;
  CHECK(payload_scalar(g, as_bytes("abc")) == expected);
}

TEST_CASE("verify accepts fresh triples and rejects a flipped byte") {
  const auto& g = default_group();
  auto kp = keygen(g, seed_bytes(2));
  HashDrbg rng(seed_bytes(3), "test");
  Bytes m = {1, 2, 3, 4};
  auto r = random_scalar(g, rng);
  auto h = hash(kp.pk, m, r);
  CHECK(verify(kp.pk, m, r, h));
  m[0] ^= 1;
  CHECK_FALSE(verify(kp.pk, m, r, h));
}

TEST_CASE("forge: identity, collision and wrong trapdoor") {
  const auto& g = default_group();
  auto kp = keygen(g, seed_bytes(4));
  auto other = keygen(g, seed_bytes(5));
  HashDrbg rng(seed_bytes(6), "test");
  const auto m = as_bytes("old");
  const auto m2 = as_bytes("new");
  auto r = random_scalar(g, rng);
  auto h = hash(kp.pk, m, r);
  CHECK(forge(kp.sk, m, r, m) == r);
  auto r2 = forge(kp.sk, m, r, m2);
  CHECK(verify(kp.pk, m2, r2, h));
  auto bad = forge(other.sk, m, r, m2);
  CHECK_FALSE(verify(kp.pk, m2, bad, h));
  CHECK_FALSE(matches(other.sk, kp.pk));
}

TEST_CASE("forged randomness collides for many random payload pairs") {
  const auto& g = default_group();
  auto kp = keygen(g, seed_bytes(8));
  HashDrbg rng(seed_bytes(9), "test");
  std::mt19937_64 gen(10);
  for (int i = 0; i < 200; ++i) {
    auto m = random_bytes(gen, 1 + gen() % 64);
    auto m2 = random_bytes(gen, 1 + gen() % 64);
    auto r = random_scalar(g, rng);
    auto h = hash(kp.pk, m, r);
    REQUIRE(verify(kp.pk, m2, forge(kp.sk, m, r, m2), h));
  }
}

TEST_CASE("big-endian encodings round-trip") {
  const auto& g = default_group();
  mpz_class v("123456789abcdef", 16);
  auto b = element_bytes(g, v);
  CHECK(b.size() == g.element_bytes());
  CHECK(from_bytes_be(b) == v);
  CHECK(from_hex_string(to_hex_string(v)) == v);
  CHECK_THROWS_AS(to_bytes_be(g.p, 4), Error);
}
