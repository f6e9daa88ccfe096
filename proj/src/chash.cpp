#include "fulsim/chash.hpp"

namespace fulsim::chash {

namespace {

constexpr int kPrimeReps = 40;

bool is_prime(const mpz_class& n) { return mpz_probab_prime_p(n.get_mpz_t(), kPrimeReps) > 0; }

mpz_class powm(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

mpz_class mod(const mpz_class& a, const mpz_class& m) {
  mpz_class out;
  mpz_mod(out.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return out;
}

mpz_class random_bits(HashDrbg& rng, unsigned bits) {
  Bytes buf = rng.next_bytes((bits + 7) / 8);
  mpz_class v = from_bytes_be(buf);
  mpz_class top = mpz_class(1) << (bits - 1);
  v %= top;
  return v + top;
}

}  // namespace

void validate(const GroupParams& params) {
  if (params.p < 5 || params.q < 2) throw Error("chash: group parameters too small");
  if (!is_prime(params.q)) throw Error("chash: q is not prime");
  if (!is_prime(params.p)) throw Error("chash: p is not prime");
  if (mod(params.p - 1, params.q) != 0) throw Error("chash: q does not divide p-1");
  if (params.g <= 1 || params.g >= params.p) throw Error("chash: generator out of range");
  if (powm(params.g, params.q, params.p) != 1) throw Error("chash: g does not have order q");
}

GroupParams generate_group(unsigned p_bits, std::uint64_t seed) {
  if (p_bits < 128) throw Error("chash: modulus must have at least 128 bits");
  const unsigned q_bits = p_bits >= 320 ? 256 : p_bits - 64;
  HashDrbg rng(seed_bytes(seed), "fulsim/group");

  GroupParams gp;
  for (;;) {
    mpz_class q_start = random_bits(rng, q_bits);
    mpz_nextprime(gp.q.get_mpz_t(), q_start.get_mpz_t());
    if (mpz_sizeinbase(gp.q.get_mpz_t(), 2) != q_bits) continue;

    bool found = false;
    for (int attempt = 0; attempt < 100000 && !found; ++attempt) {
      mpz_class k = random_bits(rng, p_bits - q_bits);
      if (mpz_odd_p(k.get_mpz_t())) k += 1;
      gp.p = k * gp.q + 1;
      found = mpz_sizeinbase(gp.p.get_mpz_t(), 2) == p_bits && is_prime(gp.p);
    }
    if (found) break;
  }
  const mpz_class cofactor = (gp.p - 1) / gp.q;
  for (mpz_class h = 2;; ++h) {
    gp.g = powm(h, cofactor, gp.p);
    if (gp.g != 1) break;
  }
  validate(gp);
  return gp;
}

const GroupParams& default_group() {
  static const GroupParams group = generate_group(256, 0x5eed);
  return group;
}

KeyPair keygen(const GroupParams& params, ByteView seed) {
  validate(params);
  HashDrbg rng(seed, "fulsim/chash-keygen");
  mpz_class x;
  do {
    x = random_scalar(params, rng);
  } while (x == 0);
  return KeyPair{PublicKey{params, powm(params.g, x, params.p)}, SecretKey{params, x}};
}

mpz_class payload_scalar(const GroupParams& params, ByteView payload) {
  Digest d = sha256(payload);
  return mod(from_bytes_be(d), params.q);
}

mpz_class random_scalar(const GroupParams& params, HashDrbg& rng) {
  // 64 extra bits keep the modular bias negligible.
  const std::size_t width = (mpz_sizeinbase(params.q.get_mpz_t(), 2) + 64 + 7) / 8;
  return mod(from_bytes_be(rng.next_bytes(width)), params.q);
}

mpz_class hash(const PublicKey& pk, ByteView payload, const mpz_class& r) {
  const GroupParams& gp = pk.params;
  if (r < 0 || r >= gp.q) throw Error("chash: randomness out of range");
  mpz_class m = payload_scalar(gp, payload);
  return mod(powm(gp.g, m, gp.p) * powm(pk.y, r, gp.p), gp.p);
}

bool verify(const PublicKey& pk, ByteView payload, const mpz_class& r,
            const mpz_class& digest) noexcept {
  try {
    return hash(pk, payload, r) == digest;
  } catch (...) {
    return false;
  }
}

mpz_class forge(const SecretKey& sk, ByteView payload, const mpz_class& r,
                ByteView new_payload) {
  const GroupParams& gp = sk.params;
  if (r < 0 || r >= gp.q) throw Error("chash: randomness out of range");
  mpz_class inv;
  if (mod(sk.x, gp.q) == 0 ||
      mpz_invert(inv.get_mpz_t(), sk.x.get_mpz_t(), gp.q.get_mpz_t()) == 0) {
    throw Error("chash: trapdoor is not invertible mod q");
  }
  mpz_class m = payload_scalar(gp, payload);
  mpz_class m_new = payload_scalar(gp, new_payload);
  return mod(r + (m - m_new) * inv, gp.q);
}

bool matches(const SecretKey& sk, const PublicKey& pk) {
  return sk.params == pk.params && powm(sk.params.g, sk.x, sk.params.p) == pk.y;
}

Bytes element_bytes(const GroupParams& params, const mpz_class& v) {
  return to_bytes_be(v, params.element_bytes());
}

Bytes to_bytes_be(const mpz_class& v, std::size_t width) {
  if (v < 0) throw Error("chash: negative value has no byte encoding");
  std::size_t needed = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (v == 0) needed = 0;
  if (needed > width) throw Error("chash: value wider than encoding");
  Bytes out(width, 0);
  std::size_t count = 0;
  if (needed > 0) {
    mpz_export(out.data() + (width - needed), &count, 1, 1, 1, 0, v.get_mpz_t());
  }
  return out;
}

mpz_class from_bytes_be(ByteView b) {
  mpz_class v;
  if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return v;
}

std::string to_hex_string(const mpz_class& v) { return v.get_str(16); }

mpz_class from_hex_string(const std::string& hex) {
  mpz_class v;
  if (hex.empty() || v.set_str(hex, 16) != 0) throw Error("chash: invalid hex integer '" + hex + "'");
  return v;
}

}  // namespace fulsim::chash
