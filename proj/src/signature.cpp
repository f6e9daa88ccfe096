#include "fulsim/signature.hpp"

namespace fulsim::sig {

namespace {

std::size_t scalar_width(const chash::GroupParams& gp) {
  return (mpz_sizeinbase(gp.q.get_mpz_t(), 2) + 7) / 8;
}

mpz_class challenge(const chash::GroupParams& gp, const mpz_class& commitment, ByteView message) {
  Bytes input = Encoder()
                    .str("fulsim/schnorr-challenge")
                    .bytes(chash::element_bytes(gp, commitment))
                    .bytes(message)
                    .take();
  return chash::payload_scalar(gp, input);
}

}  // namespace

KeyPair keygen(const chash::GroupParams& params, ByteView seed) {
  chash::validate(params);
  HashDrbg rng(seed, "fulsim/schnorr-keygen");
  mpz_class x;
  do {
    x = chash::random_scalar(params, rng);
  } while (x == 0);
  mpz_class y;
  mpz_powm(y.get_mpz_t(), params.g.get_mpz_t(), x.get_mpz_t(), params.p.get_mpz_t());
  return KeyPair{SigningKey{params, x}, VerifyingKey{params, y}};
}

Bytes sign(const SigningKey& key, ByteView message) {
  const auto& gp = key.params;
  const std::size_t width = scalar_width(gp);
  Bytes nonce_seed = Encoder().bytes(chash::to_bytes_be(key.x, width)).bytes(message).take();
  HashDrbg rng(nonce_seed, "fulsim/schnorr-nonce");
  mpz_class k;
  do {
    k = chash::random_scalar(gp, rng);
  } while (k == 0);

  mpz_class commitment;
  mpz_powm(commitment.get_mpz_t(), gp.g.get_mpz_t(), k.get_mpz_t(), gp.p.get_mpz_t());
  mpz_class e = challenge(gp, commitment, message);
  mpz_class s = k + e * key.x;
  mpz_mod(s.get_mpz_t(), s.get_mpz_t(), gp.q.get_mpz_t());

  Bytes out = chash::to_bytes_be(e, width);
  Bytes s_bytes = chash::to_bytes_be(s, width);
  out.insert(out.end(), s_bytes.begin(), s_bytes.end());
  return out;
}

bool verify(const VerifyingKey& key, ByteView message, ByteView signature) noexcept {
  try {
    const auto& gp = key.params;
    const std::size_t width = scalar_width(gp);
    if (signature.size() != 2 * width) return false;
    mpz_class e = chash::from_bytes_be(signature.first(width));
    mpz_class s = chash::from_bytes_be(signature.subspan(width));
    if (e >= gp.q || s >= gp.q) return false;

    // g^s * y^(q-e) = g^k when the signature is honest.
    mpz_class gs, ye, neg_e = gp.q - e;
    mpz_powm(gs.get_mpz_t(), gp.g.get_mpz_t(), s.get_mpz_t(), gp.p.get_mpz_t());
    mpz_powm(ye.get_mpz_t(), key.y.get_mpz_t(), neg_e.get_mpz_t(), gp.p.get_mpz_t());
    mpz_class commitment = gs * ye;
    mpz_mod(commitment.get_mpz_t(), commitment.get_mpz_t(), gp.p.get_mpz_t());
    return challenge(gp, commitment, message) == e;
  } catch (...) {
    return false;
  }
}

}  // namespace fulsim::sig
