#include "fulsim/consensus.hpp"

#include <gmpxx.h>

#include <numeric>

namespace fulsim::consensus {

std::vector<Candidate> form_pool(const std::vector<Candidate>& candidates, double min_stake,
                                 double min_trust) {
  if (min_stake < 0.0 || min_trust < 0.0) throw Error("consensus: thresholds must be non-negative");
  std::vector<Candidate> pool;
  for (const auto& c : candidates) {
    if (c.stake >= min_stake && c.trust_score >= min_trust) pool.push_back(c);
  }
  return pool;
}

Committee select_committee(const std::vector<Candidate>& pool, std::size_t n, ByteView seed) {
  if (n > pool.size()) {
    throw Error("consensus: committee of " + std::to_string(n) + " from a pool of " +
                std::to_string(pool.size()));
  }
  std::vector<CandidateId> ids;
  ids.reserve(pool.size());
  for (const auto& c : pool) ids.push_back(c.id);

  HashDrbg chain(seed, "fulsim/committee-selection");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + chain.uniform(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  return Committee{std::move(ids), fault_tolerance(n), Bytes(seed.begin(), seed.end())};
}

bool verify_committee(const std::vector<Candidate>& pool, const Committee& committee) {
  try {
    const Committee again = select_committee(pool, committee.members.size(), committee.selection_seed);
    return again.members == committee.members && again.f == committee.f;
  } catch (const Error&) {
    return false;
  }
}

std::uint64_t pbft_messages(std::size_t n) {
  const std::uint64_t nn = n;
  return nn + 2 * nn * (nn == 0 ? 0 : nn - 1);
}

RoundOutcome run_round(const Committee& committee, const Digest& /*proposal*/,
                       const std::set<CandidateId>& attacking) {
  std::size_t attackers = 0;
  for (auto id : committee.members) attackers += attacking.contains(id) ? 1 : 0;
  if (attackers != attacking.size()) throw Error("consensus: attacking members must belong to the committee");
  const std::size_t honest = committee.members.size() - attackers;
  return {honest >= 2 * committee.f + 1, pbft_messages(committee.members.size())};
}

namespace {

mpz_class binom(std::uint64_t n, std::uint64_t k) {
  mpz_class out;
  if (k > n) return 0;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

mpq_class pow_q(const mpq_class& base, std::uint64_t e) {
  mpq_class out = 1;
  for (std::uint64_t i = 0; i < e; ++i) out *= base;
  return out;
}

}  // namespace

double attack_rate(std::uint64_t pool_size, std::uint64_t malicious, std::uint64_t committee_size,
                   double rho, std::uint64_t f) {
  if (malicious > pool_size || committee_size > pool_size || f > committee_size) {
    throw Error("consensus: attack rate needs M <= P, N <= P and f <= N");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error("consensus: rho must lie in [0, 1]");

  const mpq_class r(rho);  // exact binary value of the double
  const mpq_class not_r = 1 - r;
  const mpz_class total = binom(pool_size, committee_size);

  mpq_class sum = 0;
  for (std::uint64_t k = f + 1; k <= malicious; ++k) {
    const mpz_class draws = binom(malicious, k) * binom(pool_size - malicious, committee_size - k);
    if (draws == 0) continue;
    mpq_class attack = 0;
    for (std::uint64_t i = f + 1; i <= k; ++i) attack += mpq_class(binom(k, i)) * pow_q(r, i) * pow_q(not_r, k - i);
    mpq_class share(draws, total);
    share.canonicalize();
    sum += share * attack;
  }
  return sum.get_d();
}

}  // namespace fulsim::consensus
