#include <cmath>

#include "doctest.h"
#include "fulsim/consensus.hpp"

using namespace fulsim;
using namespace fulsim::consensus;

namespace {

std::vector<Candidate> population(std::size_t n) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({i, static_cast<double>(i % 7), static_cast<double>(i % 5) / 4.0, i % 3 == 0});
  }
  return out;
}

}  // namespace

TEST_CASE("pool formation matches a predicate scan") {
  auto cands = population(30);
  CHECK(form_pool(cands, 100.0, 0.0).empty());
  CHECK(form_pool(cands, 0.0, 0.0).size() == 30);
  auto pool = form_pool(cands, 3.0, 0.5);
  std::vector<CandidateId> expected;
  for (const auto& c : cands) {
    if (c.stake >= 3.0 && c.trust_score >= 0.5) expected.push_back(c.id);
  }
  std::vector<CandidateId> got;
  for (const auto& c : pool) got.push_back(c.id);
  CHECK(got == expected);
  CHECK_THROWS_AS(form_pool(cands, -1.0, 0.0), Error);
}

TEST_CASE("committee selection") {
  auto pool = population(30);
  auto full = select_committee(pool, 30, seed_bytes(1));
  std::set<CandidateId> ids(full.members.begin(), full.members.end());
  CHECK(ids.size() == 30);
  auto a = select_committee(pool, 21, seed_bytes(5));
  auto b = select_committee(pool, 21, seed_bytes(5));
  CHECK(a.members == b.members);
  CHECK(a.f == 6);
  CHECK(verify_committee(pool, a));
  auto forged = a;
  std::swap(forged.members[0], forged.members[20]);
  CHECK_FALSE(verify_committee(pool, forged));
  CHECK_THROWS_AS(select_committee(pool, 31, seed_bytes(1)), Error);
}

TEST_CASE("selection frequency is uniform within 3 sigma") {
  auto pool = population(30);
  std::vector<int> hits(30, 0);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    for (auto id : select_committee(pool, 21, seed_bytes(1000 + t)).members) ++hits[id];
  }
  const double p = 21.0 / 30.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - draws * p) <= 3 * sigma);
}

TEST_CASE("rounds: message counts and thresholds") {
  CHECK(pbft_messages(4) == 28);
  CHECK(pbft_messages(21) == 21 + 2 * 21 * 20);
  Committee four{{0, 1, 2, 3}, 1, {}};
  auto ok = run_round(four, Digest{}, {});
  CHECK(ok.decision);
  CHECK(ok.messages == 28);
  CHECK_FALSE(run_round(four, Digest{}, {0, 1}).decision);
  CHECK(run_round(four, Digest{}, {2}).decision);
  CHECK_THROWS_AS(run_round(four, Digest{}, {9}), Error);

  Committee big;
  for (CandidateId i = 0; i < 21; ++i) big.members.push_back(i);
  big.f = fault_tolerance(21);
  CHECK(run_round(big, Digest{}, {0, 1, 2, 3, 4, 5}).decision);
  CHECK(run_round(big, Digest{}, {0, 1, 2, 3, 4, 5, 6, 7}).decision);         // 13 honest
  CHECK_FALSE(run_round(big, Digest{}, {0, 1, 2, 3, 4, 5, 6, 7, 8}).decision);  // 12 honest
}

TEST_CASE("attack rate edge cases") {
  CHECK(std::abs(attack_rate(30, 10, 21, 0.2, 6) - 0.0000625) < 1e-6);
  CHECK(attack_rate(30, 6, 21, 0.2, 6) == 0.0);
  CHECK(attack_rate(30, 10, 21, 0.0, 6) == 0.0);
  CHECK(attack_rate(30, 10, 21, 1.0, 6) > 0.0);
  CHECK_THROWS_AS(attack_rate(30, 31, 21, 0.2, 6), Error);
  CHECK_THROWS_AS(attack_rate(30, 10, 21, 1.5, 6), Error);
}
