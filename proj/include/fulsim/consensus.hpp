#pragma once

// Committee lifecycle and PBFT-style voting at message-count granularity.

#include <cstdint>
#include <set>
#include <vector>

#include "fulsim/common.hpp"

namespace fulsim::consensus {

using CandidateId = std::uint64_t;

struct Candidate {
  CandidateId id = 0;
  double stake = 0.0;
  double trust_score = 0.0;
  bool malicious = false;
};

struct Committee {
  std::vector<CandidateId> members;
  std::size_t f = 0;
  Bytes selection_seed;
};

inline std::size_t fault_tolerance(std::size_t n) { return n == 0 ? 0 : (n - 1) / 3; }

std::vector<Candidate> form_pool(const std::vector<Candidate>& candidates, double min_stake,
                                 double min_trust);

// Seeded hash-chain Fisher-Yates shuffle of the pool; the first n entries form
// the committee. Anyone holding the pool and the seed can re-derive it.
Committee select_committee(const std::vector<Candidate>& pool, std::size_t n, ByteView seed);
bool verify_committee(const std::vector<Candidate>& pool, const Committee& committee);

struct RoundOutcome {
  bool decision = false;
  std::uint64_t messages = 0;
};

// pre-prepare n + prepare n(n-1) + commit n(n-1)
std::uint64_t pbft_messages(std::size_t n);

// Attacking members vote against the proposal; it passes with >= 2f+1 honest votes.
RoundOutcome run_round(const Committee& committee, const Digest& proposal,
                       const std::set<CandidateId>& attacking);

// Probability that more than f malicious members are drawn into an n-member
// committee from a pool of p_size holding m_malicious, and more than f of
// them attack, each independently with probability rho. Evaluated exactly
// over rationals and rounded once at the end.
double attack_rate(std::uint64_t pool_size, std::uint64_t malicious, std::uint64_t committee_size,
                   double rho, std::uint64_t f);

}  // namespace fulsim::consensus
