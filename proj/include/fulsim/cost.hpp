#pragma once

// Blockchain-side cost model for the two unlearning paradigms, plus the event
// log the simulator writes while it runs so predictions can be reconciled
// against what actually happened.
//
//   parallel:   (K+L) C_CH + C_con + 2K C_tran
//               energy (K+L) M E_CH + M E_con + 2K |S| E_tran
//   sequential: 2K C_CH + K C_con + 2K C_tran + N^R (K-1) C_tran
//               energy 2K M E_CH + K M E_con + 2K |S| E_tran + N^R (K-1) |S| E_tran
//
// K = updated models, L = touched blocks, N^R = average reference count,
// M = consensus participants, |S| = parameters per model.

#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace fulsim::cost {

struct UnitCosts {
  double c_ch = 1.0;
  double c_con = 1.0;
  double c_tran = 1.0;
  double e_ch = 1.0;
  double e_con = 1.0;
  double e_tran = 1.0;
  double m_nodes = 1.0;
  double param_count = 1.0;
  double dataset_size = 1.0;
  double p_seq = 1.0;
  double p_para = 1.0;
  // true: every consensus member performs each CH update (energy formulas
  // multiply CH energy by M); false: each CH update is counted once.
  bool per_member_ch_energy = true;
};

// Illustrative presets, not measured data. PoW raises consensus cost and energy.
UnitCosts pbft_preset();
UnitCosts pow_preset();
UnitCosts preset(const std::string& name);

void validate(const UnitCosts& u);

struct OperationCounts {
  double ch_updates = 0;
  double consensus_rounds = 0;
  double transmissions = 0;
};

struct Totals {
  OperationCounts counts;
  double ch_cost = 0, con_cost = 0, tran_cost = 0;
  double ch_energy = 0, con_energy = 0, tran_energy = 0;

  double cost() const { return ch_cost + con_cost + tran_cost; }
  double energy() const { return ch_energy + con_energy + tran_energy; }
};

Totals parallel_cost(std::uint64_t updated_models, std::uint64_t touched_blocks, const UnitCosts& u);
Totals sequential_cost(std::uint64_t updated_models, double avg_refs, const UnitCosts& u);

enum class BlockMode { one_tx_per_block, many_tx_per_block };

// SC_block = 2K C_CH, MC_block = (K+1) C_CH
double block_update_cost(std::uint64_t updated_txs, BlockMode mode, const UnitCosts& u);

// Order-of-magnitude FL-side estimators with an explicit constant factor.
struct FlEstimate {
  double sequential_ops = 0;
  double parallel_ops = 0;
  double sequential_energy = 0;
  double parallel_energy = 0;
};
FlEstimate fl_estimate(std::uint64_t requests, std::uint64_t updated_models, std::uint64_t depth,
                       double avg_refs, const UnitCosts& u, double constant = 1.0);

enum class Event { ch_tx_forge, ch_header_forge, consensus_round, upload, download, message };
std::string_view to_string(Event e);

class EventLog {
 public:
  void record(Event e, std::uint64_t count = 1);
  std::uint64_t count(Event e) const;
  std::map<Event, std::uint64_t> snapshot() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::map<Event, std::uint64_t> counts_;
};

OperationCounts measured_counts(const EventLog& log);

struct ReportLine {
  std::string category;
  double predicted = 0;
  double measured = 0;
  double delta() const { return predicted - measured; }
};

struct CostReport {
  std::string paradigm;
  std::vector<ReportLine> lines;

  bool exact() const;  // zero delta on every count line
  std::string to_csv() const;
  std::string to_json() const;
};

class ScenarioMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Compares predicted operation counts (and the costs and energies they imply)
// with the measured counters. Throws ScenarioMismatch if a predicted count is
// not an integer, i.e. the prediction was made for a different K/L/N^R.
CostReport reconcile(const std::string& paradigm, const Totals& predicted, const OperationCounts& measured,
                     const UnitCosts& u);

}  // namespace fulsim::cost
