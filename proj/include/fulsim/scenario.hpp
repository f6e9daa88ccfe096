#pragma once

// Scenario files (JSON). See docs/scenario_format.md for every field.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fulsim/chash.hpp"
#include "fulsim/consensus.hpp"
#include "fulsim/cost.hpp"
#include "fulsim/dag.hpp"
#include "fulsim/model.hpp"

namespace fulsim::scenario {

enum class Paradigm { parallel, sequential };
std::string_view to_string(Paradigm p);
Paradigm paradigm_from_string(std::string_view s);

enum class AttackMode { none, all, rho };

struct DatasetConfig {
  std::size_t num_classes = 3;
  std::size_t dim = 2;
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 20;
  double center_scale = 4.0;
  double spread = 0.6;
  std::uint64_t center_seed = 1;
};

struct UserSpec {
  dag::NodeId id = 0;
  std::vector<dag::NodeId> references;
  std::uint64_t seed = 0;
  model::TrainSettings train;
};

struct CandidateSelection {
  bool enabled = false;
  std::size_t sample_size = 3;  // K
  std::size_t keep = 2;         // N
};

struct UnlearningConfig {
  std::vector<dag::NodeId> starts;
  std::set<int> forget_labels;
  double alpha = 1.0;
  double epsilon = 1e-3;
  model::TrainSettings ascent{0.05, 16, 5, 0};
  double max_abs_param = 1e6;
  Paradigm paradigm = Paradigm::parallel;
  bool heldout_metrics = false;  // primary A_Df/A_Dr on held-out data instead of training data
  std::size_t threads = 1;
};

struct CommitteeConfig {
  std::size_t pool_size = 30;  // P
  std::size_t malicious = 10;  // M
  std::size_t size = 21;       // N
  double rho = 0.2;
  double min_stake = 0.0;
  double min_trust = 0.0;
  std::uint64_t seed = 1;
  AttackMode attack = AttackMode::none;
  std::vector<consensus::Candidate> candidates;  // generated from the fields above when empty
};

struct LedgerConfig {
  std::size_t txs_per_block = 3;
  unsigned group_bits = 256;
  std::optional<chash::GroupParams> group;
};

struct CostConfig {
  cost::UnitCosts units;
  // Filled from the run (committee size, parameter count, mean dataset size) when absent.
  std::optional<double> m_nodes, param_count, dataset_size;
};

struct OutputConfig {
  std::string metrics_csv;
  std::string cost_json;
  std::string cost_csv;
  std::string chain_ndjson;
  std::string store_dir;
  std::string dag_edges;
};

struct Scenario {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  model::ModelSpec model;
  std::uint64_t genesis_seed = 0;
  model::TrainSettings genesis_train{0.1, 16, 5, 0};
  std::vector<UserSpec> users;
  CandidateSelection selection;
  UnlearningConfig unlearning;
  CommitteeConfig committee;
  LedgerConfig ledger;
  CostConfig costs;
  OutputConfig outputs;
};

Scenario parse(const std::string& json_text);
Scenario load(const std::string& path);

// Referenced ids exist and precede their users, N <= P, M <= P, forget labels
// are valid classes, starts name users. Throws Error naming the first problem.
void validate(const Scenario& s);

}  // namespace fulsim::scenario
