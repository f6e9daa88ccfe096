#pragma once

// End-to-end simulation: the training stage builds the inheritance graph,
// stores every model and records it on both chains; the unlearning stage runs
// one paradigm, drives committee consensus and ledger redaction, and reports
// accuracy metrics alongside a reconciled cost report.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fulsim/consensus.hpp"
#include "fulsim/cost.hpp"
#include "fulsim/dag.hpp"
#include "fulsim/ledger.hpp"
#include "fulsim/model.hpp"
#include "fulsim/scenario.hpp"
#include "fulsim/signature.hpp"
#include "fulsim/store.hpp"
#include "fulsim/unlearn.hpp"

namespace fulsim::pipeline {

using dag::NodeId;

struct SimulationState {
  scenario::Scenario scenario;
  chash::KeyPair committee_keys;
  std::map<std::uint64_t, sig::KeyPair> user_keys;  // owner -> keys
  dag::InheritanceDag graph;
  ledger::DualChain chain;
  store::ContentStore store;
  std::map<NodeId, model::ParamVector> params;
  std::map<NodeId, ledger::TxRef> tx_of;
  std::map<NodeId, model::Dataset> train_data;
  std::map<NodeId, model::Dataset> test_data;
  std::uint64_t clock = 0;

  SimulationState(scenario::Scenario s, chash::KeyPair keys);
};

std::unique_ptr<SimulationState> run_training_stage(const scenario::Scenario& scenario);

struct ModelMetrics {
  NodeId node = 0;
  std::string role;    // start | descendant
  std::string status;  // updated | skipped | pending (sequential run halted before it)
  std::size_t depth = 0;  // shortest hop count from any start
  double delta_norm = 0.0;
  double forget_before = 0.0, forget_after = 0.0;  // A_Df
  double retain_before = 0.0, retain_after = 0.0;  // A_Dr
  double forget_heldout_after = 0.0, retain_heldout_after = 0.0;
};

struct UnlearningOutcome {
  scenario::Paradigm paradigm = scenario::Paradigm::parallel;
  bool committed = false;  // every consensus round passed
  std::vector<ModelMetrics> metrics;
  unlearn::PropagationResult result;
  consensus::Committee committee;
  std::uint64_t updated_models = 0;  // K
  std::uint64_t touched_blocks = 0;  // L
  double avg_refs = 0.0;             // N^R used by the sequential formula
  std::uint64_t consensus_messages = 0;
  cost::UnitCosts units;
  cost::Totals predicted;
  cost::OperationCounts measured;
  cost::CostReport report;
};

UnlearningOutcome run_unlearning(SimulationState& state);

std::string metrics_csv(const std::vector<ModelMetrics>& metrics);

// Candidate list used when the scenario does not list one: P candidates, M of
// them malicious, positions chosen from the committee seed.
std::vector<consensus::Candidate> generate_candidates(const scenario::CommitteeConfig& config);

}  // namespace fulsim::pipeline
