#pragma once

// Unlearning paradigms over the inheritance graph.
//
// Parallel: each start contributes alpha * delta_s to every descendant y,
// weighted by the sum over s->y paths of 1 / prod(N^R_j) for every node j on
// the path after s (the terminal y included). Nodes whose accumulated change
// has L2 norm <= epsilon are skipped but still pass attenuation along.
//
// Sequential: starts already hold retrained parameters; every other affected
// node, in topological order, averages its parents' current parameters and
// retrains locally without the forgotten classes.

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "fulsim/dag.hpp"
#include "fulsim/model.hpp"

namespace fulsim::unlearn {

using dag::NodeId;
using model::ParamVector;

using ParamLookup = std::function<const ParamVector&(NodeId)>;

struct UnlearnRequest {
  std::map<NodeId, ParamVector> starts;  // start id -> delta (updated - original)
  double alpha = 1.0;
  double epsilon = 1e-3;
  std::set<int> forget_labels;
};

struct PropagationResult {
  std::map<NodeId, ParamVector> updates;
  std::map<NodeId, ParamVector> deltas;  // every affected node, skipped ones included
  std::map<NodeId, double> per_node_magnitude;
  std::set<NodeId> skipped;
  std::optional<NodeId> halted_at;  // sequential only: commit hook refused this node
};

struct ParallelOptions {
  std::size_t max_paths = dag::kDefaultMaxPaths;
  std::size_t threads = 1;
  // Finalize nodes in a shuffled order; the result must not depend on it.
  std::optional<std::uint64_t> schedule_seed;
};

PropagationResult parallel_propagate(const dag::InheritanceDag& graph, const ParamLookup& params,
                                     const UnlearnRequest& request, const ParallelOptions& options = {});

// Per-start path coefficient sum_{paths} 1/prod(N^R) for every reachable node.
std::map<NodeId, double> path_coefficients(const dag::InheritanceDag& graph, NodeId start,
                                           std::size_t max_paths = dag::kDefaultMaxPaths);

// Smallest depth at which a change of norm delta_norm, halved per hop, is at
// most epsilon: 1 when delta_norm < epsilon, else ceil(log2(delta_norm / epsilon)).
std::size_t depth_bound(double delta_norm, double epsilon);

using NodeTrainer = std::function<ParamVector(NodeId, const ParamVector& aggregated)>;
// Returns false to stop the pass before `node` is recorded.
using CommitHook = std::function<bool(NodeId node, const ParamVector& updated)>;

struct SequentialOptions {
  CommitHook commit;
  // Train nodes of equal topological rank concurrently; commits stay ordered.
  std::size_t threads = 1;
};

PropagationResult sequential_pass(const dag::InheritanceDag& graph, const ParamLookup& params,
                                  const UnlearnRequest& request, const NodeTrainer& trainer,
                                  const SequentialOptions& options = {});

// Mean of the parents' parameters, i.e. their sum divided by N^R of the node.
ParamVector reaggregate(const dag::InheritanceDag& graph, NodeId node,
                        const std::function<const ParamVector&(NodeId)>& current);

}  // namespace fulsim::unlearn
