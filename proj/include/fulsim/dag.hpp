#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fulsim/common.hpp"
#include "fulsim/model.hpp"

namespace fulsim::dag {

using NodeId = std::uint64_t;

inline constexpr std::size_t kDefaultMaxPaths = 1'000'000;

/// A published model vertex.
///
/// `references` lists the parent models this one aggregated; every entry must
/// name an earlier node, which is what keeps the graph acyclic.
struct ModelNode {
  NodeId id = 0;
  std::uint64_t owner = 0;
  std::string params_uri;
  std::vector<NodeId> references;
  std::vector<double> edge_weights;  // parallel to references; metadata only
  double accuracy = 0.0;
  std::vector<double> referenced_accuracies;
  model::TrainSettings training_settings;
  Bytes ch_digest;
  std::uint64_t timestamp = 0;
  Bytes signature;
};

// Bytes covered by a node signature (everything except the signature).
Bytes signing_payload(const ModelNode& node);

class PathBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class InheritanceDag {
 public:
  using Verifier = std::function<bool(const ModelNode&)>;

  InheritanceDag() = default;
  explicit InheritanceDag(Verifier verifier) : verifier_(std::move(verifier)) {}

  // The node must carry id == next_id(). The first node is the genesis and
  // has no references; every later node has at least one.
  NodeId add_node(ModelNode node);
  // Unsigned node with the given references; for building topologies.
  NodeId add_node(std::vector<NodeId> references);
  NodeId add_node(std::initializer_list<NodeId> references) { return add_node(std::vector<NodeId>(references)); }

  NodeId next_id() const { return nodes_.size(); }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const { return id < nodes_.size(); }
  const ModelNode& node(NodeId id) const;
  const std::vector<ModelNode>& nodes() const { return nodes_; }
  const std::vector<NodeId>& children(NodeId id) const;
  NodeId genesis() const;

  std::size_t reference_count(NodeId id) const;

  // Everything reachable from `starts` along child edges, starts excluded.
  std::set<NodeId> descendants(const std::set<NodeId>& starts) const;

  // All simple paths from -> to along child edges, lexicographic by id.
  std::vector<std::vector<NodeId>> paths(NodeId from, NodeId to,
                                         std::size_t max_paths = kDefaultMaxPaths) const;

  // Number of such paths, saturating at max_paths + 1 (which then throws).
  std::map<NodeId, std::uint64_t> path_counts_from(NodeId from, const std::set<NodeId>& targets,
                                                   std::size_t max_paths = kDefaultMaxPaths) const;

  std::vector<NodeId> topo_order(const std::set<NodeId>& subset) const;

  // Only the parameter location changes when a model is replaced in place.
  void set_params_uri(NodeId id, std::string uri);

  // "child parent weight" per line, ids ascending.
  std::string edge_list() const;

  bool operator==(const InheritanceDag& other) const;

 private:
  Verifier verifier_;
  std::vector<ModelNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
};

}  // namespace fulsim::dag
