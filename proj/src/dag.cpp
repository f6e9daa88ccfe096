#include "fulsim/dag.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace fulsim::dag {

Bytes signing_payload(const ModelNode& node) {
  Encoder e;
  e.str("fulsim/model-node").u64(node.id).u64(node.owner).str(node.params_uri);
  e.u64(node.references.size());
  for (auto r : node.references) e.u64(r);
  e.u64(node.edge_weights.size());
  for (auto w : node.edge_weights) e.f64(w);
  e.f64(node.accuracy);
  e.u64(node.referenced_accuracies.size());
  for (auto a : node.referenced_accuracies) e.f64(a);
  const auto& ts = node.training_settings;
  e.f64(ts.learning_rate).u64(ts.batch_size).u64(ts.epochs).u64(ts.rng_seed);
  e.bytes(node.ch_digest).u64(node.timestamp);
  return std::move(e).take();
}

NodeId InheritanceDag::add_node(ModelNode node) {
  if (node.id < nodes_.size()) throw Error("dag: duplicate node id " + std::to_string(node.id));
  if (node.id != nodes_.size()) {
    throw Error("dag: node id " + std::to_string(node.id) + " out of creation order, expected " +
                std::to_string(nodes_.size()));
  }
  std::set<NodeId> seen;
  for (NodeId r : node.references) {
    if (r == node.id) throw Error("dag: node " + std::to_string(r) + " references itself");
    if (!contains(r)) throw Error("dag: unknown reference " + std::to_string(r));
    if (!seen.insert(r).second) throw Error("dag: duplicate reference " + std::to_string(r));
  }
  if (nodes_.empty() && !node.references.empty()) throw Error("dag: genesis node cannot reference");
  if (!nodes_.empty() && node.references.empty()) {
    throw Error("dag: node " + std::to_string(node.id) + " has no references");
  }
  if (node.edge_weights.empty()) node.edge_weights.assign(node.references.size(), 1.0);
  if (node.edge_weights.size() != node.references.size()) throw Error("dag: edge weight count mismatch");
  if (verifier_ && !verifier_(node)) {
    throw Error("dag: signature of node " + std::to_string(node.id) + " does not verify");
  }

  for (NodeId r : node.references) {
    auto& kids = children_[r];
    kids.insert(std::upper_bound(kids.begin(), kids.end(), node.id), node.id);
  }
  children_.emplace_back();
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

NodeId InheritanceDag::add_node(std::vector<NodeId> references) {
  ModelNode n;
  n.id = next_id();
  n.references = std::move(references);
  n.timestamp = n.id;
  return add_node(std::move(n));
}

const ModelNode& InheritanceDag::node(NodeId id) const {
  if (!contains(id)) throw Error("dag: unknown node " + std::to_string(id));
  return nodes_[id];
}

const std::vector<NodeId>& InheritanceDag::children(NodeId id) const {
  if (!contains(id)) throw Error("dag: unknown node " + std::to_string(id));
  return children_[id];
}

NodeId InheritanceDag::genesis() const {
  if (nodes_.empty()) throw Error("dag: empty graph has no genesis");
  return 0;
}

std::size_t InheritanceDag::reference_count(NodeId id) const { return node(id).references.size(); }

std::set<NodeId> InheritanceDag::descendants(const std::set<NodeId>& starts) const {
  std::set<NodeId> reached;
  std::deque<NodeId> frontier;
  for (NodeId s : starts) {
    if (!contains(s)) throw Error("dag: unknown start " + std::to_string(s));
    frontier.push_back(s);
  }
  while (!frontier.empty()) {
    NodeId n = frontier.front();
    frontier.pop_front();
    for (NodeId c : children_[n]) {
      if (reached.insert(c).second) frontier.push_back(c);
    }
  }
  for (NodeId s : starts) reached.erase(s);
  return reached;
}

std::vector<std::vector<NodeId>> InheritanceDag::paths(NodeId from, NodeId to,
                                                        std::size_t max_paths) const {
  if (!contains(from) || !contains(to)) throw Error("dag: unknown path endpoint");
  std::vector<std::vector<NodeId>> out;
  if (to < from) return out;
  std::vector<NodeId> current{from};

  // Children are sorted, so depth-first emission is lexicographic.
  std::function<void(NodeId)> walk = [&](NodeId n) {
    if (n == to) {
      if (out.size() == max_paths) {
        throw PathBudgetExceeded("dag: more than " + std::to_string(max_paths) + " paths from " +
                                 std::to_string(from) + " to " + std::to_string(to));
      }
      out.push_back(current);
      return;
    }
    for (NodeId c : children_[n]) {
      if (c > to) break;
      current.push_back(c);
      walk(c);
      current.pop_back();
    }
  };
  walk(from);
  return out;
}

std::map<NodeId, std::uint64_t> InheritanceDag::path_counts_from(NodeId from,
                                                                 const std::set<NodeId>& targets,
                                                                 std::size_t max_paths) const {
  if (!contains(from)) throw Error("dag: unknown node " + std::to_string(from));
  std::set<NodeId> reach = descendants({from});
  reach.insert(from);
  std::map<NodeId, std::uint64_t> count;
  const std::uint64_t cap = static_cast<std::uint64_t>(max_paths) + 1;
  for (NodeId n : reach) {
    if (n == from) {
      count[n] = 1;
      continue;
    }
    std::uint64_t total = 0;
    for (NodeId r : nodes_[n].references) {
      auto it = count.find(r);
      if (it != count.end()) total = std::min(cap, total + it->second);
    }
    count[n] = total;
  }
  std::map<NodeId, std::uint64_t> out;
  for (NodeId t : targets) {
    auto it = count.find(t);
    std::uint64_t c = it == count.end() ? 0 : it->second;
    if (c > max_paths) {
      throw PathBudgetExceeded("dag: more than " + std::to_string(max_paths) + " paths from " +
                               std::to_string(from) + " to " + std::to_string(t));
    }
    out[t] = c;
  }
  return out;
}

std::vector<NodeId> InheritanceDag::topo_order(const std::set<NodeId>& subset) const {
  // References always point at earlier ids, so ascending id order respects
  // every ancestor relation and is the id-ascending tie-break at once.
  for (NodeId n : subset) {
    if (!contains(n)) throw Error("dag: unknown node " + std::to_string(n));
  }
  return {subset.begin(), subset.end()};
}

void InheritanceDag::set_params_uri(NodeId id, std::string uri) {
  if (!contains(id)) throw Error("dag: unknown node " + std::to_string(id));
  nodes_[id].params_uri = std::move(uri);
}

std::string InheritanceDag::edge_list() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& n : nodes_) {
    for (std::size_t i = 0; i < n.references.size(); ++i) {
      out << n.id << ' ' << n.references[i] << ' ' << n.edge_weights[i] << '\n';
    }
  }
  return out.str();
}

bool InheritanceDag::operator==(const InheritanceDag& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (signing_payload(nodes_[i]) != signing_payload(other.nodes_[i]) ||
        nodes_[i].signature != other.nodes_[i].signature) {
      return false;
    }
  }
  return true;
}

}  // namespace fulsim::dag
