#include "fulsim/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <thread>

namespace fulsim::unlearn {

namespace {

void validate(const dag::InheritanceDag& graph, const UnlearnRequest& request) {
  if (request.starts.empty()) throw Error("unlearn: request has no start nodes");
  if (!(request.alpha > 0.0 && request.alpha <= 1.0)) throw Error("unlearn: alpha must lie in (0, 1]");
  if (!(request.epsilon > 0.0)) throw Error("unlearn: epsilon must be positive");
  const auto& first = request.starts.begin()->second;
  for (const auto& [id, delta] : request.starts) {
    if (!graph.contains(id)) throw Error("unlearn: unknown start node " + std::to_string(id));
    if (delta.size() != first.size() || delta.shape_tag != first.shape_tag) {
      throw Error("unlearn: start deltas differ in shape");
    }
  }
}

std::set<NodeId> start_ids(const UnlearnRequest& request) {
  std::set<NodeId> out;
  for (const auto& [id, _] : request.starts) out.insert(id);
  return out;
}

template <typename Fn>
void for_each_index(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::map<NodeId, double> path_coefficients(const dag::InheritanceDag& graph, NodeId start,
                                           std::size_t max_paths) {
  std::set<NodeId> reach = graph.descendants({start});
  graph.path_counts_from(start, reach, max_paths);

  std::map<NodeId, double> coef{{start, 1.0}};
  for (NodeId n : reach) {
    double sum = 0.0;
    for (NodeId r : graph.node(n).references) {
      auto it = coef.find(r);
      if (it != coef.end()) sum += it->second;
    }
    coef[n] = sum / static_cast<double>(graph.reference_count(n));
  }
  return coef;
}

PropagationResult parallel_propagate(const dag::InheritanceDag& graph, const ParamLookup& params,
                                     const UnlearnRequest& request, const ParallelOptions& options) {
  validate(graph, request);
  const std::set<NodeId> starts = start_ids(request);
  const std::set<NodeId> affected_descendants = graph.descendants(starts);
  const ParamVector& shape = request.starts.begin()->second;

  // Total change per node, accumulated start by start in id order. A start's
  // own delta enters undiscounted at its turn, so a multi-start result is the
  // exact sum of the single-start results taken in the same order.
  std::map<NodeId, ParamVector> total;
  for (const auto& [start, grad] : request.starts) {
    for (const auto& [node, c] : path_coefficients(graph, start, options.max_paths)) {
      auto [it, inserted] =
          total.try_emplace(node, ParamVector{std::vector<double>(shape.size(), 0.0), shape.shape_tag});
      auto& acc = it->second.values;
      if (node == start) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grad.values[i];
      } else {
        const double weight = request.alpha * c;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * grad.values[i];
      }
    }
  }

  std::vector<NodeId> schedule(affected_descendants.begin(), affected_descendants.end());
  schedule.insert(schedule.end(), starts.begin(), starts.end());
  if (options.schedule_seed) {
    std::mt19937_64 rng(*options.schedule_seed);
    std::shuffle(schedule.begin(), schedule.end(), rng);
  }

  struct Slot {
    ParamVector delta;
    ParamVector updated;
    double magnitude = 0.0;
    bool skip = false;
  };
  for (NodeId n : schedule) {
    const ParamVector& current = params(n);
    if (current.size() != shape.size() || current.shape_tag != shape.shape_tag) {
      throw Error("unlearn: delta shape does not match parameters of node " + std::to_string(n));
    }
  }
  std::vector<Slot> slots(schedule.size());
  for_each_index(schedule.size(), options.threads, [&](std::size_t i) {
    const NodeId n = schedule[i];
    const ParamVector& current = params(n);
    Slot& slot = slots[i];
    slot.delta = total.at(n);
    slot.magnitude = model::l2_norm(slot.delta.values);
    slot.skip = !starts.contains(n) && slot.magnitude <= request.epsilon;
    if (!slot.skip) slot.updated = model::add(current, slot.delta);
  });

  PropagationResult result;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const NodeId n = schedule[i];
    result.per_node_magnitude[n] = slots[i].magnitude;
    if (slots[i].skip) {
      result.skipped.insert(n);
    } else {
      result.updates[n] = std::move(slots[i].updated);
    }
    result.deltas[n] = std::move(slots[i].delta);
  }
  return result;
}

std::size_t depth_bound(double delta_norm, double epsilon) {
  if (!(delta_norm > 0.0) || !(epsilon > 0.0)) throw Error("unlearn: depth bound needs positive inputs");
  const double l = std::log2(delta_norm / epsilon);
  if (l < 0.0) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(l)));
}

ParamVector reaggregate(const dag::InheritanceDag& graph, NodeId node,
                        const std::function<const ParamVector&(NodeId)>& current) {
  const auto& refs = graph.node(node).references;
  if (refs.empty()) throw Error("unlearn: genesis cannot be re-aggregated");
  ParamVector sum = current(refs.front());
  for (std::size_t i = 1; i < refs.size(); ++i) sum = model::add(sum, current(refs[i]));
  return model::scale(sum, 1.0 / static_cast<double>(refs.size()));
}

PropagationResult sequential_pass(const dag::InheritanceDag& graph, const ParamLookup& params,
                                  const UnlearnRequest& request, const NodeTrainer& trainer,
                                  const SequentialOptions& options) {
  validate(graph, request);
  const std::set<NodeId> starts = start_ids(request);
  std::set<NodeId> visit = graph.descendants(starts);
  visit.insert(starts.begin(), starts.end());
  const std::vector<NodeId> order = graph.topo_order(visit);

  // Rank = longest chain of in-set ancestors; equal ranks are independent.
  std::map<NodeId, std::size_t> rank;
  for (NodeId n : order) {
    std::size_t r = 0;
    if (!starts.contains(n)) {
      for (NodeId p : graph.node(n).references) {
        if (auto it = rank.find(p); it != rank.end()) r = std::max(r, it->second + 1);
      }
    }
    rank[n] = r;
  }
  std::map<std::size_t, std::vector<NodeId>> by_rank;
  for (NodeId n : order) by_rank[rank[n]].push_back(n);

  std::map<NodeId, ParamVector> fresh;
  auto current = [&](NodeId id) -> const ParamVector& {
    auto it = fresh.find(id);
    return it != fresh.end() ? it->second : params(id);
  };
  for (const auto& [r, group] : by_rank) {
    std::vector<ParamVector> computed(group.size());
    auto compute = [&](std::size_t i) {
      const NodeId n = group[i];
      if (starts.contains(n)) {
        computed[i] = model::add(params(n), request.starts.at(n));
      } else {
        computed[i] = trainer(n, reaggregate(graph, n, current));
      }
    };
    if (options.threads > 1 && group.size() > 1) {
      std::vector<std::future<void>> jobs;
      for (std::size_t i = 0; i < group.size(); ++i) jobs.push_back(std::async(std::launch::async, compute, i));
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < group.size(); ++i) compute(i);
    }
    for (std::size_t i = 0; i < group.size(); ++i) fresh[group[i]] = std::move(computed[i]);
  }

  PropagationResult result;
  for (NodeId n : order) {
    const ParamVector& updated = fresh.at(n);
    // The hook may replace the stored parameters, so the delta is taken first.
    ParamVector delta = model::subtract(updated, params(n));
    if (options.commit && !options.commit(n, updated)) {
      result.halted_at = n;
      return result;
    }
    result.per_node_magnitude[n] = model::l2_norm(delta.values);
    result.deltas[n] = std::move(delta);
    result.updates[n] = updated;
  }
  return result;
}

}  // namespace fulsim::unlearn
