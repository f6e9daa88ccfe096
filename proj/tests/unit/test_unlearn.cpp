#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "fulsim/unlearn.hpp"

using namespace fulsim;
using namespace fulsim::unlearn;
using dag::InheritanceDag;

namespace {

ParamVector scalar(double v) { return ParamVector{{v}, "s"}; }

struct Params {
  std::map<NodeId, ParamVector> values;
  ParamLookup lookup() const {
    return [this](NodeId id) -> const ParamVector& { return values.at(id); };
  }
};

Params zeros(std::size_t n, std::size_t width = 1) {
  Params p;
  for (NodeId i = 0; i < n; ++i) p.values[i] = ParamVector{std::vector<double>(width, 0.0), "s"};
  return p;
}

}  // namespace

TEST_CASE("chain arithmetic excludes the start and includes the terminal") {
  // s -> a -> y with a also referencing an extra parent so N^R(a) = 2.
  InheritanceDag g;
  auto root = g.add_node(std::vector<NodeId>{});
  auto s = g.add_node({root});
  auto a = g.add_node({s, root});
  auto y = g.add_node({a});
  auto p = zeros(g.size());
  UnlearnRequest req;
  req.starts[s] = scalar(1.0);
  req.epsilon = 1e-9;
  auto r = parallel_propagate(g, p.lookup(), req);
  CHECK(r.deltas.at(y).values[0] == doctest::Approx(0.5));
  CHECK(r.deltas.at(a).values[0] == doctest::Approx(0.5));
  CHECK(path_coefficients(g, s).at(y) == doctest::Approx(0.5));
}

TEST_CASE("diamond sums both paths") {
  // N^R(a) = 2, N^R(b) = 4, N^R(y) = 2
  InheritanceDag g;
  auto r0 = g.add_node(std::vector<NodeId>{});
  auto r1 = g.add_node({r0});
  auto r2 = g.add_node({r0});
  auto s = g.add_node({r0});
  auto a = g.add_node({s, r0});
  auto b = g.add_node({s, r0, r1, r2});
  auto y = g.add_node({a, b});
  auto p = zeros(g.size());
  UnlearnRequest req;
  req.starts[s] = scalar(1.0);
  req.epsilon = 1e-9;
  auto res = parallel_propagate(g, p.lookup(), req);
  CHECK(res.deltas.at(y).values[0] == doctest::Approx(0.375));
}

TEST_CASE("skipping, alpha and start handling") {
  InheritanceDag g;
  auto root = g.add_node(std::vector<NodeId>{});
  auto s = g.add_node({root});
  auto a = g.add_node({s, root});  // receives 0.5
  auto b = g.add_node({a, root});  // receives 0.25
  auto c = g.add_node({b});        // receives 0.25
  auto p = zeros(g.size());
  p.values[s] = scalar(10.0);
  UnlearnRequest req;
  req.starts[s] = scalar(1.0);
  req.epsilon = 0.3;
  auto res = parallel_propagate(g, p.lookup(), req);
  CHECK(res.updates.at(s).values[0] == doctest::Approx(11.0));
  CHECK(res.updates.contains(a));
  CHECK(res.skipped == std::set<NodeId>{b, c});
  CHECK(res.deltas.at(c).values[0] == doctest::Approx(0.25));

  req.alpha = 0.5;
  req.epsilon = 1e-9;
  res = parallel_propagate(g, p.lookup(), req);
  CHECK(res.updates.at(s).values[0] == doctest::Approx(11.0));  // the start's own delta is not discounted
  CHECK(res.deltas.at(a).values[0] == doctest::Approx(0.25));

  req.alpha = 0.0;
  CHECK_THROWS_AS(parallel_propagate(g, p.lookup(), req), Error);
  req.alpha = 1.0;
  req.epsilon = 0.0;
  CHECK_THROWS_AS(parallel_propagate(g, p.lookup(), req), Error);
  req.epsilon = 1e-3;
  req.starts[99] = scalar(1.0);
  CHECK_THROWS_AS(parallel_propagate(g, p.lookup(), req), Error);
}

TEST_CASE("random DAGs match the path-enumeration oracle, with any schedule") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng() % 10;
    auto refs = oracle::random_dag(rng, n);
    auto g = oracle::build(refs);
    auto p = zeros(n, 3);
    UnlearnRequest req;
    req.epsilon = 0.05;
    req.alpha = 0.8;
    std::map<NodeId, std::vector<double>> raw;
    const std::size_t k = 1 + rng() % std::min<std::size_t>(3, n - 1);
    while (raw.size() < k) {
      const NodeId s = 1 + rng() % (n - 1);
      raw[s] = {n01(rng), n01(rng), n01(rng)};
      req.starts[s] = ParamVector{raw[s], "s"};
    }
    auto expected = oracle::propagated(refs, raw, req.alpha);
    auto res = parallel_propagate(g, p.lookup(), req);
    for (const auto& [y, d] : expected) {
      REQUIRE(res.deltas.contains(y));
      std::vector<double> total = d;
      if (raw.contains(y)) {
        for (std::size_t i = 0; i < 3; ++i) total[i] += raw[y][i];
      }
      for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(res.deltas.at(y).values[i] - total[i]) < 1e-9);
      const bool should_update = raw.contains(y) || oracle::norm2(d) > req.epsilon;
      CHECK(res.updates.contains(y) == should_update);
    }
    for (const auto& [s, _] : raw) CHECK(res.updates.contains(s));

    ParallelOptions shuffled;
    shuffled.schedule_seed = trial;
    shuffled.threads = 3;
    auto again = parallel_propagate(g, p.lookup(), req, shuffled);
    CHECK(again.updates == res.updates);
    CHECK(again.deltas == res.deltas);
  }
}

TEST_CASE("superposition of starts is exact") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng() % 9;
    auto g = oracle::build(oracle::random_dag(rng, n));
    auto p = zeros(n);
    const NodeId s1 = 1, s2 = 2 + rng() % (n - 2);
    UnlearnRequest both, one, two;
    both.epsilon = one.epsilon = two.epsilon = 1e-12;
    both.starts[s1] = one.starts[s1] = scalar(0.75);
    both.starts[s2] = two.starts[s2] = scalar(-1.25);
    auto rb = parallel_propagate(g, p.lookup(), both);
    auto r1 = parallel_propagate(g, p.lookup(), one);
    auto r2 = parallel_propagate(g, p.lookup(), two);
    for (const auto& [y, d] : rb.deltas) {
      double sum = 0.0;
      if (r1.deltas.contains(y)) sum += r1.deltas.at(y).values[0];
      if (r2.deltas.contains(y)) sum += r2.deltas.at(y).values[0];
      CHECK(d.values[0] == sum);
    }
  }
}

TEST_CASE("depth bound") {
  CHECK(depth_bound(1.0, 0.125) == 3);
  CHECK(depth_bound(1.0, 2.0) == 1);
  CHECK(depth_bound(0.7, 0.1) == 3);
  CHECK(depth_bound(1.0, 1.0) == 1);
  CHECK_THROWS_AS(depth_bound(0.0, 1.0), Error);
  CHECK_THROWS_AS(depth_bound(1.0, 0.0), Error);
}

TEST_CASE("sequential pass") {
  InheritanceDag g;
  auto root = g.add_node(std::vector<NodeId>{});
  auto s = g.add_node({root});
  auto c = g.add_node({s});
  auto d = g.add_node({c, root});
  Params p;
  p.values[root] = scalar(2.0);
  p.values[s] = scalar(4.0);
  p.values[c] = scalar(4.0);
  p.values[d] = scalar(3.0);

  UnlearnRequest lone;
  lone.starts[d] = scalar(1.0);
  auto identity = [](NodeId, const ParamVector& agg) { return agg; };
  auto r = sequential_pass(g, p.lookup(), lone, identity);
  CHECK(r.updates.size() == 1);
  CHECK(r.updates.at(d).values[0] == 4.0);

  UnlearnRequest req;
  req.starts[s] = scalar(-2.0);  // s becomes 2
  std::vector<NodeId> visited;
  auto trainer = [&](NodeId n, const ParamVector& agg) {
    visited.push_back(n);
    return agg;
  };
  r = sequential_pass(g, p.lookup(), req, trainer);
  CHECK(visited == std::vector<NodeId>{c, d});
  CHECK(r.updates.at(s).values[0] == 2.0);
  CHECK(r.updates.at(c).values[0] == 2.0);  // mean of one parent, identity training
  CHECK(r.updates.at(d).values[0] == 2.0);  // (2 + 2) / 2
  CHECK(r.deltas.at(d).values[0] == -1.0);
  CHECK(r.skipped.empty());

  std::vector<NodeId> committed;
  SequentialOptions opts;
  opts.commit = [&](NodeId n, const ParamVector&) {
    committed.push_back(n);
    return n != c;
  };
  r = sequential_pass(g, p.lookup(), req, identity, opts);
  CHECK(committed == std::vector<NodeId>{s, c});
  CHECK(r.halted_at == c);
  CHECK(r.updates.size() == 1);

  opts.commit = nullptr;
  opts.threads = 4;
  auto threaded = sequential_pass(g, p.lookup(), req, identity, opts);
  CHECK(threaded.updates == sequential_pass(g, p.lookup(), req, identity).updates);
}
