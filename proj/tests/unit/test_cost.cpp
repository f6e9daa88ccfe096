#include "doctest.h"
#include "fulsim/cost.hpp"

using namespace fulsim::cost;

TEST_CASE("parallel formula") {
  UnitCosts u;
  auto t = parallel_cost(3, 2, u);
  CHECK(t.cost() == 12.0);
  CHECK(t.counts.ch_updates == 5.0);
  CHECK(t.counts.consensus_rounds == 1.0);
  CHECK(t.counts.transmissions == 6.0);
  u.c_ch = 2;
  u.c_con = 3;
  u.c_tran = 5;
  CHECK(parallel_cost(1, 1, u).cost() == 2 * 2 + 3 + 2 * 5);
}

TEST_CASE("sequential formula") {
  UnitCosts u;
  CHECK(sequential_cost(3, 2.0, u).cost() == 19.0);
  u.c_tran = 4;
  CHECK(sequential_cost(1, 5.0, u).counts.transmissions == 2.0);
  CHECK_THROWS_AS(sequential_cost(3, -1.0, u), std::invalid_argument);
}

TEST_CASE("energy formulas") {
  UnitCosts u;
  u.m_nodes = 4;
  u.param_count = 10;
  u.e_ch = 2;
  u.e_con = 3;
  u.e_tran = 0.5;
  auto p = parallel_cost(3, 2, u);
  CHECK(p.energy() == (5 * 4 * 2) + (4 * 3) + (6 * 10 * 0.5));
  auto s = sequential_cost(3, 2.0, u);
  CHECK(s.energy() == (6 * 4 * 2) + (3 * 4 * 3) + (6 * 10 * 0.5) + (2 * 2 * 10 * 0.5));
  u.per_member_ch_energy = false;
  CHECK(parallel_cost(3, 2, u).ch_energy == 5 * 2);
}

TEST_CASE("block update modes") {
  UnitCosts u;
  u.c_ch = 3;
  CHECK(block_update_cost(4, BlockMode::many_tx_per_block, u) == 15.0);
  CHECK(block_update_cost(1, BlockMode::one_tx_per_block, u) == block_update_cost(1, BlockMode::many_tx_per_block, u));
  CHECK(block_update_cost(10, BlockMode::one_tx_per_block, u) - block_update_cost(10, BlockMode::many_tx_per_block, u) ==
        9 * 3.0);
}

TEST_CASE("presets and validation") {
  CHECK(preset("pow").c_con > preset("pbft").c_con);
  CHECK_THROWS_AS(preset("raft"), std::invalid_argument);
  UnitCosts u;
  u.c_ch = -1;
  CHECK_THROWS_AS(parallel_cost(1, 1, u), std::invalid_argument);
}

TEST_CASE("event log and reconciliation") {
  EventLog log;
  log.record(Event::ch_tx_forge, 3);
  log.record(Event::ch_header_forge, 2);
  log.record(Event::consensus_round);
  log.record(Event::upload, 3);
  log.record(Event::download, 3);
  log.record(Event::message, 28);
  auto m = measured_counts(log);
  UnitCosts u;
  auto report = reconcile("parallel", parallel_cost(3, 2, u), m, u);
  CHECK(report.exact());
  CHECK(report.to_csv().find("parallel,cost.total,12,12,0") != std::string::npos);
  CHECK(report.to_json().find("\"exact\": true") != std::string::npos);

  log.record(Event::download);
  CHECK_FALSE(reconcile("parallel", parallel_cost(3, 2, u), measured_counts(log), u).exact());
  CHECK_THROWS_AS(reconcile("sequential", sequential_cost(3, 1.25, u), m, u), ScenarioMismatch);
  log.clear();
  CHECK(log.count(Event::message) == 0);
}

TEST_CASE("FL estimates scale as stated") {
  UnitCosts u;
  u.param_count = 100;
  u.dataset_size = 50;
  auto e = fl_estimate(2, 5, 3, 2.0, u, 1.0);
  CHECK(e.sequential_ops == 2 * 3 * 2.0 * 50 * 100);
  CHECK(e.parallel_ops == 3 * 2.0 * 100);
}
