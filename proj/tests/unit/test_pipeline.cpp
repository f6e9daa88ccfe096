#include "doctest.h"
#include "fulsim/pipeline.hpp"

using namespace fulsim;
using namespace fulsim::pipeline;

namespace {

scenario::Scenario load(const char* name) {
  return scenario::load(std::string(FULSIM_SOURCE_DIR) + "/scenarios/" + name);
}

std::size_t tx_count(const ledger::DualChain& chain) {
  std::size_t n = 0;
  for (const auto& b : chain.live()) n += b.txs.size();
  return n;
}

std::set<dag::NodeId> affected(const SimulationState& st) {
  std::set<dag::NodeId> starts(st.scenario.unlearning.starts.begin(), st.scenario.unlearning.starts.end());
  auto out = st.graph.descendants(starts);
  out.insert(starts.begin(), starts.end());
  return out;
}

}  // namespace

TEST_CASE("two-node scenario") {
  auto st = run_training_stage(load("two_nodes.json"));
  CHECK(st->graph.size() == 2);
  CHECK(tx_count(st->chain) == 1);
  CHECK(ledger::verify_chain(st->chain, st->committee_keys.pk));
}

TEST_CASE("fourteen-user training stage") {
  auto sc = load("fourteen_users.json");
  auto st = run_training_stage(sc);
  CHECK(tx_count(st->chain) == 14);
  CHECK(ledger::verify_chain(st->chain, st->committee_keys.pk));
  for (const auto& u : sc.users) CHECK(st->graph.reference_count(u.id) == u.references.size());
  for (const auto& node : st->graph.nodes()) {
    CHECK(st->store.contains(store::ContentUri::parse(node.params_uri)));
    CHECK(st->store.contains(store::ContentUri::parse(ledger::archive_uri_for(node.params_uri))));
  }
  // Each user's tx carries its model uri and its parents' tx positions.
  for (const auto& u : sc.users) {
    const auto& tx = st->chain.tx(st->tx_of.at(u.id));
    CHECK(tx.model_uri == st->graph.node(u.id).params_uri);
    std::size_t user_parents = 0;
    for (auto r : u.references) user_parents += r == 0 ? 0 : 1;
    CHECK(tx.references.size() == user_parents);
  }
  auto again = run_training_stage(sc);
  CHECK(again->chain.export_ndjson() == st->chain.export_ndjson());
  CHECK(again->graph == st->graph);
}

TEST_CASE("parallel unlearning: one round, every affected tx redacted") {
  auto st = run_training_stage(load("fourteen_users.json"));
  const auto headers_before = st->chain.live();
  auto out = run_unlearning(*st);
  CHECK(out.committed);
  CHECK(out.measured.consensus_rounds == 1.0);
  CHECK(out.report.exact());
  CHECK(out.updated_models == 7);
  for (const auto& [id, params] : out.result.updates) {
    const auto blob = model::serialize(params);
    const auto uri = store::ContentUri::of(store::Namespace::live, blob).text();
    CHECK(st->chain.tx(st->tx_of.at(id)).model_uri == uri);
    CHECK(st->graph.node(id).params_uri == uri);
  }
  std::set<dag::NodeId> reported;
  for (const auto& m : out.metrics) {
    reported.insert(m.node);
    for (double a : {m.forget_before, m.forget_after, m.retain_before, m.retain_after}) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
  CHECK(reported == affected(*st));
  CHECK(ledger::verify_chain(st->chain, st->committee_keys.pk));
  for (std::size_t i = 0; i < headers_before.size(); ++i) {
    CHECK(headers_before[i].header.merkle_root == st->chain.live()[i].header.merkle_root);
  }
}

TEST_CASE("sequential unlearning: one round per updated model") {
  auto sc = load("fourteen_users.json");
  sc.unlearning.paradigm = scenario::Paradigm::sequential;
  auto st = run_training_stage(sc);
  auto out = run_unlearning(*st);
  CHECK(out.committed);
  CHECK(out.updated_models == affected(*st).size());
  CHECK(out.measured.consensus_rounds == static_cast<double>(out.updated_models));
  CHECK(out.report.exact());
  CHECK(ledger::verify_chain(st->chain, st->committee_keys.pk));
}

TEST_CASE("rejected consensus leaves ledger, store and graph untouched") {
  for (auto paradigm : {scenario::Paradigm::parallel, scenario::Paradigm::sequential}) {
    auto sc = load("fourteen_users.json");
    sc.unlearning.paradigm = paradigm;
    sc.committee.malicious = sc.committee.pool_size;
    sc.committee.attack = scenario::AttackMode::all;
    auto st = run_training_stage(sc);
    const auto chain_before = st->chain.export_ndjson();
    const auto store_before = st->store;
    const auto graph_before = st->graph;
    auto out = run_unlearning(*st);
    CHECK_FALSE(out.committed);
    CHECK(st->chain.export_ndjson() == chain_before);
    CHECK(st->store == store_before);
    CHECK(st->graph == graph_before);
    CHECK(ledger::verify_chain(st->chain, st->committee_keys.pk));
  }
}

TEST_CASE("replaced models stay resolvable through the archive") {
  auto st = run_training_stage(load("fourteen_users.json"));
  std::map<dag::NodeId, std::string> old_uris;
  for (const auto& n : st->graph.nodes()) old_uris[n.id] = n.params_uri;
  auto out = run_unlearning(*st);
  for (const auto& [id, _] : out.result.updates) {
    const auto current = ledger::archive_uri_for(st->graph.node(id).params_uri);
    const auto lineage = st->chain.lineage(current);
    REQUIRE(lineage.size() == 2);
    CHECK(lineage[1] == ledger::archive_uri_for(old_uris[id]));
    CHECK_NOTHROW(st->store.get(store::ContentUri::parse(lineage[1])));
  }
}

TEST_CASE("scenario validation") {
  auto sc = load("fourteen_users.json");
  auto bad = sc;
  bad.users[3].references = {9};
  CHECK_THROWS_AS(scenario::validate(bad), Error);
  bad = sc;
  bad.committee.size = 40;
  CHECK_THROWS_AS(scenario::validate(bad), Error);
  bad = sc;
  bad.unlearning.forget_labels = {5};
  CHECK_THROWS_AS(scenario::validate(bad), Error);
  CHECK_THROWS_AS(scenario::parse("{"), Error);
  CHECK_THROWS_AS(scenario::parse("{\"users\": [{\"id\": 2, \"references\": [0]}]}"), Error);
}
