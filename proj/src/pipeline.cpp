#include "fulsim/pipeline.hpp"

#include <deque>
#include <sstream>

namespace fulsim::pipeline {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const chash::GroupParams& pick_group(const scenario::Scenario& s, chash::GroupParams& storage) {
  if (s.ledger.group) {
    storage = *s.ledger.group;
    return storage;
  }
  if (s.ledger.group_bits == 256) return chash::default_group();
  storage = chash::generate_group(s.ledger.group_bits, s.seed);
  return storage;
}

chash::KeyPair committee_keys_for(const scenario::Scenario& s) {
  chash::GroupParams storage;
  const auto& group = pick_group(s, storage);
  return chash::keygen(group, sha256(Encoder().str("fulsim/committee-trapdoor").u64(s.seed).take()));
}

model::Dataset blobs_for(const scenario::Scenario& s, std::uint64_t node_seed, std::size_t per_class,
                         std::uint64_t salt) {
  model::BlobConfig cfg;
  cfg.num_classes = s.dataset.num_classes;
  cfg.dim = s.dataset.dim;
  cfg.per_class = per_class;
  cfg.center_scale = s.dataset.center_scale;
  cfg.spread = s.dataset.spread;
  cfg.center_seed = s.dataset.center_seed;
  cfg.sample_seed = mix(mix(s.seed, node_seed), salt);
  return model::make_blobs(cfg);
}

std::size_t parent_weight(const dag::InheritanceDag& graph, NodeId parent) {
  // The genesis aggregated nothing; it enters every aggregation with weight 1.
  return std::max<std::size_t>(1, graph.reference_count(parent));
}

model::ParamVector aggregate_parents(const SimulationState& st, const std::vector<NodeId>& refs) {
  std::vector<model::WeightedParent> parents;
  for (NodeId r : refs) parents.push_back({&st.params.at(r), parent_weight(st.graph, r)});
  return model::pre_aggregate(parents);
}

}  // namespace

SimulationState::SimulationState(scenario::Scenario s, chash::KeyPair keys)
    : scenario(std::move(s)),
      committee_keys(std::move(keys)),
      graph([this](const dag::ModelNode& node) {
        auto it = user_keys.find(node.owner);
        return it != user_keys.end() &&
               sig::verify(it->second.verifying, dag::signing_payload(node), node.signature);
      }),
      chain(committee_keys.pk) {}

std::vector<consensus::Candidate> generate_candidates(const scenario::CommitteeConfig& config) {
  HashDrbg rng(seed_bytes(config.seed), "fulsim/candidates");
  std::vector<std::size_t> order(config.pool_size);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    std::swap(order[i], order[i + rng.uniform(order.size() - i)]);
  }
  std::vector<consensus::Candidate> out(config.pool_size);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].id = i;
    out[i].stake = 10.0 + static_cast<double>(rng.uniform(9001)) / 100.0;
    out[i].trust_score = 0.5 + static_cast<double>(rng.uniform(5001)) / 10000.0;
  }
  for (std::size_t i = 0; i < config.malicious; ++i) out[order[i]].malicious = true;
  return out;
}

std::unique_ptr<SimulationState> run_training_stage(const scenario::Scenario& scenario) {
  scenario::validate(scenario);
  auto st = std::make_unique<SimulationState>(scenario, committee_keys_for(scenario));
  const auto& s = st->scenario;
  const auto& spec = s.model;
  const auto& group = st->committee_keys.pk.params;
  HashDrbg ledger_rng(seed_bytes(s.seed), "fulsim/ledger");

  auto keys_for = [&](std::uint64_t owner) -> const sig::KeyPair& {
    auto it = st->user_keys.find(owner);
    if (it == st->user_keys.end()) {
      it = st->user_keys.emplace(owner, sig::keygen(group, Encoder().str("fulsim/user-key").u64(s.seed).u64(owner).take()))
               .first;
    }
    return it->second;
  };

  auto publish = [&](dag::ModelNode node, model::ParamVector params) {
    Bytes blob = model::serialize(params);
    node.params_uri = st->store.put(blob, store::Namespace::live).text();
    st->store.put(blob, store::Namespace::archive);
    node.signature = sig::sign(keys_for(node.owner).signing, dag::signing_payload(node));
    const NodeId id = st->graph.add_node(std::move(node));
    st->params[id] = std::move(params);
    return id;
  };

  // Genesis model: the task creator's initial model, kept off the live chain.
  {
    const NodeId id = 0;
    st->train_data[id] = blobs_for(s, s.genesis_seed, s.dataset.train_per_class, 1);
    st->test_data[id] = blobs_for(s, s.genesis_seed, s.dataset.test_per_class, 2);
    auto w = model::train(spec, model::init_params(spec, mix(s.seed, s.genesis_seed)), s.genesis_train,
                          st->train_data[id]);
    dag::ModelNode node;
    node.id = id;
    node.owner = 0;
    node.accuracy = model::evaluate(spec, w, st->test_data[id]);
    node.training_settings = s.genesis_train;
    node.timestamp = st->clock++;
    publish(std::move(node), std::move(w));
    st->chain.archive_append({ledger::archive_uri_for(st->graph.node(0).params_uri), "",
                              ledger::ArchiveReason::publish, st->graph.node(0).timestamp});
  }

  std::vector<ledger::RedactableTx> pending;
  std::vector<ledger::ArchiveRecord> pending_records;
  auto flush = [&] {
    if (pending.empty()) return;
    const std::uint64_t ts = st->clock++;
    st->chain.archive_append(std::move(pending_records), ts);
    st->chain.append_txs(std::move(pending), ledger_rng, ts);
    pending.clear();
    pending_records.clear();
  };

  for (const auto& user : s.users) {
    const NodeId id = user.id;
    st->train_data[id] = blobs_for(s, user.seed, s.dataset.train_per_class, 1);
    st->test_data[id] = blobs_for(s, user.seed, s.dataset.test_per_class, 2);
    const auto& test = st->test_data[id];

    std::vector<NodeId> refs = user.references;
    if (s.selection.enabled) {
      std::vector<model::Candidate> population;
      for (const auto& [nid, p] : st->params) population.push_back({nid, &p});
      const std::size_t k = std::min(s.selection.sample_size, population.size());
      const std::size_t n = std::min(s.selection.keep, k);
      std::mt19937_64 rng(mix(s.seed, user.seed));
      refs.clear();
      for (const auto& c : model::select_candidates(spec, population, test, k, n, rng)) refs.push_back(c.id);
      std::sort(refs.begin(), refs.end());
    }

    dag::ModelNode node;
    node.id = id;
    node.owner = id;
    node.references = refs;
    node.edge_weights.assign(refs.size(), 1.0);
    for (NodeId r : refs) node.referenced_accuracies.push_back(model::evaluate(spec, st->params.at(r), test));
    auto w = model::train(spec, aggregate_parents(*st, refs), user.train, st->train_data[id]);
    node.accuracy = model::evaluate(spec, w, test);
    node.training_settings = user.train;
    node.timestamp = st->clock++;

    std::vector<ledger::TxRef> tx_refs;
    for (NodeId r : refs) {
      if (auto it = st->tx_of.find(r); it != st->tx_of.end()) tx_refs.push_back(it->second);
    }
    Bytes blob = model::serialize(w);
    const std::string uri = store::ContentUri::of(store::Namespace::live, blob).text();
    auto tx = ledger::make_tx(st->committee_keys.pk, uri, tx_refs, ledger_rng);
    node.ch_digest = chash::element_bytes(group, tx.ch_digest);
    st->tx_of[id] = ledger::TxRef{st->chain.live().size(), pending.size()};
    pending_records.push_back({ledger::archive_uri_for(uri), "", ledger::ArchiveReason::publish, node.timestamp});
    pending.push_back(std::move(tx));
    publish(std::move(node), std::move(w));
    if (pending.size() == s.ledger.txs_per_block) flush();
  }
  flush();
  return st;
}

namespace {

std::map<NodeId, std::size_t> depths_from(const dag::InheritanceDag& graph, const std::set<NodeId>& starts) {
  std::map<NodeId, std::size_t> depth;
  std::deque<NodeId> frontier;
  for (NodeId s : starts) {
    depth[s] = 0;
    frontier.push_back(s);
  }
  while (!frontier.empty()) {
    NodeId n = frontier.front();
    frontier.pop_front();
    for (NodeId c : graph.children(n)) {
      if (!depth.contains(c)) {
        depth[c] = depth[n] + 1;
        frontier.push_back(c);
      }
    }
  }
  return depth;
}

struct Accuracies {
  double forget = 0, retain = 0, forget_heldout = 0, retain_heldout = 0;
};

Accuracies measure(const SimulationState& st, NodeId n, const std::set<int>& labels) {
  const auto& spec = st.scenario.model;
  const auto& p = st.params.at(n);
  auto acc = [&](const model::Dataset& d) { return d.empty() ? 0.0 : model::evaluate(spec, p, d); };
  const auto& train = st.train_data.at(n);
  const auto& test = st.test_data.at(n);
  Accuracies a{acc(train.with_labels(labels)), acc(train.without_labels(labels)), acc(test.with_labels(labels)),
               acc(test.without_labels(labels))};
  if (st.scenario.unlearning.heldout_metrics) {
    std::swap(a.forget, a.forget_heldout);
    std::swap(a.retain, a.retain_heldout);
  }
  return a;
}

}  // namespace

UnlearningOutcome run_unlearning(SimulationState& st) {
  const auto& s = st.scenario;
  const auto& ul = s.unlearning;
  const auto& spec = s.model;
  if (ul.starts.empty()) throw Error("pipeline: scenario has no unlearning starts");
  const std::set<NodeId> starts(ul.starts.begin(), ul.starts.end());
  std::set<NodeId> affected = st.graph.descendants(starts);
  affected.insert(starts.begin(), starts.end());

  UnlearningOutcome out;
  out.paradigm = ul.paradigm;

  std::map<NodeId, Accuracies> before;
  for (NodeId n : affected) before[n] = measure(st, n, ul.forget_labels);

  const auto candidates = s.committee.candidates.empty() ? generate_candidates(s.committee) : s.committee.candidates;
  const auto pool = consensus::form_pool(candidates, s.committee.min_stake, s.committee.min_trust);
  out.committee = consensus::select_committee(pool, s.committee.size, seed_bytes(s.committee.seed));
  std::set<consensus::CandidateId> malicious_members;
  for (const auto& c : pool) {
    if (c.malicious &&
        std::find(out.committee.members.begin(), out.committee.members.end(), c.id) != out.committee.members.end()) {
      malicious_members.insert(c.id);
    }
  }
  HashDrbg attack_rng(seed_bytes(s.committee.seed), "fulsim/attack");
  auto attackers = [&]() -> std::set<consensus::CandidateId> {
    switch (s.committee.attack) {
      case scenario::AttackMode::none: return {};
      case scenario::AttackMode::all: return malicious_members;
      case scenario::AttackMode::rho: {
        std::set<consensus::CandidateId> out_set;
        const auto threshold = static_cast<std::uint64_t>(s.committee.rho * 1e9);
        for (auto id : malicious_members) {
          if (attack_rng.uniform(1'000'000'000) < threshold) out_set.insert(id);
        }
        return out_set;
      }
    }
    return {};
  };

  out.units = s.costs.units;
  out.units.m_nodes = s.costs.m_nodes.value_or(static_cast<double>(s.committee.size));
  out.units.param_count = s.costs.param_count.value_or(static_cast<double>(spec.param_count()));
  if (s.costs.dataset_size) {
    out.units.dataset_size = *s.costs.dataset_size;
  } else {
    double total = 0;
    for (const auto& [_, d] : st.train_data) total += static_cast<double>(d.size());
    out.units.dataset_size = total / static_cast<double>(st.train_data.size());
  }

  cost::EventLog log;
  const auto lookup = [&](NodeId id) -> const model::ParamVector& { return st.params.at(id); };
  auto apply = [&](NodeId n, const model::ParamVector& updated, const Bytes& blob) {
    st.store.put(blob, store::Namespace::live);
    st.store.put(blob, store::Namespace::archive);
    st.graph.set_params_uri(n, store::ContentUri::of(store::Namespace::live, blob).text());
    st.params[n] = updated;
  };
  auto run_consensus = [&](const Digest& proposal) {
    auto round = consensus::run_round(out.committee, proposal, attackers());
    log.record(cost::Event::consensus_round);
    log.record(cost::Event::message, round.messages);
    out.consensus_messages += round.messages;
    return round.decision;
  };

  unlearn::UnlearnRequest request;
  request.alpha = ul.alpha;
  request.epsilon = ul.epsilon;
  request.forget_labels = ul.forget_labels;

  std::set<std::uint64_t> touched_blocks;
  if (ul.paradigm == scenario::Paradigm::parallel) {
    for (NodeId n : starts) {
      auto forget = st.train_data.at(n).with_labels(ul.forget_labels);
      auto settings = ul.ascent;
      settings.rng_seed = mix(ul.ascent.rng_seed, n);
      request.starts[n] = model::sga_unlearn(spec, st.params.at(n), forget, settings, ul.max_abs_param).delta;
    }
    unlearn::ParallelOptions opts;
    opts.threads = ul.threads;
    out.result = unlearn::parallel_propagate(st.graph, lookup, request, opts);

    std::vector<ledger::Redaction> redactions;
    std::map<NodeId, Bytes> blobs;
    for (const auto& [n, p] : out.result.updates) {
      blobs[n] = model::serialize(p);
      redactions.push_back({st.tx_of.at(n), store::ContentUri::of(store::Namespace::live, blobs[n]).text()});
      log.record(cost::Event::upload);
      log.record(cost::Event::download);
    }
    auto staged = st.chain.stage(redactions, st.committee_keys.sk, st.clock++);
    log.record(cost::Event::ch_tx_forge, staged.tx_forgeries);
    log.record(cost::Event::ch_header_forge, staged.header_forgeries);
    for (const auto& [b, _] : staged.blocks) touched_blocks.insert(b);

    out.committed = run_consensus(staged.digest);
    if (out.committed) {
      for (const auto& [n, p] : out.result.updates) apply(n, p, blobs[n]);
      st.chain.commit(std::move(staged));
    }
    out.updated_models = out.result.updates.size();
    out.touched_blocks = touched_blocks.size();
    out.predicted = cost::parallel_cost(out.updated_models, out.touched_blocks, out.units);
  } else {
    for (NodeId n : starts) {
      const auto& node = st.graph.node(n);
      auto retrained = model::train(spec, aggregate_parents(st, node.references), node.training_settings,
                                    st.train_data.at(n).without_labels(ul.forget_labels));
      request.starts[n] = model::subtract(retrained, st.params.at(n));
    }
    auto trainer = [&](NodeId n, const model::ParamVector& aggregated) {
      return model::train(spec, aggregated, st.graph.node(n).training_settings,
                          st.train_data.at(n).without_labels(ul.forget_labels));
    };
    std::uint64_t parent_downloads = 0;
    bool all_passed = true;
    unlearn::SequentialOptions opts;
    opts.threads = ul.threads;
    opts.commit = [&](NodeId n, const model::ParamVector& updated) {
      Bytes blob = model::serialize(updated);
      auto staged = st.chain.stage({{st.tx_of.at(n), store::ContentUri::of(store::Namespace::live, blob).text()}},
                                   st.committee_keys.sk, st.clock++);
      log.record(cost::Event::ch_tx_forge, staged.tx_forgeries);
      log.record(cost::Event::ch_header_forge, staged.header_forgeries);
      log.record(cost::Event::upload);
      log.record(cost::Event::download);
      std::uint64_t parents = 0;
      if (!starts.contains(n)) {
        parents = st.graph.reference_count(n);
        log.record(cost::Event::download, parents);
      }
      for (const auto& [b, _] : staged.blocks) touched_blocks.insert(b);
      if (!run_consensus(staged.digest)) {
        all_passed = false;
        return false;
      }
      parent_downloads += parents;
      apply(n, updated, blob);
      st.chain.commit(std::move(staged));
      return true;
    };
    out.result = unlearn::sequential_pass(st.graph, lookup, request, trainer, opts);
    out.committed = all_passed;
    out.updated_models = out.result.updates.size();
    out.touched_blocks = touched_blocks.size();
    out.avg_refs = out.updated_models > 1
                       ? static_cast<double>(parent_downloads) / static_cast<double>(out.updated_models - 1)
                       : 0.0;
    out.predicted = cost::sequential_cost(out.updated_models, out.avg_refs, out.units);
  }

  out.measured = cost::measured_counts(log);
  out.report = cost::reconcile(std::string(scenario::to_string(ul.paradigm)), out.predicted, out.measured, out.units);

  const auto depth = depths_from(st.graph, starts);
  for (NodeId n : affected) {
    ModelMetrics m;
    m.node = n;
    m.role = starts.contains(n) ? "start" : "descendant";
    if (!out.committed && ul.paradigm == scenario::Paradigm::parallel) {
      m.status = "rejected";
    } else if (out.result.updates.contains(n)) {
      m.status = "updated";
    } else if (out.result.skipped.contains(n)) {
      m.status = "skipped";
    } else {
      m.status = "pending";
    }
    m.depth = depth.at(n);
    if (auto it = out.result.per_node_magnitude.find(n); it != out.result.per_node_magnitude.end()) {
      m.delta_norm = it->second;
    }
    const auto after = measure(st, n, ul.forget_labels);
    m.forget_before = before[n].forget;
    m.retain_before = before[n].retain;
    m.forget_after = after.forget;
    m.retain_after = after.retain;
    m.forget_heldout_after = after.forget_heldout;
    m.retain_heldout_after = after.retain_heldout;
    out.metrics.push_back(m);
  }
  return out;
}

std::string metrics_csv(const std::vector<ModelMetrics>& metrics) {
  std::ostringstream out;
  out.precision(10);
  out << "node,role,status,depth,delta_norm,acc_forget_before,acc_forget_after,acc_retain_before,"
         "acc_retain_after,acc_forget_heldout_after,acc_retain_heldout_after\n";
  for (const auto& m : metrics) {
    out << m.node << ',' << m.role << ',' << m.status << ',' << m.depth << ',' << m.delta_norm << ','
        << m.forget_before << ',' << m.forget_after << ',' << m.retain_before << ',' << m.retain_after << ','
        << m.forget_heldout_after << ',' << m.retain_heldout_after << '\n';
  }
  return out.str();
}

}  // namespace fulsim::pipeline
