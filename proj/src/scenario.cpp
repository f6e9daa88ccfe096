#include "fulsim/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fulsim::scenario {

using nlohmann::json;

std::string_view to_string(Paradigm p) { return p == Paradigm::parallel ? "parallel" : "sequential"; }

Paradigm paradigm_from_string(std::string_view s) {
  if (s == "parallel") return Paradigm::parallel;
  if (s == "sequential") return Paradigm::sequential;
  throw Error("scenario: unknown paradigm '" + std::string(s) + "'");
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void read(const json& j, const char* key, std::optional<double>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<double>();
}

model::TrainSettings read_train(const json& j, model::TrainSettings base) {
  read(j, "learning_rate", base.learning_rate);
  read(j, "batch_size", base.batch_size);
  read(j, "epochs", base.epochs);
  read(j, "seed", base.rng_seed);
  return base;
}

AttackMode attack_from_string(const std::string& s) {
  if (s == "none") return AttackMode::none;
  if (s == "all") return AttackMode::all;
  if (s == "rho") return AttackMode::rho;
  throw Error("scenario: unknown attack mode '" + s + "'");
}

}  // namespace

Scenario parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scenario: invalid JSON: ") + e.what());
  }

  Scenario s;
  try {
    read(j, "seed", s.seed);

    if (auto d = j.find("dataset"); d != j.end()) {
      auto& ds = s.dataset;
      read(*d, "num_classes", ds.num_classes);
      read(*d, "dim", ds.dim);
      read(*d, "train_per_class", ds.train_per_class);
      read(*d, "test_per_class", ds.test_per_class);
      read(*d, "center_scale", ds.center_scale);
      read(*d, "spread", ds.spread);
      read(*d, "center_seed", ds.center_seed);
    }

    s.model.input_dim = s.dataset.dim;
    s.model.num_classes = s.dataset.num_classes;
    if (auto m = j.find("model"); m != j.end()) {
      std::string family = "logistic";
      read(*m, "family", family);
      s.model.family = model::family_from_string(family);
      read(*m, "hidden", s.model.hidden);
    }

    model::TrainSettings default_train{0.1, 16, 5, 0};
    if (auto t = j.find("default_train"); t != j.end()) default_train = read_train(*t, default_train);

    s.genesis_train = default_train;
    if (auto g = j.find("genesis"); g != j.end()) {
      read(*g, "seed", s.genesis_seed);
      s.genesis_train.rng_seed = s.genesis_seed;
      if (auto t = g->find("train"); t != g->end()) s.genesis_train = read_train(*t, s.genesis_train);
    }

    for (const auto& u : j.at("users")) {
      UserSpec spec;
      spec.id = u.at("id");
      read(u, "references", spec.references);
      spec.seed = spec.id;
      read(u, "seed", spec.seed);
      spec.train = default_train;
      spec.train.rng_seed = spec.seed;
      if (auto t = u.find("train"); t != u.end()) spec.train = read_train(*t, spec.train);
      s.users.push_back(std::move(spec));
    }

    if (auto c = j.find("candidate_selection"); c != j.end()) {
      read(*c, "enabled", s.selection.enabled);
      read(*c, "K", s.selection.sample_size);
      read(*c, "N", s.selection.keep);
    }

    if (auto u = j.find("unlearning"); u != j.end()) {
      auto& ul = s.unlearning;
      std::string paradigm = "parallel";
      read(*u, "paradigm", paradigm);
      ul.paradigm = paradigm_from_string(paradigm);
      read(*u, "starts", ul.starts);
      std::vector<int> labels;
      read(*u, "forget_labels", labels);
      ul.forget_labels = {labels.begin(), labels.end()};
      read(*u, "alpha", ul.alpha);
      read(*u, "epsilon", ul.epsilon);
      if (auto a = u->find("ascent"); a != u->end()) ul.ascent = read_train(*a, ul.ascent);
      read(*u, "max_abs_param", ul.max_abs_param);
      std::string split = "train";
      read(*u, "metrics_split", split);
      if (split != "train" && split != "heldout") throw Error("scenario: metrics_split must be train or heldout");
      ul.heldout_metrics = split == "heldout";
      read(*u, "threads", ul.threads);
    }

    if (auto c = j.find("committee"); c != j.end()) {
      auto& cc = s.committee;
      read(*c, "P", cc.pool_size);
      read(*c, "M", cc.malicious);
      read(*c, "N", cc.size);
      read(*c, "rho", cc.rho);
      read(*c, "min_stake", cc.min_stake);
      read(*c, "min_trust", cc.min_trust);
      read(*c, "seed", cc.seed);
      std::string attack = "none";
      read(*c, "attack", attack);
      cc.attack = attack_from_string(attack);
      if (auto list = c->find("candidates"); list != c->end()) {
        for (const auto& e : *list) {
          consensus::Candidate cand;
          cand.id = e.at("id");
          read(e, "stake", cand.stake);
          read(e, "trust", cand.trust_score);
          read(e, "malicious", cand.malicious);
          cc.candidates.push_back(cand);
        }
        cc.pool_size = cc.candidates.size();
        cc.malicious = 0;
        for (const auto& cand : cc.candidates) cc.malicious += cand.malicious ? 1 : 0;
      }
    }

    if (auto l = j.find("ledger"); l != j.end()) {
      read(*l, "txs_per_block", s.ledger.txs_per_block);
      read(*l, "group_bits", s.ledger.group_bits);
      if (auto g = l->find("group"); g != l->end()) {
        s.ledger.group = chash::GroupParams{chash::from_hex_string(g->at("p")), chash::from_hex_string(g->at("q")),
                                            chash::from_hex_string(g->at("g"))};
      }
    }

    if (auto c = j.find("costs"); c != j.end()) {
      std::string preset_name = "pbft";
      read(*c, "preset", preset_name);
      auto& u = s.costs.units;
      u = cost::preset(preset_name);
      read(*c, "c_ch", u.c_ch);
      read(*c, "c_con", u.c_con);
      read(*c, "c_tran", u.c_tran);
      read(*c, "e_ch", u.e_ch);
      read(*c, "e_con", u.e_con);
      read(*c, "e_tran", u.e_tran);
      read(*c, "p_seq", u.p_seq);
      read(*c, "p_para", u.p_para);
      read(*c, "per_member_ch_energy", u.per_member_ch_energy);
      read(*c, "m_nodes", s.costs.m_nodes);
      read(*c, "param_count", s.costs.param_count);
      read(*c, "dataset_size", s.costs.dataset_size);
    }

    if (auto o = j.find("outputs"); o != j.end()) {
      read(*o, "metrics_csv", s.outputs.metrics_csv);
      read(*o, "cost_json", s.outputs.cost_json);
      read(*o, "cost_csv", s.outputs.cost_csv);
      read(*o, "chain_ndjson", s.outputs.chain_ndjson);
      read(*o, "store_dir", s.outputs.store_dir);
      read(*o, "dag_edges", s.outputs.dag_edges);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
  validate(s);
  return s;
}

Scenario load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("scenario: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void validate(const Scenario& s) {
  if (s.dataset.num_classes < 2) throw Error("scenario: need at least two classes");
  if (s.dataset.train_per_class == 0 || s.dataset.test_per_class == 0) {
    throw Error("scenario: every class needs training and test samples");
  }
  if (s.users.empty()) throw Error("scenario: no users");
  for (std::size_t i = 0; i < s.users.size(); ++i) {
    const auto& u = s.users[i];
    if (u.id != i + 1) throw Error("scenario: user ids must run 1..n in order (got " + std::to_string(u.id) + ")");
    if (!s.selection.enabled && u.references.empty()) {
      throw Error("scenario: user " + std::to_string(u.id) + " has no references");
    }
    for (auto r : u.references) {
      if (r >= u.id) {
        throw Error("scenario: user " + std::to_string(u.id) + " references " + std::to_string(r) +
                    ", which is not an earlier node");
      }
    }
  }
  if (s.selection.enabled && (s.selection.keep == 0 || s.selection.keep > s.selection.sample_size)) {
    throw Error("scenario: candidate selection needs 0 < N <= K");
  }
  const auto& c = s.committee;
  if (c.size == 0 || c.size > c.pool_size) throw Error("scenario: committee size N must satisfy 0 < N <= P");
  if (c.malicious > c.pool_size) throw Error("scenario: malicious count M exceeds pool size P");
  if (c.rho < 0.0 || c.rho > 1.0) throw Error("scenario: rho must lie in [0, 1]");
  for (int label : s.unlearning.forget_labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= s.dataset.num_classes) {
      throw Error("scenario: forget label " + std::to_string(label) + " is not a class");
    }
  }
  for (auto start : s.unlearning.starts) {
    if (start == 0 || start > s.users.size()) {
      throw Error("scenario: unlearning start " + std::to_string(start) + " is not a user node");
    }
  }
  if (s.ledger.txs_per_block == 0) throw Error("scenario: txs_per_block must be positive");
}

}  // namespace fulsim::scenario
