#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fulsim/pipeline.hpp"

using namespace fulsim;

namespace {

void write_file(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Outputs {
  std::string metrics_csv, cost_json, cost_csv, chain_ndjson, store_dir, dag_edges;

  void fill_from(const scenario::OutputConfig& o) {
    auto pick = [](std::string& flag, const std::string& cfg) {
      if (flag.empty()) flag = cfg;
    };
    pick(metrics_csv, o.metrics_csv);
    pick(cost_json, o.cost_json);
    pick(cost_csv, o.cost_csv);
    pick(chain_ndjson, o.chain_ndjson);
    pick(store_dir, o.store_dir);
    pick(dag_edges, o.dag_edges);
  }
};

void add_output_flags(CLI::App* cmd, Outputs& out, bool unlearning) {
  cmd->add_option("--chain", out.chain_ndjson, "Write the dual-chain export (NDJSON)");
  cmd->add_option("--store", out.store_dir, "Write the content store to this directory");
  cmd->add_option("--dag", out.dag_edges, "Write the inheritance edge list");
  if (unlearning) {
    cmd->add_option("--metrics", out.metrics_csv, "Write per-model accuracy metrics (CSV)");
    cmd->add_option("--cost-json", out.cost_json, "Write the reconciled cost report (JSON)");
    cmd->add_option("--cost-csv", out.cost_csv, "Write the reconciled cost report (CSV)");
  }
}

// Returns the number of violated invariants, printing each.
int check_training(const pipeline::SimulationState& st) {
  int bad = 0;
  if (!ledger::verify_chain(st.chain, st.committee_keys.pk)) {
    std::cerr << "invariant violated: verify_chain failed\n";
    ++bad;
  }
  for (const auto& node : st.graph.nodes()) {
    if (!st.store.contains(store::ContentUri::parse(node.params_uri))) {
      std::cerr << "invariant violated: node " << node.id << " model missing from store\n";
      ++bad;
    }
  }
  return bad;
}

void write_state(const pipeline::SimulationState& st, const Outputs& out) {
  write_file(out.chain_ndjson, st.chain.export_ndjson());
  write_file(out.dag_edges, st.graph.edge_list());
  if (!out.store_dir.empty()) st.store.save_to_directory(out.store_dir);
}

int cmd_train(const std::string& path, Outputs out) {
  auto sc = scenario::load(path);
  out.fill_from(sc.outputs);
  auto st = pipeline::run_training_stage(sc);
  write_state(*st, out);
  std::cout << "nodes " << st->graph.size() << ", live blocks " << st->chain.live().size() << ", archive blocks "
            << st->chain.archive().size() << '\n';
  return check_training(*st) == 0 ? 0 : 1;
}

int cmd_unlearn(const std::string& path, const std::string& paradigm, std::size_t threads, Outputs out) {
  auto sc = scenario::load(path);
  if (!paradigm.empty()) sc.unlearning.paradigm = scenario::paradigm_from_string(paradigm);
  if (threads > 0) sc.unlearning.threads = threads;
  out.fill_from(sc.outputs);
  auto st = pipeline::run_training_stage(sc);
  auto outcome = pipeline::run_unlearning(*st);

  write_state(*st, out);
  write_file(out.metrics_csv, pipeline::metrics_csv(outcome.metrics));
  write_file(out.cost_json, outcome.report.to_json() + "\n");
  write_file(out.cost_csv, outcome.report.to_csv());

  std::cout << "paradigm " << scenario::to_string(outcome.paradigm) << ": "
            << (outcome.committed ? "committed" : "rejected by committee") << ", K=" << outcome.updated_models
            << ", L=" << outcome.touched_blocks << ", consensus rounds=" << outcome.measured.consensus_rounds
            << ", CH updates=" << outcome.measured.ch_updates << ", transmissions=" << outcome.measured.transmissions
            << '\n';

  int bad = check_training(*st);
  if (!outcome.report.exact()) {
    std::cerr << "invariant violated: measured operation counts differ from the cost formulas\n";
    ++bad;
  }
  std::set<dag::NodeId> starts(sc.unlearning.starts.begin(), sc.unlearning.starts.end());
  auto expected = st->graph.descendants(starts);
  expected.insert(starts.begin(), starts.end());
  std::set<dag::NodeId> reported;
  for (const auto& m : outcome.metrics) {
    reported.insert(m.node);
    for (double a : {m.forget_before, m.forget_after, m.retain_before, m.retain_after}) {
      if (!(a >= 0.0 && a <= 1.0)) {
        std::cerr << "invariant violated: accuracy outside [0,1] at node " << m.node << '\n';
        ++bad;
      }
    }
  }
  if (reported != expected) {
    std::cerr << "invariant violated: metrics do not cover exactly the affected models\n";
    ++bad;
  }
  return bad == 0 ? 0 : 1;
}

int cmd_verify(const std::string& path) {
  auto chain = ledger::DualChain::import_ndjson(read_file(path));
  const bool ok = ledger::verify_chain(chain, chain.public_key());
  std::cout << (ok ? "valid" : "INVALID") << ": " << chain.live().size() << " live blocks, "
            << chain.archive().size() << " archive blocks, version counter " << chain.version_counter() << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain-based federated unlearning simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  Outputs train_out, unlearn_out;
  auto* train = app.add_subcommand("train", "Run the training stage and record every model on the ledger");
  train->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
  add_output_flags(train, train_out, false);

  std::string paradigm;
  std::size_t threads = 0;
  auto* unlearn = app.add_subcommand("unlearn", "Run training, then one unlearning task");
  unlearn->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
  unlearn->add_option("--paradigm", paradigm, "Overrides the scenario's paradigm")
      ->check(CLI::IsMember({"parallel", "sequential"}));
  unlearn->add_option("--threads", threads, "Worker threads for per-node computation");
  add_output_flags(unlearn, unlearn_out, true);

  std::uint64_t pool = 30, malicious = 10, committee = 21;
  double rho = 0.2;
  std::optional<std::uint64_t> f;
  auto* attack = app.add_subcommand("attack-rate", "Probability that a committee is taken over");
  attack->add_option("-P,--pool", pool, "Candidate pool size")->capture_default_str();
  attack->add_option("-M,--malicious", malicious, "Malicious candidates in the pool")->capture_default_str();
  attack->add_option("-N,--committee", committee, "Committee size")->capture_default_str();
  attack->add_option("--rho", rho, "Per-member attack probability")->capture_default_str();
  attack->add_option("-f,--fault-tolerance", f, "Tolerated faults (default floor((N-1)/3))");

  auto* cost_cmd = app.add_subcommand("cost", "Cost model utilities");
  cost_cmd->require_subcommand(1);
  std::string cost_paradigm = "parallel", preset = "pbft";
  std::uint64_t k = 0, l = 0;
  double avg_refs = 0.0;
  bool as_json = false;
  auto* predict = cost_cmd->add_subcommand("predict", "Predicted operation counts, cost and energy");
  predict->add_option("--paradigm", cost_paradigm)->check(CLI::IsMember({"parallel", "sequential"}))
      ->capture_default_str();
  predict->add_option("-K,--updated", k, "Updated models")->required();
  predict->add_option("-L,--blocks", l, "Touched live blocks (parallel)");
  predict->add_option("--avg-refs", avg_refs, "Average reference count (sequential)");
  predict->add_option("--preset", preset, "pbft or pow")->capture_default_str();
  const std::vector<std::pair<std::string, double cost::UnitCosts::*>> unit_fields{
      {"--c-ch", &cost::UnitCosts::c_ch},         {"--c-con", &cost::UnitCosts::c_con},
      {"--c-tran", &cost::UnitCosts::c_tran},     {"--e-ch", &cost::UnitCosts::e_ch},
      {"--e-con", &cost::UnitCosts::e_con},       {"--e-tran", &cost::UnitCosts::e_tran},
      {"--members", &cost::UnitCosts::m_nodes},   {"--params", &cost::UnitCosts::param_count}};
  std::map<std::string, std::optional<double>> unit_values;
  for (const auto& [name, _] : unit_fields) predict->add_option(name, unit_values[name]);
  predict->add_flag("--json", as_json, "Print JSON");

  std::string chain_path;
  auto* verify = app.add_subcommand("verify", "Check a chain export");
  verify->add_option("--chain", chain_path, "Chain export (NDJSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(scenario_path, train_out);
    if (*unlearn) return cmd_unlearn(scenario_path, paradigm, threads, unlearn_out);
    if (*attack) {
      const auto tolerance = f.value_or(consensus::fault_tolerance(committee));
      std::printf("%.17g\n", consensus::attack_rate(pool, malicious, committee, rho, tolerance));
      return 0;
    }
    if (*predict) {
      auto units = cost::preset(preset);
      for (const auto& [name, field] : unit_fields) {
        if (unit_values[name]) units.*field = *unit_values[name];
      }
      const auto t = cost_paradigm == "parallel" ? cost::parallel_cost(k, l, units)
                                                 : cost::sequential_cost(k, avg_refs, units);
      if (as_json) {
        std::printf(
            "{\"paradigm\": \"%s\", \"ch_updates\": %.17g, \"consensus_rounds\": %.17g, \"transmissions\": %.17g, "
            "\"cost\": %.17g, \"energy\": %.17g}\n",
            cost_paradigm.c_str(), t.counts.ch_updates, t.counts.consensus_rounds, t.counts.transmissions, t.cost(),
            t.energy());
      } else {
        std::printf("ch_updates %.17g\nconsensus_rounds %.17g\ntransmissions %.17g\ncost %.17g\nenergy %.17g\n",
                    t.counts.ch_updates, t.counts.consensus_rounds, t.counts.transmissions, t.cost(), t.energy());
      }
      return 0;
    }
    if (*verify) return cmd_verify(chain_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
