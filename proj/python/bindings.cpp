#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fulsim/pipeline.hpp"

namespace py = pybind11;
using namespace fulsim;

namespace {

py::int_ to_py(const mpz_class& v) { return py::int_(py::module_::import("builtins").attr("int")(v.get_str(16), 16)); }

mpz_class from_py(const py::int_& v) {
  if (py::bool_(v < py::int_(0))) throw py::value_error("negative values are not group scalars");
  return mpz_class(py::str(py::module_::import("builtins").attr("format")(v, "x")).cast<std::string>(), 16);
}

ByteView view(const py::bytes& b, std::string& keep) {
  keep = b;
  return {reinterpret_cast<const std::uint8_t*>(keep.data()), keep.size()};
}

py::dict counts_dict(const cost::OperationCounts& c) {
  py::dict d;
  d["ch_updates"] = c.ch_updates;
  d["consensus_rounds"] = c.consensus_rounds;
  d["transmissions"] = c.transmissions;
  return d;
}

py::dict totals_dict(const cost::Totals& t) {
  py::dict d = counts_dict(t.counts);
  d["cost"] = t.cost();
  d["energy"] = t.energy();
  return d;
}

cost::UnitCosts units_from(const std::string& preset, const py::dict& overrides) {
  auto u = cost::preset(preset);
  const std::map<std::string, double cost::UnitCosts::*> fields{
      {"c_ch", &cost::UnitCosts::c_ch},     {"c_con", &cost::UnitCosts::c_con},
      {"c_tran", &cost::UnitCosts::c_tran}, {"e_ch", &cost::UnitCosts::e_ch},
      {"e_con", &cost::UnitCosts::e_con},   {"e_tran", &cost::UnitCosts::e_tran},
      {"m_nodes", &cost::UnitCosts::m_nodes}, {"param_count", &cost::UnitCosts::param_count}};
  for (auto [key, value] : overrides) {
    const auto name = key.cast<std::string>();
    auto it = fields.find(name);
    if (it == fields.end()) throw py::key_error("unknown unit cost " + name);
    u.*(it->second) = value.cast<double>();
  }
  cost::validate(u);
  return u;
}

py::dict result_dict(const unlearn::PropagationResult& r) {
  auto values = [](const std::map<dag::NodeId, model::ParamVector>& m) {
    std::map<dag::NodeId, std::vector<double>> out;
    for (const auto& [id, p] : m) out[id] = p.values;
    return out;
  };
  py::dict d;
  d["updates"] = values(r.updates);
  d["deltas"] = values(r.deltas);
  d["skipped"] = r.skipped;
  return d;
}

// A trained simulation; unlearning mutates it in place.
class Simulation {
 public:
  explicit Simulation(scenario::Scenario sc) : state_(pipeline::run_training_stage(sc)) {}

  static Simulation from_file(const std::string& path) { return Simulation(scenario::load(path)); }
  static Simulation from_json(const std::string& text) { return Simulation(scenario::parse(text)); }

  py::dict unlearn(const std::optional<std::string>& paradigm) {
    if (paradigm) state_->scenario.unlearning.paradigm = scenario::paradigm_from_string(*paradigm);
    const auto out = pipeline::run_unlearning(*state_);
    py::dict d;
    d["paradigm"] = std::string(scenario::to_string(out.paradigm));
    d["committed"] = out.committed;
    d["updated_models"] = out.updated_models;
    d["touched_blocks"] = out.touched_blocks;
    d["predicted"] = totals_dict(out.predicted);
    d["measured"] = counts_dict(out.measured);
    d["exact"] = out.report.exact();
    d["report_json"] = out.report.to_json();
    d["metrics_csv"] = pipeline::metrics_csv(out.metrics);
    py::list metrics;
    for (const auto& m : out.metrics) {
      py::dict row;
      row["node"] = m.node;
      row["role"] = m.role;
      row["status"] = m.status;
      row["depth"] = m.depth;
      row["delta_norm"] = m.delta_norm;
      row["forget_before"] = m.forget_before;
      row["forget_after"] = m.forget_after;
      row["retain_before"] = m.retain_before;
      row["retain_after"] = m.retain_after;
      metrics.append(row);
    }
    d["metrics"] = metrics;
    return d;
  }

  std::size_t nodes() const { return state_->graph.size(); }
  std::vector<dag::NodeId> references(dag::NodeId id) const { return state_->graph.node(id).references; }
  std::set<dag::NodeId> descendants(const std::set<dag::NodeId>& starts) const {
    return state_->graph.descendants(starts);
  }
  std::vector<double> params(dag::NodeId id) const { return state_->params.at(id).values; }
  std::string chain_ndjson() const { return state_->chain.export_ndjson(); }
  bool verify() const { return ledger::verify_chain(state_->chain, state_->committee_keys.pk); }
  std::size_t live_blocks() const { return state_->chain.live().size(); }
  std::size_t archive_blocks() const { return state_->chain.archive().size(); }

 private:
  std::unique_ptr<pipeline::SimulationState> state_;
};

class ChameleonHash {
 public:
  explicit ChameleonHash(std::uint64_t seed) : keys_(chash::keygen(chash::default_group(), seed_bytes(seed))) {}

  py::int_ random_r(std::uint64_t seed) const {
    HashDrbg rng(seed_bytes(seed), "python-randomness");
    return to_py(chash::random_scalar(keys_.pk.params, rng));
  }
  py::int_ hash(const py::bytes& payload, const py::int_& r) const {
    std::string keep;
    return to_py(chash::hash(keys_.pk, view(payload, keep), from_py(r)));
  }
  bool verify(const py::bytes& payload, const py::int_& r, const py::int_& h) const {
    std::string keep;
    return chash::verify(keys_.pk, view(payload, keep), from_py(r), from_py(h));
  }
  py::int_ forge(const py::bytes& payload, const py::int_& r, const py::bytes& new_payload) const {
    std::string a, b;
    return to_py(chash::forge(keys_.sk, view(payload, a), from_py(r), view(new_payload, b)));
  }

 private:
  chash::KeyPair keys_;
};

py::dict propagate(const std::map<dag::NodeId, std::vector<dag::NodeId>>& references,
                   const std::map<dag::NodeId, std::vector<double>>& params,
                   const std::map<dag::NodeId, std::vector<double>>& start_deltas, double alpha, double epsilon,
                   std::size_t threads) {
  dag::InheritanceDag g;
  dag::NodeId expect = 0;
  for (const auto& [id, refs] : references) {
    if (id != expect++) throw py::value_error("node ids must be 0..n-1");
    g.add_node(refs);
  }
  std::map<dag::NodeId, model::ParamVector> stored;
  for (const auto& [id, v] : params) stored[id] = model::ParamVector{v, "py"};
  unlearn::UnlearnRequest req;
  req.alpha = alpha;
  req.epsilon = epsilon;
  for (const auto& [id, v] : start_deltas) req.starts[id] = model::ParamVector{v, "py"};
  unlearn::ParallelOptions opt;
  opt.threads = threads;
  return result_dict(unlearn::parallel_propagate(
      g, [&](dag::NodeId id) -> const model::ParamVector& { return stored.at(id); }, req, opt));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Blockchain-based federated unlearning simulator";

  py::register_exception<Error>(m, "FulsimError", PyExc_RuntimeError);

  py::class_<Simulation>(m, "Simulation")
      .def_static("from_file", &Simulation::from_file, py::arg("path"), "Load a scenario file and run training")
      .def_static("from_json", &Simulation::from_json, py::arg("text"), "Parse scenario JSON and run training")
      .def("unlearn", &Simulation::unlearn, py::arg("paradigm") = std::nullopt,
           "Run the scenario's unlearning task and return the outcome")
      .def_property_readonly("nodes", &Simulation::nodes)
      .def("references", &Simulation::references, py::arg("node"))
      .def("descendants", &Simulation::descendants, py::arg("starts"))
      .def("params", &Simulation::params, py::arg("node"))
      .def("chain_ndjson", &Simulation::chain_ndjson)
      .def("verify", &Simulation::verify)
      .def_property_readonly("live_blocks", &Simulation::live_blocks)
      .def_property_readonly("archive_blocks", &Simulation::archive_blocks);

  py::class_<ChameleonHash>(m, "ChameleonHash")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("random_r", &ChameleonHash::random_r, py::arg("seed"))
      .def("hash", &ChameleonHash::hash, py::arg("payload"), py::arg("r"))
      .def("verify", &ChameleonHash::verify, py::arg("payload"), py::arg("r"), py::arg("digest"))
      .def("forge", &ChameleonHash::forge, py::arg("payload"), py::arg("r"), py::arg("new_payload"));

  m.def("propagate", &propagate, py::arg("references"), py::arg("params"), py::arg("start_deltas"),
        py::arg("alpha") = 1.0, py::arg("epsilon") = 1e-3, py::arg("threads") = 1,
        "Parallel propagation over a graph given as {id: [references]}");
  m.def("depth_bound", &unlearn::depth_bound, py::arg("delta_norm"), py::arg("epsilon"));
  m.def(
      "attack_rate",
      [](std::uint64_t pool, std::uint64_t malicious, std::uint64_t committee, double rho,
         std::optional<std::uint64_t> f) {
        return consensus::attack_rate(pool, malicious, committee, rho,
                                      f.value_or(consensus::fault_tolerance(committee)));
      },
      py::arg("pool"), py::arg("malicious"), py::arg("committee"), py::arg("rho"), py::arg("f") = std::nullopt);
  m.def(
      "parallel_cost",
      [](std::uint64_t k, std::uint64_t l, const std::string& preset, const py::dict& units) {
        return totals_dict(cost::parallel_cost(k, l, units_from(preset, units)));
      },
      py::arg("updated"), py::arg("blocks"), py::arg("preset") = "pbft", py::arg("units") = py::dict());
  m.def(
      "sequential_cost",
      [](std::uint64_t k, double avg_refs, const std::string& preset, const py::dict& units) {
        return totals_dict(cost::sequential_cost(k, avg_refs, units_from(preset, units)));
      },
      py::arg("updated"), py::arg("avg_refs"), py::arg("preset") = "pbft", py::arg("units") = py::dict());
  m.def(
      "verify_chain_ndjson",
      [](const std::string& text) {
        auto chain = ledger::DualChain::import_ndjson(text);
        return ledger::verify_chain(chain, chain.public_key());
      },
      py::arg("text"));
}
