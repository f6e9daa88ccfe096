#include "fulsim/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <sstream>

#include "json.hpp"

namespace fulsim::cost {

UnitCosts pbft_preset() { return UnitCosts{}; }

UnitCosts pow_preset() {
  UnitCosts u;
  u.c_con = 100.0;
  u.e_con = 1000.0;
  return u;
}

UnitCosts preset(const std::string& name) {
  if (name == "pbft" || name == "PBFT") return pbft_preset();
  if (name == "pow" || name == "PoW") return pow_preset();
  throw std::invalid_argument("cost: unknown preset '" + name + "'");
}

void validate(const UnitCosts& u) {
  for (double v : {u.c_ch, u.c_con, u.c_tran, u.e_ch, u.e_con, u.e_tran, u.m_nodes, u.param_count,
                   u.dataset_size, u.p_seq, u.p_para}) {
    if (!(v >= 0.0)) throw std::invalid_argument("cost: unit costs must be non-negative");
  }
}

namespace {

// Every formula term is one operation count times a unit price.
Totals price(const OperationCounts& n, const UnitCosts& u) {
  Totals t;
  t.counts = n;
  t.ch_cost = n.ch_updates * u.c_ch;
  t.con_cost = n.consensus_rounds * u.c_con;
  t.tran_cost = n.transmissions * u.c_tran;
  t.ch_energy = n.ch_updates * (u.per_member_ch_energy ? u.m_nodes : 1.0) * u.e_ch;
  t.con_energy = n.consensus_rounds * u.m_nodes * u.e_con;
  t.tran_energy = n.transmissions * u.param_count * u.e_tran;
  return t;
}

}  // namespace

Totals parallel_cost(std::uint64_t k, std::uint64_t l, const UnitCosts& u) {
  validate(u);
  const double K = static_cast<double>(k), L = static_cast<double>(l);
  return price({K + L, 1.0, 2.0 * K}, u);
}

Totals sequential_cost(std::uint64_t k, double avg_refs, const UnitCosts& u) {
  validate(u);
  if (avg_refs < 0.0) throw std::invalid_argument("cost: average reference count must be non-negative");
  const double K = static_cast<double>(k);
  const double downstream = k == 0 ? 0.0 : avg_refs * (K - 1.0);
  return price({2.0 * K, K, 2.0 * K + downstream}, u);
}

double block_update_cost(std::uint64_t k, BlockMode mode, const UnitCosts& u) {
  const double K = static_cast<double>(k);
  return mode == BlockMode::one_tx_per_block ? 2.0 * K * u.c_ch : (K + 1.0) * u.c_ch;
}

FlEstimate fl_estimate(std::uint64_t requests, std::uint64_t updated_models, std::uint64_t depth,
                       double avg_refs, const UnitCosts& u, double constant) {
  const double Q = static_cast<double>(requests), K = static_cast<double>(updated_models);
  const double d = static_cast<double>(depth);
  const double S = u.param_count, D = u.dataset_size;
  FlEstimate e;
  e.sequential_ops = constant * Q * d * avg_refs * D * S;
  e.parallel_ops = constant * d * avg_refs * S;
  e.sequential_energy = Q * u.p_seq * constant * d * avg_refs * D * S;
  e.parallel_energy = Q * u.p_seq * constant * D * S + (K - Q) * u.m_nodes * u.p_para * constant * d * avg_refs * S;
  return e;
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::ch_tx_forge: return "ch_tx_forge";
    case Event::ch_header_forge: return "ch_header_forge";
    case Event::consensus_round: return "consensus_round";
    case Event::upload: return "upload";
    case Event::download: return "download";
    case Event::message: return "message";
  }
  return "unknown";
}

void EventLog::record(Event e, std::uint64_t count) {
  std::lock_guard lock(mutex_);
  counts_[e] += count;
}

std::uint64_t EventLog::count(Event e) const {
  std::lock_guard lock(mutex_);
  auto it = counts_.find(e);
  return it == counts_.end() ? 0 : it->second;
}

std::map<Event, std::uint64_t> EventLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return counts_;
}

void EventLog::clear() {
  std::lock_guard lock(mutex_);
  counts_.clear();
}

OperationCounts measured_counts(const EventLog& log) {
  return {static_cast<double>(log.count(Event::ch_tx_forge) + log.count(Event::ch_header_forge)),
          static_cast<double>(log.count(Event::consensus_round)),
          static_cast<double>(log.count(Event::upload) + log.count(Event::download))};
}

bool CostReport::exact() const {
  for (const auto& l : lines) {
    if (l.category.starts_with("count.") && l.delta() != 0.0) return false;
  }
  return true;
}

std::string CostReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "paradigm,category,predicted,measured,delta\n";
  for (const auto& l : lines) {
    out << paradigm << ',' << l.category << ',' << l.predicted << ',' << l.measured << ',' << l.delta() << '\n';
  }
  return out.str();
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["paradigm"] = paradigm;
  j["exact"] = exact();
  for (const auto& l : lines) {
    j["lines"].push_back({{"category", l.category},
                          {"predicted", l.predicted},
                          {"measured", l.measured},
                          {"delta", l.delta()}});
  }
  return j.dump(2);
}

CostReport reconcile(const std::string& paradigm, const Totals& predicted, const OperationCounts& measured,
                     const UnitCosts& u) {
  auto integral = [](double v, const char* what) {
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 * std::max(1.0, std::abs(v))) {
      throw ScenarioMismatch(std::string("cost: predicted ") + what + " count " + std::to_string(v) +
                             " is not an integer");
    }
    return r;
  };
  OperationCounts p{integral(predicted.counts.ch_updates, "CH update"),
                    integral(predicted.counts.consensus_rounds, "consensus"),
                    integral(predicted.counts.transmissions, "transmission")};
  const Totals pt = price(p, u);
  const Totals mt = price(measured, u);

  CostReport r;
  r.paradigm = paradigm;
  r.lines = {
      {"count.ch_updates", p.ch_updates, measured.ch_updates},
      {"count.consensus_rounds", p.consensus_rounds, measured.consensus_rounds},
      {"count.transmissions", p.transmissions, measured.transmissions},
      {"cost.ch", pt.ch_cost, mt.ch_cost},
      {"cost.consensus", pt.con_cost, mt.con_cost},
      {"cost.transmission", pt.tran_cost, mt.tran_cost},
      {"cost.total", pt.cost(), mt.cost()},
      {"energy.ch", pt.ch_energy, mt.ch_energy},
      {"energy.consensus", pt.con_energy, mt.con_energy},
      {"energy.transmission", pt.tran_energy, mt.tran_energy},
      {"energy.total", pt.energy(), mt.energy()},
  };
  return r;
}

}  // namespace fulsim::cost
