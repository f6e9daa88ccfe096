#include "fulsim/ledger.hpp"

#include <set>
#include <sstream>

#include "json.hpp"

#include "fulsim/store.hpp"

namespace fulsim::ledger {

using nlohmann::json;

Bytes tx_payload(const std::string& model_uri, const std::vector<TxRef>& references) {
  Encoder e;
  e.str("fulsim/tx").str(model_uri).u64(references.size());
  for (const auto& r : references) e.u64(r.block).u64(r.index);
  return std::move(e).take();
}

RedactableTx make_tx(const chash::PublicKey& pk, std::string model_uri, std::vector<TxRef> references,
                     HashDrbg& rng) {
  RedactableTx tx;
  tx.model_uri = std::move(model_uri);
  tx.references = std::move(references);
  tx.randomness = chash::random_scalar(pk.params, rng);
  tx.ch_digest = chash::hash(pk, tx_payload(tx.model_uri, tx.references), tx.randomness);
  return tx;
}

bool verify_tx(const chash::PublicKey& pk, const RedactableTx& tx) noexcept {
  try {
    return chash::verify(pk, tx_payload(tx.model_uri, tx.references), tx.randomness, tx.ch_digest);
  } catch (...) {
    return false;
  }
}

Bytes header_payload(const LiveBlockHeader& h) {
  return Encoder()
      .str("fulsim/live-header")
      .raw(h.parent_hash)
      .bytes(h.merkle_root)
      .u64(h.version)
      .u64(h.timestamp)
      .take();
}

Bytes merkle_root(const chash::GroupParams& params, const std::vector<RedactableTx>& txs) {
  if (txs.empty()) throw Error("ledger: merkle root of an empty body");
  std::vector<Bytes> level;
  level.reserve(txs.size());
  for (const auto& tx : txs) level.push_back(chash::element_bytes(params, tx.ch_digest));
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<Bytes> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      Bytes joined = level[i];
      joined.insert(joined.end(), level[i + 1].begin(), level[i + 1].end());
      Digest d = sha256(joined);
      next.emplace_back(d.begin(), d.end());
    }
    level = std::move(next);
  }
  return level.front();
}

Digest block_hash(const chash::GroupParams& params, const LiveBlock& block) {
  return sha256(Encoder().str("fulsim/live-block").bytes(chash::element_bytes(params, block.header.ch_curr)).take());
}

LiveBlock build_block(std::vector<RedactableTx> txs, const Digest& parent, const chash::PublicKey& pk,
                      HashDrbg& rng, std::uint64_t timestamp) {
  if (txs.empty()) throw Error("ledger: block body is empty");
  for (const auto& tx : txs) {
    if (!verify_tx(pk, tx)) throw Error("ledger: transaction digest does not verify");
  }
  LiveBlock block;
  block.header.parent_hash = parent;
  block.header.merkle_root = merkle_root(pk.params, txs);
  block.header.version = 0;
  block.header.timestamp = timestamp;
  block.header.r_curr = chash::random_scalar(pk.params, rng);
  block.header.ch_curr = chash::hash(pk, header_payload(block.header), block.header.r_curr);
  block.txs = std::move(txs);
  return block;
}

std::string_view to_string(ArchiveReason r) {
  return r == ArchiveReason::publish ? "publish" : "unlearn-replace";
}

namespace {

ArchiveReason reason_from_string(std::string_view s) {
  if (s == "publish") return ArchiveReason::publish;
  if (s == "unlearn-replace") return ArchiveReason::unlearn_replace;
  throw Error("ledger: unknown archive reason '" + std::string(s) + "'");
}

bool verify_block(const chash::PublicKey& pk, const LiveBlock& block) {
  if (block.txs.empty()) return false;
  for (const auto& tx : block.txs) {
    if (!verify_tx(pk, tx)) return false;
  }
  if (merkle_root(pk.params, block.txs) != block.header.merkle_root) return false;
  return chash::verify(pk, header_payload(block.header), block.header.r_curr, block.header.ch_curr);
}

std::size_t scalar_width(const chash::GroupParams& gp) {
  return (mpz_sizeinbase(gp.q.get_mpz_t(), 2) + 7) / 8;
}

}  // namespace

Digest archive_block_hash(const ArchiveBlock& block) {
  Encoder e;
  e.str("fulsim/archive-block").raw(block.parent_hash).u64(block.timestamp).u64(block.records.size());
  for (const auto& r : block.records) {
    e.str(r.model_uri).str(r.predecessor_uri).str(to_string(r.reason)).u64(r.timestamp);
  }
  return sha256(e.data());
}

std::string archive_uri_for(const std::string& live_uri) {
  auto uri = store::ContentUri::parse(live_uri);
  return "archive:" + uri.digest_hex();
}

DualChain::DualChain(chash::PublicKey pk) : pk_(std::move(pk)) { chash::validate(pk_.params); }

Digest DualChain::tip_hash() const {
  return live_.empty() ? Digest{} : block_hash(pk_.params, live_.back());
}

void DualChain::append(LiveBlock block) {
  if (block.header.parent_hash != tip_hash()) throw Error("ledger: block parent does not match chain tip");
  if (!verify_block(pk_, block)) throw Error("ledger: block fails verification");
  live_.push_back(std::move(block));
}

const LiveBlock& DualChain::append_txs(std::vector<RedactableTx> txs, HashDrbg& rng,
                                       std::uint64_t timestamp) {
  append(build_block(std::move(txs), tip_hash(), pk_, rng, timestamp));
  return live_.back();
}

const RedactableTx& DualChain::tx(TxRef ref) const {
  if (ref.block >= live_.size() || ref.index >= live_[ref.block].txs.size()) {
    throw Error("ledger: transaction (" + std::to_string(ref.block) + ", " + std::to_string(ref.index) +
                ") out of range");
  }
  return live_[ref.block].txs[ref.index];
}

std::optional<TxRef> DualChain::locate(const std::string& model_uri) const {
  for (std::uint64_t b = 0; b < live_.size(); ++b) {
    for (std::uint64_t i = 0; i < live_[b].txs.size(); ++i) {
      if (live_[b].txs[i].model_uri == model_uri) return TxRef{b, i};
    }
  }
  return std::nullopt;
}

StagedRedaction DualChain::stage(const std::vector<Redaction>& redactions, const chash::SecretKey& sk,
                                 std::uint64_t timestamp) const {
  if (!chash::matches(sk, pk_)) throw WrongTrapdoor("ledger: trapdoor does not match the chain key");
  StagedRedaction staged;
  std::set<TxRef> seen;
  for (const auto& r : redactions) {
    tx(r.target);
    if (!seen.insert(r.target).second) throw Error("ledger: transaction redacted twice in one task");
    auto [it, inserted] = staged.blocks.try_emplace(r.target.block, live_[r.target.block]);
    RedactableTx& t = it->second.txs[r.target.index];
    const Bytes old_payload = tx_payload(t.model_uri, t.references);
    const Bytes new_payload = tx_payload(r.new_model_uri, t.references);
    staged.archive_records.push_back({archive_uri_for(r.new_model_uri), archive_uri_for(t.model_uri),
                                      ArchiveReason::unlearn_replace, timestamp});
    t.randomness = chash::forge(sk, old_payload, t.randomness, new_payload);
    t.model_uri = r.new_model_uri;
    ++staged.tx_forgeries;
  }

  Encoder proposal;
  proposal.str("fulsim/redaction");
  for (auto& [index, block] : staged.blocks) {
    LiveBlockHeader& h = block.header;
    const Bytes old_payload = header_payload(h);
    ++h.version;
    h.r_curr = chash::forge(sk, old_payload, h.r_curr, header_payload(h));
    ++staged.header_forgeries;

    proposal.u64(index).u64(h.version).bytes(chash::to_bytes_be(h.r_curr, scalar_width(pk_.params)));
    for (const auto& t : block.txs) {
      proposal.str(t.model_uri).bytes(chash::to_bytes_be(t.randomness, scalar_width(pk_.params)));
    }
  }
  staged.digest = sha256(proposal.data());
  return staged;
}

void DualChain::commit(StagedRedaction staged) {
  for (const auto& [index, block] : staged.blocks) {
    if (index >= live_.size() || live_[index].header.version + 1 != block.header.version) {
      throw Error("ledger: staged redaction is stale for block " + std::to_string(index));
    }
  }
  const std::uint64_t ts = staged.archive_records.empty() ? 0 : staged.archive_records.front().timestamp;
  archive_append(std::move(staged.archive_records), ts);
  for (auto& [index, block] : staged.blocks) live_[index] = std::move(block);
  ++version_counter_;
}

void DualChain::redact_tx(std::uint64_t block, std::uint64_t index, const std::string& new_model_uri,
                          const chash::SecretKey& sk, std::uint64_t timestamp) {
  commit(stage({Redaction{TxRef{block, index}, new_model_uri}}, sk, timestamp));
}

void DualChain::archive_append(ArchiveRecord record) {
  const std::uint64_t ts = record.timestamp;
  archive_append(std::vector<ArchiveRecord>{std::move(record)}, ts);
}

void DualChain::archive_append(std::vector<ArchiveRecord> records, std::uint64_t timestamp) {
  if (records.empty()) return;
  ArchiveBlock block;
  block.parent_hash = archive_.empty() ? Digest{} : archive_block_hash(archive_.back());
  block.records = std::move(records);
  block.timestamp = timestamp;
  archive_.push_back(std::move(block));
}

std::vector<ArchiveRecord> DualChain::archive_records() const {
  std::vector<ArchiveRecord> out;
  for (const auto& b : archive_) out.insert(out.end(), b.records.begin(), b.records.end());
  return out;
}

std::vector<std::string> DualChain::lineage(const std::string& archive_uri) const {
  const auto records = archive_records();
  std::vector<std::string> out;
  std::string cursor = archive_uri;
  while (!cursor.empty()) {
    if (out.size() > records.size()) throw Error("ledger: archive lineage is cyclic");
    out.push_back(cursor);
    std::string next;
    bool found = false;
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
      if (it->model_uri == cursor) {
        next = it->predecessor_uri;
        found = true;
        break;
      }
    }
    if (!found) throw Error("ledger: '" + cursor + "' is not in the archive");
    cursor = next;
  }
  return out;
}

std::string DualChain::export_ndjson() const {
  const auto& gp = pk_.params;
  const std::size_t sw = scalar_width(gp);
  std::ostringstream out;
  out << json{{"type", "params"},
              {"p", chash::to_hex_string(gp.p)},
              {"q", chash::to_hex_string(gp.q)},
              {"g", chash::to_hex_string(gp.g)},
              {"y", chash::to_hex_string(pk_.y)}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < live_.size(); ++i) {
    const auto& b = live_[i];
    json txs = json::array();
    for (const auto& t : b.txs) {
      json refs = json::array();
      for (const auto& r : t.references) refs.push_back({r.block, r.index});
      txs.push_back({{"ch_digest", to_hex(chash::element_bytes(gp, t.ch_digest))},
                     {"model_uri", t.model_uri},
                     {"randomness", to_hex(chash::to_bytes_be(t.randomness, sw))},
                     {"references", refs}});
    }
    const auto& h = b.header;
    out << json{{"type", "live"},
                {"index", i},
                {"hash", to_hex(block_hash(gp, b))},
                {"header",
                 {{"parent_hash", to_hex(h.parent_hash)},
                  {"ch_curr", to_hex(chash::element_bytes(gp, h.ch_curr))},
                  {"r_curr", to_hex(chash::to_bytes_be(h.r_curr, sw))},
                  {"version", h.version},
                  {"merkle_root", to_hex(h.merkle_root)},
                  {"timestamp", h.timestamp}}},
                {"txs", txs}}
               .dump()
        << '\n';
  }
  for (std::size_t i = 0; i < archive_.size(); ++i) {
    const auto& b = archive_[i];
    json recs = json::array();
    for (const auto& r : b.records) {
      recs.push_back({{"model_uri", r.model_uri},
                      {"predecessor_uri", r.predecessor_uri},
                      {"reason", std::string(to_string(r.reason))},
                      {"timestamp", r.timestamp}});
    }
    out << json{{"type", "archive"},
                {"index", i},
                {"hash", to_hex(archive_block_hash(b))},
                {"parent_hash", to_hex(b.parent_hash)},
                {"timestamp", b.timestamp},
                {"records", recs}}
               .dump()
        << '\n';
  }
  out << json{{"type", "state"}, {"version_counter", version_counter_}}.dump() << '\n';
  return out.str();
}

DualChain DualChain::import_ndjson(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<DualChain> chain;
  auto digest_from = [](const std::string& hex) {
    Bytes b = from_hex(hex);
    if (b.size() != 32) throw Error("ledger: digest field must be 32 bytes");
    Digest d{};
    std::copy(b.begin(), b.end(), d.begin());
    return d;
  };
  auto scalar_from = [](const std::string& hex) { return chash::from_bytes_be(from_hex(hex)); };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.at("type");
    if (type == "params") {
      chash::GroupParams gp{chash::from_hex_string(j.at("p")), chash::from_hex_string(j.at("q")),
                            chash::from_hex_string(j.at("g"))};
      chain.emplace(chash::PublicKey{gp, chash::from_hex_string(j.at("y"))});
      continue;
    }
    if (!chain) throw Error("ledger: chain export must start with a params record");
    if (type == "live") {
      LiveBlock b;
      const auto& h = j.at("header");
      b.header.parent_hash = digest_from(h.at("parent_hash"));
      b.header.ch_curr = scalar_from(h.at("ch_curr"));
      b.header.r_curr = scalar_from(h.at("r_curr"));
      b.header.version = h.at("version");
      b.header.merkle_root = from_hex(h.at("merkle_root").get<std::string>());
      b.header.timestamp = h.at("timestamp");
      for (const auto& t : j.at("txs")) {
        RedactableTx tx;
        tx.ch_digest = scalar_from(t.at("ch_digest"));
        tx.model_uri = t.at("model_uri");
        tx.randomness = scalar_from(t.at("randomness"));
        for (const auto& r : t.at("references")) tx.references.push_back({r.at(0), r.at(1)});
        b.txs.push_back(std::move(tx));
      }
      // Import keeps whatever was exported; verify_chain judges it.
      chain->live_.push_back(std::move(b));
    } else if (type == "archive") {
      ArchiveBlock b;
      b.parent_hash = digest_from(j.at("parent_hash"));
      b.timestamp = j.at("timestamp");
      for (const auto& r : j.at("records")) {
        b.records.push_back({r.at("model_uri"), r.at("predecessor_uri"),
                             reason_from_string(r.at("reason").get<std::string>()), r.at("timestamp")});
      }
      chain->archive_.push_back(std::move(b));
    } else if (type == "state") {
      chain->version_counter_ = j.at("version_counter");
    } else {
      throw Error("ledger: unknown record type '" + type + "'");
    }
  }
  if (!chain) throw Error("ledger: empty chain export");
  return std::move(*chain);
}

bool verify_chain(const DualChain& chain, const chash::PublicKey& pk) {
  try {
    Digest parent{};
    for (const auto& b : chain.live()) {
      if (b.header.parent_hash != parent) return false;
      if (!verify_block(pk, b)) return false;
      parent = block_hash(pk.params, b);
    }
    Digest archive_parent{};
    for (const auto& b : chain.archive()) {
      if (b.parent_hash != archive_parent || b.records.empty()) return false;
      archive_parent = archive_block_hash(b);
    }
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace fulsim::ledger
