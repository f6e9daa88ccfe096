#pragma once

// Dual-chain ledger.
//
// The live chain holds one redactable transaction per model. A transaction's
// chameleon digest covers {model_uri, references} and is the Merkle leaf, so
// the trapdoor holder can point it at a new model without touching the
// Merkle root. Block headers are chameleon-hashed the same way over
// {parent_hash, merkle_root, version, timestamp}; a version bump re-forges
// r_curr and leaves ch_curr, and therefore the next block's parent link,
// unchanged.
//
// The archive chain is an ordinary hash-linked, append-only list of model
// records (publications and replacements).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fulsim/chash.hpp"
#include "fulsim/common.hpp"

namespace fulsim::ledger {

struct TxRef {
  std::uint64_t block = 0;
  std::uint64_t index = 0;
  auto operator<=>(const TxRef&) const = default;
};

struct RedactableTx {
  mpz_class ch_digest;
  std::string model_uri;
  mpz_class randomness;
  std::vector<TxRef> references;
};

Bytes tx_payload(const std::string& model_uri, const std::vector<TxRef>& references);
RedactableTx make_tx(const chash::PublicKey& pk, std::string model_uri, std::vector<TxRef> references,
                     HashDrbg& rng);
bool verify_tx(const chash::PublicKey& pk, const RedactableTx& tx) noexcept;

struct LiveBlockHeader {
  Digest parent_hash{};
  mpz_class ch_curr;
  mpz_class r_curr;
  std::uint64_t version = 0;
  Bytes merkle_root;
  std::uint64_t timestamp = 0;
};

struct LiveBlock {
  LiveBlockHeader header;
  std::vector<RedactableTx> txs;
};

Bytes header_payload(const LiveBlockHeader& header);

// Binary tree over the tx digests (fixed-width big-endian). A single leaf is
// its own root; interior nodes are SHA-256(left || right); an odd level
// duplicates its last node.
Bytes merkle_root(const chash::GroupParams& params, const std::vector<RedactableTx>& txs);

// Link hash of a block: SHA-256 over its (redaction-invariant) ch_curr.
Digest block_hash(const chash::GroupParams& params, const LiveBlock& block);

LiveBlock build_block(std::vector<RedactableTx> txs, const Digest& parent, const chash::PublicKey& pk,
                      HashDrbg& rng, std::uint64_t timestamp);

enum class ArchiveReason { publish, unlearn_replace };
std::string_view to_string(ArchiveReason r);

struct ArchiveRecord {
  std::string model_uri;
  std::string predecessor_uri;  // empty for a first publication
  ArchiveReason reason = ArchiveReason::publish;
  std::uint64_t timestamp = 0;
  bool operator==(const ArchiveRecord&) const = default;
};

struct ArchiveBlock {
  Digest parent_hash{};
  std::vector<ArchiveRecord> records;
  std::uint64_t timestamp = 0;
};

Digest archive_block_hash(const ArchiveBlock& block);

struct Redaction {
  TxRef target;
  std::string new_model_uri;
};

// Rewritten blocks for one redaction task, computed but not yet applied.
struct StagedRedaction {
  std::map<std::uint64_t, LiveBlock> blocks;
  std::vector<ArchiveRecord> archive_records;
  std::size_t tx_forgeries = 0;
  std::size_t header_forgeries = 0;
  Digest digest{};  // hash of every rewritten field, used as the consensus proposal
};

class WrongTrapdoor : public Error {
 public:
  using Error::Error;
};

class DualChain {
 public:
  explicit DualChain(chash::PublicKey pk);

  const chash::PublicKey& public_key() const { return pk_; }
  const std::vector<LiveBlock>& live() const { return live_; }
  const std::vector<ArchiveBlock>& archive() const { return archive_; }
  std::uint64_t version_counter() const { return version_counter_; }

  Digest tip_hash() const;
  void append(LiveBlock block);
  const LiveBlock& append_txs(std::vector<RedactableTx> txs, HashDrbg& rng, std::uint64_t timestamp);

  const RedactableTx& tx(TxRef ref) const;
  std::optional<TxRef> locate(const std::string& model_uri) const;

  // Forges every targeted transaction and bumps each touched block's version
  // once. Throws on a wrong trapdoor or bad index; never mutates.
  StagedRedaction stage(const std::vector<Redaction>& redactions, const chash::SecretKey& sk,
                        std::uint64_t timestamp) const;
  // Appends the archive records, then swaps in the rewritten blocks.
  void commit(StagedRedaction staged);

  void redact_tx(std::uint64_t block, std::uint64_t index, const std::string& new_model_uri,
                 const chash::SecretKey& sk, std::uint64_t timestamp);

  void archive_append(ArchiveRecord record);
  void archive_append(std::vector<ArchiveRecord> records, std::uint64_t timestamp);
  std::vector<ArchiveRecord> archive_records() const;

  // Archive URIs from the newest version of a model back to its first publication.
  std::vector<std::string> lineage(const std::string& archive_uri) const;

  std::string export_ndjson() const;
  static DualChain import_ndjson(const std::string& text);

  bool operator==(const DualChain& other) const { return export_ndjson() == other.export_ndjson(); }

 private:
  chash::PublicKey pk_;
  std::vector<LiveBlock> live_;
  std::vector<ArchiveBlock> archive_;
  std::uint64_t version_counter_ = 0;
};

bool verify_chain(const DualChain& chain, const chash::PublicKey& pk);

// "live:<digest>" -> "archive:<digest>"
std::string archive_uri_for(const std::string& live_uri);

}  // namespace fulsim::ledger
