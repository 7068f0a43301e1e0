#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gdi/block_pool.hpp"
#include "gdi/catalog.hpp"
#include "gdi/dht.hpp"
#include "gdi/layout.hpp"
#include "gdi/rma.hpp"
#include "gdi/transaction.hpp"
#include "json.hpp"

namespace gdi {

struct DatabaseConfig {
  std::uint32_t block_size = 512;
  std::uint32_t blocks_per_rank = 1u << 14;
  // Entries per rank of the internal application-ID index.
  std::uint32_t index_capacity = 1u << 16;
  bool track_block_holders = true;
  // Reject vertex refs that were not obtained in the current local
  // transaction (refs are volatile IDs).
  bool poison_volatile_ids = false;
  // Collective read transactions check that no vertex they read is
  // write-locked by a concurrent local transaction.
  bool check_collective_quiescence = false;
};

struct IndexDef {
  std::vector<Label> labels;
  std::vector<PropertyType> ptypes;
  std::uint32_t capacity = 0;
};

struct AuditReport {
  std::uint64_t capacity = 0;
  std::uint64_t free_blocks = 0;
  std::uint64_t referenced_blocks = 0;  // reachable from live vertices and edge holders
  std::uint64_t vertices = 0;
  std::uint64_t edge_holders = 0;
  std::uint64_t half_edges = 0;         // live lightweight entries
  std::uint64_t held_locks = 0;
  std::uint64_t dangling_edges = 0;     // entries whose neighbor, mirror or holder is missing
  std::uint64_t index_errors = 0;
  std::uint64_t dht_errors = 0;
  bool free_lists_ok = true;
  bool catalogs_equal = true;

  bool locks_clean() const { return held_locks == 0; }
  bool no_leaks() const { return free_blocks + referenced_blocks == capacity; }
  bool ok() const;
  std::vector<std::string> violations() const;
};

// Per-rank handle of a distributed graph database. Calls documented as
// collective must be made by every rank in the same order.
class Database {
 public:
  // Collective.
  static std::unique_ptr<Database> create(rma::Rank& rank, DatabaseConfig config = {});
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  rma::Rank& rank() const { return rank_; }
  rma::RankId rank_id() const { return rank_.id(); }
  std::uint32_t ranks() const { return rank_.size(); }
  const DatabaseConfig& config() const { return config_; }
  const Catalog& catalog() const { return catalog_; }
  BlockPool& pool() { return pool_; }
  DhtTable& internal_index() { return internal_index_; }

  // Metadata; all collective.
  Label create_label(const std::string& name);
  void free_label(Label label);
  PropertyType create_property_type(const std::string& name, EntityKind entity, Datatype datatype,
                                    SizeKind size_kind = SizeKind::none, std::uint32_t size_limit = 0);
  // Stored values that violate the new limits are padded or truncated with
  // fill; without fill such values make the call fail and nothing changes.
  void update_property_type(PropertyType ptype, EntityKind entity, SizeKind size_kind, std::uint32_t size_limit,
                            std::optional<Value> fill = std::nullopt);
  void free_property_type(PropertyType ptype);
  // {"labels": [name...], "property_types": [{"name", "entity", "datatype", "size", "limit"}...]}
  void load_schema(const nlohmann::json& schema);

  // Metadata lookups; local.
  Label label_from_name(std::string_view name) const;
  const std::string& name_of(Label label) const;
  PropertyType property_type_from_name(std::string_view name) const;

  // Explicit indexes; collective.
  std::uint32_t create_index(std::vector<Label> labels, std::vector<PropertyType> ptypes,
                             std::uint32_t capacity_per_rank);
  void add_to_index(std::uint32_t index, std::vector<Label> labels, std::vector<PropertyType> ptypes);
  void rebuild_index(std::uint32_t index);
  const IndexDef& index(std::uint32_t index) const;
  std::size_t index_count() const { return indexes_.size(); }
  std::uint64_t index_local_size(std::uint32_t index) const;
  // Indexes are maintained at commit, so they never go stale.
  bool index_stale(std::uint32_t) const { return false; }

  Transaction start_transaction(TxnMode mode);
  // Collective.
  Transaction start_collective_transaction(TxnMode mode);

  // Committed objects stored on this rank. For quiescent phases.
  std::vector<GlobalRef> local_vertices() const;
  std::vector<GlobalRef> local_edge_holders() const;

  // Collective; requires quiescence.
  AuditReport audit();

  // Round-robin rank for the next vertex created on this rank.
  rma::RankId next_placement();

 private:
  friend class detail::TxnImpl;
  struct Index {
    IndexDef def;
    DhtTable table;
  };

  Database(rma::Rank& rank, DatabaseConfig config);
  void agree(std::string_view what);
  bool member_of(const ObjectImage& image, const IndexDef& def) const;
  void sweep_entries(std::uint32_t marker, std::optional<Label> light_label);
  void rebuild_indexes_touching(const std::vector<Label>& labels, const std::vector<PropertyType>& ptypes);

  rma::Rank& rank_;
  DatabaseConfig config_;
  Catalog catalog_;
  BlockPool pool_;
  DhtTable internal_index_;
  std::vector<std::unique_ptr<Index>> indexes_;
  std::uint64_t placement_counter_ = 0;
};

// Key of (label, app id) in the internal index. Label 0 stands for "no label".
std::uint64_t app_key(std::uint32_t label_id, std::span<const std::byte> app_id);
std::vector<std::uint64_t> app_keys(const ObjectImage& image);

// Labels and properties of a holder image, for constraint evaluation.
class ImageAttributes : public AttributeView {
 public:
  ImageAttributes(const ObjectImage& image, const Catalog& catalog) : image_(image), catalog_(catalog) {}
  bool has_label(Label l) const override;
  std::vector<Value> property_values(PropertyType p) const override;

 private:
  const ObjectImage& image_;
  const Catalog& catalog_;
};

std::vector<Label> labels_of(const ObjectImage& image);

}  // namespace gdi
