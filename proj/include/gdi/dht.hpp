#pragma once

// Lock-free distributed hash table with chained buckets, built purely from
// one-sided operations.
//
// The table window holds one 8-byte head link per bucket. Entries live in a
// per-rank heap window: {next, key, value}, 24 bytes each, word 0 of the heap
// being the tagged free-list head. A link is (rank << 48) | byte offset; 0 is
// NULL. An entry whose next link points at itself with +2 added is being
// deleted; readers that meet it restart.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "gdi/rma.hpp"

namespace gdi {

enum class DhtPlacement {
  // bucket = hash(key) mod (buckets_per_rank * P)
  hashed,
  // keys are GlobalRef bits; the bucket lives on the key's rank
  by_key_rank,
};

struct DhtConfig {
  std::uint64_t buckets_per_rank = 1u << 12;
  std::uint32_t entries_per_rank = 1u << 14;
  DhtPlacement placement = DhtPlacement::hashed;
  // Restarts tolerated per operation before it is declared livelocked.
  std::uint32_t max_restarts = 1u << 20;
};

struct DhtLocalAudit {
  std::uint64_t reachable = 0;  // entries linked from this rank's buckets
  std::uint64_t free = 0;       // entries on this rank's heap free list
  std::uint64_t heap_reachable = 0;  // entries of this rank's heap reachable from local buckets
  std::uint64_t overlap = 0;    // free entries that are also reachable (must be 0)
  std::uint64_t marked = 0;     // reachable entries still carrying a delete mark
};

class DhtTable {
 public:
  DhtTable() = default;

  // Collective.
  static DhtTable create(rma::Rank& rank, const DhtConfig& config);

  static std::uint64_t hash(std::uint64_t key);

  void insert(std::uint64_t key, std::uint64_t value);
  // Inserts only if no live entry with key exists. Returns false otherwise.
  bool insert_unique(std::uint64_t key, std::uint64_t value);
  std::optional<std::uint64_t> lookup(std::uint64_t key) const;
  // True iff this call unlinked an entry with key.
  bool erase(std::uint64_t key);

  // Visits the entries of buckets stored on rank `me`. Intended for
  // quiescent or read-only phases.
  void for_each_local(rma::RankId me, const std::function<void(std::uint64_t key, std::uint64_t value)>& fn) const;

  DhtLocalAudit audit_local(rma::RankId me) const;

  std::uint64_t buckets_per_rank() const { return config_.buckets_per_rank; }
  std::uint32_t entries_per_rank() const { return config_.entries_per_rank; }
  std::uint32_t ranks() const { return table_.ranks(); }
  // Largest number of restarts any operation needed so far (all ranks).
  std::uint64_t max_restarts_observed() const { return stats_ ? stats_->max_restarts.load() : 0; }

 private:
  struct Location {
    const rma::Window* window;
    rma::RankId rank;
    std::size_t offset;
  };
  struct Entry {
    std::uint64_t next;
    std::uint64_t key;
    std::uint64_t value;
  };
  struct Bucket {
    rma::RankId rank;
    std::uint64_t index;
    friend bool operator==(const Bucket&, const Bucket&) = default;
  };
  struct Stats {
    std::atomic<std::uint64_t> max_restarts{0};
  };

  static constexpr std::uint64_t kNull = 0;
  static constexpr std::uint64_t kMark = 2;
  static constexpr std::size_t kEntryBytes = 24;
  static constexpr std::size_t kHeapBase = 8;

  static std::uint64_t make_link(rma::RankId rank, std::size_t offset) {
    return (std::uint64_t{rank} << 48) | offset;
  }
  static rma::RankId link_rank(std::uint64_t link) { return static_cast<rma::RankId>(link >> 48); }
  static std::size_t link_offset(std::uint64_t link) { return link & ((std::uint64_t{1} << 48) - 1); }
  static bool is_self_marked(std::uint64_t link, const Entry& e) { return (e.next & ~kMark) == link && (e.next & kMark); }

  Bucket bucket_of(std::uint64_t key) const;
  Location bucket_location(const Bucket& b) const;
  Location next_location(std::uint64_t link) const;
  Entry read_entry(std::uint64_t link) const;

  std::uint64_t alloc(rma::RankId preferred, std::uint64_t key, std::uint64_t value);
  void dealloc(std::uint64_t link);
  void unlink_marked(const Bucket& bucket, std::uint64_t victim, std::uint64_t successor, std::uint32_t& restarts);
  void note_restart(std::uint32_t& restarts) const;
  void record(std::uint32_t restarts) const;

  DhtConfig config_;
  rma::Window table_;
  rma::Window heap_;
  std::shared_ptr<Stats> stats_;
};

}  // namespace gdi
