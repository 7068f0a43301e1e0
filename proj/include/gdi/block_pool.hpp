#pragma once

// Blocked graph data layout: a pool of fixed-size blocks per rank.
//
// Three windows back the pool:
//   data   - blocks_per_rank * block_size bytes of block payload
//   usage  - one 4-byte link per block; free blocks form a singly linked
//            list through it, held blocks carry a BlockKind tag instead
//   system - word 0 is the tagged free-list head, followed by one lock
//            word per block

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gdi/global_ref.hpp"
#include "gdi/rma.hpp"

namespace gdi {

struct FreeListHead {
  static constexpr std::uint32_t kNullIndex = 0xFFFFFFFFu;

  std::uint32_t index = kNullIndex;
  std::uint32_t tag = 0;

  std::uint64_t pack() const { return (std::uint64_t{tag} << 32) | index; }
  static FreeListHead unpack(std::uint64_t w) {
    return {static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(w >> 32)};
  }
  bool empty() const { return index == kNullIndex; }
  friend bool operator==(const FreeListHead&, const FreeListHead&) = default;
};

// write bit (63) | read counter (62..32) | incarnation (31..0)
struct LockWord {
  static constexpr std::uint64_t kWriteBit = std::uint64_t{1} << 63;
  static constexpr std::uint64_t kReaderOne = std::uint64_t{1} << 32;
  static constexpr std::uint32_t kMaxReaders = (1u << 31) - 1;

  bool write = false;
  std::uint32_t readers = 0;
  std::uint32_t incarnation = 0;

  std::uint64_t pack() const {
    return (write ? kWriteBit : 0) | (std::uint64_t{readers} << 32) | incarnation;
  }
  static LockWord unpack(std::uint64_t w) {
    return {(w & kWriteBit) != 0, static_cast<std::uint32_t>((w >> 32) & kMaxReaders),
            static_cast<std::uint32_t>(w)};
  }
  friend bool operator==(const LockWord&, const LockWord&) = default;
};

enum class LockMode { read, write };
enum class LockStatus { acquired, busy, stale };

struct LockResult {
  LockStatus status;
  std::uint32_t incarnation;  // incarnation observed at the decisive CAS
};

// Tags written into the usage link of held, committed blocks so a rank can
// enumerate its objects without a side table. Free-list indices never reach
// this range.
enum class BlockKind : std::uint32_t {
  unassigned = 0,
  vertex = 0xFFFFFFF0u,
  edge = 0xFFFFFFF1u,
  continuation = 0xFFFFFFF2u,
};

struct BlockPoolConfig {
  std::uint32_t block_size = 512;
  std::uint32_t blocks_per_rank = 1u << 14;
  // Keep a shadow set of held blocks and reject double releases.
  bool track_holders = true;
};

class BlockPool {
 public:
  BlockPool() = default;

  // Collective.
  static BlockPool create(rma::Rank& rank, const BlockPoolConfig& config);

  std::uint32_t block_size() const { return config_.block_size; }
  std::uint32_t blocks_per_rank() const { return config_.blocks_per_rank; }
  std::uint32_t ranks() const { return data_.ranks(); }
  std::uint64_t capacity() const { return std::uint64_t{blocks_per_rank()} * ranks(); }

  // Returns kNullRef iff target's free list is empty.
  GlobalRef acquire(rma::RankId target);
  void release(GlobalRef ref);

  // One CAS attempt against an already observed head. Exposed so the
  // tagged-head ABA guard can be exercised directly.
  std::optional<GlobalRef> try_acquire_from(rma::RankId target, FreeListHead observed);
  FreeListHead head(rma::RankId target) const;

  void read(GlobalRef ref, std::size_t offset, std::span<std::byte> out) const;
  void write(GlobalRef ref, std::size_t offset, std::span<const std::byte> data) const;
  void flush(rma::RankId target) const { data_.flush(target); }

  // expected_incarnation: nullopt accepts whatever incarnation is current.
  LockResult try_lock(GlobalRef ref, LockMode mode,
                      std::optional<std::uint32_t> expected_incarnation = std::nullopt);
  void unlock(GlobalRef ref, LockMode mode);
  // Caller holds the write lock. Returns the new incarnation.
  std::uint32_t bump_incarnation(GlobalRef ref);
  LockWord lock_word(GlobalRef ref) const;

  BlockKind kind(GlobalRef ref) const;
  void set_kind(GlobalRef ref, BlockKind kind) const;

  std::uint32_t index_of(GlobalRef ref) const;
  GlobalRef ref_of(rma::RankId rank, std::uint32_t index) const;

  // Blocks of `target` tagged with kind, in index order. One bulk read.
  std::vector<GlobalRef> blocks_of_kind(rma::RankId target, BlockKind kind) const;
  // Lock words of `target` that have the write bit or readers set.
  std::vector<std::pair<GlobalRef, LockWord>> held_locks(rma::RankId target) const;

  // Walks target's free list. Throws if the list is cyclic or malformed.
  std::uint64_t free_count(rma::RankId target) const;

 private:
  static constexpr std::size_t kHeadOffset = 0;
  std::size_t lock_offset(std::uint32_t index) const { return 8 + std::size_t{index} * 8; }
  void check_ref(GlobalRef ref) const;

  struct HolderLedger {
    std::mutex mutex;
    std::unordered_set<std::uint64_t> held;
  };

  BlockPoolConfig config_;
  rma::Window data_;
  rma::Window usage_;
  rma::Window system_;
  std::shared_ptr<HolderLedger> ledger_;
};

}  // namespace gdi
