#include "gdi/block_pool.hpp"

#include <string>
#include <vector>

#include "gdi/error.hpp"

namespace gdi {

std::string GlobalRef::to_string() const {
  if (is_null()) return "null";
  return std::to_string(rank()) + ":" + std::to_string(offset());
}

BlockPool BlockPool::create(rma::Rank& rank, const BlockPoolConfig& config) {
  const auto bs = config.block_size;
  if (bs < 64 || (bs & (bs - 1)) != 0) {
    throw Error(Errc::invalid_argument, "block size must be a power of two >= 64");
  }
  if (config.blocks_per_rank == 0 || config.blocks_per_rank >= 0xFFFFFFF0u ||
      std::uint64_t{config.blocks_per_rank} * bs > GlobalRef::kOffsetMask) {
    throw Error(Errc::invalid_argument, "blocks_per_rank out of range");
  }

  BlockPool pool;
  pool.config_ = config;
  pool.data_ = rank.win_alloc(std::size_t{config.blocks_per_rank} * bs);
  pool.usage_ = rank.win_alloc(std::size_t{config.blocks_per_rank} * 4);
  pool.system_ = rank.win_alloc(8 + std::size_t{config.blocks_per_rank} * 8);
  if (config.track_holders) {
    pool.ledger_ = rank.share<HolderLedger>([] { return std::make_shared<HolderLedger>(); });
  }

  // Thread every local block onto the free list: usage[i] = i + 1.
  const auto me = rank.id();
  std::vector<std::uint32_t> links(config.blocks_per_rank);
  for (std::uint32_t i = 0; i < config.blocks_per_rank; ++i) links[i] = i + 1;
  links.back() = FreeListHead::kNullIndex;
  pool.usage_.put(me, 0, std::as_bytes(std::span(links)));
  pool.usage_.flush(me);
  pool.system_.atomic_put(me, kHeadOffset, FreeListHead{0, 0}.pack());
  rank.barrier();
  return pool;
}

void BlockPool::check_ref(GlobalRef ref) const {
  if (ref.is_null() || ref.rank() >= ranks() || ref.offset() % config_.block_size != 0 ||
      ref.offset() / config_.block_size >= config_.blocks_per_rank) {
    throw Error(Errc::bounds, "invalid block reference " + ref.to_string());
  }
}

std::uint32_t BlockPool::index_of(GlobalRef ref) const {
  check_ref(ref);
  return static_cast<std::uint32_t>(ref.offset() / config_.block_size);
}

GlobalRef BlockPool::ref_of(rma::RankId rank, std::uint32_t index) const {
  return GlobalRef(rank, std::uint64_t{index} * config_.block_size);
}

FreeListHead BlockPool::head(rma::RankId target) const {
  return FreeListHead::unpack(system_.atomic_get(target, kHeadOffset));
}

std::optional<GlobalRef> BlockPool::try_acquire_from(rma::RankId target, FreeListHead observed) {
  if (observed.empty()) return kNullRef;
  const auto next = usage_.get_value<std::uint32_t>(target, std::size_t{observed.index} * 4);
  const FreeListHead replacement{next, observed.tag + 1};
  const auto prior = system_.compare_and_swap(target, kHeadOffset, observed.pack(), replacement.pack());
  if (prior != observed.pack()) return std::nullopt;
  const auto ref = ref_of(target, observed.index);
  if (ledger_) {
    std::lock_guard lock(ledger_->mutex);
    if (!ledger_->held.insert(ref.bits()).second) {
      throw std::logic_error("block " + ref.to_string() + " granted twice");
    }
  }
  return ref;
}

GlobalRef BlockPool::acquire(rma::RankId target) {
  if (target >= ranks()) throw Error(Errc::bounds, "acquire on rank outside world");
  auto observed = head(target);
  for (;;) {
    if (observed.empty()) return kNullRef;
    if (auto ref = try_acquire_from(target, observed)) return *ref;
    // The failed CAS told us the current head; retry from there.
    observed = head(target);
  }
}

void BlockPool::release(GlobalRef ref) {
  const auto index = index_of(ref);
  if (ledger_) {
    std::lock_guard lock(ledger_->mutex);
    if (ledger_->held.erase(ref.bits()) == 0) {
      throw std::logic_error("release of block " + ref.to_string() + " that is not held");
    }
  }
  const auto target = ref.rank();
  auto observed = head(target);
  for (;;) {
    usage_.put_value<std::uint32_t>(target, std::size_t{index} * 4, observed.index);
    usage_.flush(target);
    const FreeListHead replacement{index, observed.tag + 1};
    const auto prior = system_.compare_and_swap(target, kHeadOffset, observed.pack(), replacement.pack());
    if (prior == observed.pack()) return;
    observed = FreeListHead::unpack(prior);
  }
}

void BlockPool::read(GlobalRef ref, std::size_t offset, std::span<std::byte> out) const {
  check_ref(ref);
  if (offset > config_.block_size || out.size() > config_.block_size - offset) {
    throw Error(Errc::bounds, "read beyond block end");
  }
  if (out.empty()) return;
  data_.get(ref.rank(), ref.offset() + offset, out);
}

void BlockPool::write(GlobalRef ref, std::size_t offset, std::span<const std::byte> data) const {
  check_ref(ref);
  if (offset > config_.block_size || data.size() > config_.block_size - offset) {
    throw Error(Errc::bounds, "write beyond block end");
  }
  if (data.empty()) return;
  data_.put(ref.rank(), ref.offset() + offset, data);
}

LockResult BlockPool::try_lock(GlobalRef ref, LockMode mode, std::optional<std::uint32_t> expected_incarnation) {
  const auto offset = lock_offset(index_of(ref));
  std::uint64_t current = system_.atomic_get(ref.rank(), offset);
  for (;;) {
    const auto word = LockWord::unpack(current);
    if (expected_incarnation && word.incarnation != *expected_incarnation) {
      return {LockStatus::stale, word.incarnation};
    }
    std::uint64_t desired;
    if (mode == LockMode::read) {
      if (word.write || word.readers == LockWord::kMaxReaders) return {LockStatus::busy, word.incarnation};
      desired = current + LockWord::kReaderOne;
    } else {
      if (word.write || word.readers > 0) return {LockStatus::busy, word.incarnation};
      desired = current | LockWord::kWriteBit;
    }
    const auto prior = system_.compare_and_swap(ref.rank(), offset, current, desired);
    if (prior == current) return {LockStatus::acquired, word.incarnation};
    // Lost a race with another reader or an unlock; re-evaluate.
    current = prior;
  }
}

void BlockPool::unlock(GlobalRef ref, LockMode mode) {
  const auto offset = lock_offset(index_of(ref));
  std::uint64_t current = system_.atomic_get(ref.rank(), offset);
  for (;;) {
    const auto word = LockWord::unpack(current);
    std::uint64_t desired;
    if (mode == LockMode::read) {
      if (word.write || word.readers == 0) {
        throw std::logic_error("read unlock of " + ref.to_string() + " without a read lock");
      }
      desired = current - LockWord::kReaderOne;
    } else {
      if (!word.write) throw std::logic_error("write unlock of " + ref.to_string() + " without the write lock");
      desired = current & ~LockWord::kWriteBit;
    }
    const auto prior = system_.compare_and_swap(ref.rank(), offset, current, desired);
    if (prior == current) return;
    current = prior;
  }
}

std::uint32_t BlockPool::bump_incarnation(GlobalRef ref) {
  const auto offset = lock_offset(index_of(ref));
  std::uint64_t current = system_.atomic_get(ref.rank(), offset);
  for (;;) {
    auto word = LockWord::unpack(current);
    if (!word.write) throw std::logic_error("incarnation bump without the write lock");
    ++word.incarnation;
    const auto prior = system_.compare_and_swap(ref.rank(), offset, current, word.pack());
    if (prior == current) return word.incarnation;
    current = prior;
  }
}

LockWord BlockPool::lock_word(GlobalRef ref) const {
  const auto offset = 8 + std::size_t{index_of(ref)} * 8;
  return LockWord::unpack(system_.atomic_get(ref.rank(), offset));
}

BlockKind BlockPool::kind(GlobalRef ref) const {
  const auto tag = usage_.get_value<std::uint32_t>(ref.rank(), std::size_t{index_of(ref)} * 4);
  switch (static_cast<BlockKind>(tag)) {
    case BlockKind::vertex:
    case BlockKind::edge:
    case BlockKind::continuation:
      return static_cast<BlockKind>(tag);
    default:
      return BlockKind::unassigned;
  }
}

void BlockPool::set_kind(GlobalRef ref, BlockKind kind) const {
  usage_.put_value<std::uint32_t>(ref.rank(), std::size_t{index_of(ref)} * 4, static_cast<std::uint32_t>(kind));
}

std::uint64_t BlockPool::free_count(rma::RankId target) const {
  std::uint64_t count = 0;
  std::vector<bool> seen(config_.blocks_per_rank, false);
  auto index = head(target).index;
  while (index != FreeListHead::kNullIndex) {
    if (index >= config_.blocks_per_rank) {
      throw std::logic_error("free list of rank " + std::to_string(target) + " links to index " +
                             std::to_string(index));
    }
    if (seen[index]) throw std::logic_error("free list of rank " + std::to_string(target) + " is cyclic");
    seen[index] = true;
    ++count;
    index = usage_.get_value<std::uint32_t>(target, std::size_t{index} * 4);
  }
  return count;
}

std::vector<GlobalRef> BlockPool::blocks_of_kind(rma::RankId target, BlockKind kind) const {
  std::vector<std::uint32_t> tags(config_.blocks_per_rank);
  usage_.get(target, 0, std::as_writable_bytes(std::span(tags)));
  std::vector<GlobalRef> out;
  for (std::uint32_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == static_cast<std::uint32_t>(kind)) out.push_back(ref_of(target, i));
  }
  return out;
}

std::vector<std::pair<GlobalRef, LockWord>> BlockPool::held_locks(rma::RankId target) const {
  std::vector<std::pair<GlobalRef, LockWord>> out;
  for (std::uint32_t i = 0; i < config_.blocks_per_rank; ++i) {
    const auto w = LockWord::unpack(system_.atomic_get(target, lock_offset(i)));
    if (w.write || w.readers != 0) out.emplace_back(ref_of(target, i), w);
  }
  return out;
}

}  // namespace gdi
