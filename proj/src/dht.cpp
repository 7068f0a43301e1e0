#include "gdi/dht.hpp"

#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "gdi/block_pool.hpp"
#include "gdi/error.hpp"

namespace gdi {

std::uint64_t DhtTable::hash(std::uint64_t key) {
  // SplitMix64 finalizer.
  key += 0x9e3779b97f4a7c15ULL;
  key = (key ^ (key >> 30)) * 0xbf58476d1ce4e5b9ULL;
  key = (key ^ (key >> 27)) * 0x94d049bb133111ebULL;
  return key ^ (key >> 31);
}

DhtTable DhtTable::create(rma::Rank& rank, const DhtConfig& config) {
  if (config.buckets_per_rank == 0 || config.entries_per_rank == 0 ||
      config.entries_per_rank >= FreeListHead::kNullIndex) {
    throw Error(Errc::invalid_argument, "hash table needs buckets and heap entries");
  }
  DhtTable t;
  t.config_ = config;
  t.table_ = rank.win_alloc(config.buckets_per_rank * 8);
  t.heap_ = rank.win_alloc(kHeapBase + std::size_t{config.entries_per_rank} * kEntryBytes);
  t.stats_ = rank.share<Stats>([] { return std::make_shared<Stats>(); });

  const auto me = rank.id();
  std::vector<std::uint64_t> heap(config.entries_per_rank * 3);
  for (std::uint32_t i = 0; i < config.entries_per_rank; ++i) {
    const auto link = make_link(me, kHeapBase + std::size_t{i} * kEntryBytes);
    heap[i * 3 + 0] = link | kMark;  // free entries look "being deleted" to stray readers
    heap[i * 3 + 1] = 0;
    heap[i * 3 + 2] = i + 1 < config.entries_per_rank ? i + 1 : FreeListHead::kNullIndex;
  }
  t.heap_.put(me, kHeapBase, std::as_bytes(std::span(heap)));
  t.heap_.atomic_put(me, 0, FreeListHead{0, 0}.pack());
  t.heap_.flush(me);
  rank.barrier();
  return t;
}

DhtTable::Bucket DhtTable::bucket_of(std::uint64_t key) const {
  const auto p = ranks();
  const auto h = hash(key);
  if (config_.placement == DhtPlacement::by_key_rank) {
    const auto r = static_cast<rma::RankId>(key >> 48);
    if (r >= p) throw Error(Errc::invalid_argument, "key does not name a rank of this world");
    return {r, h % config_.buckets_per_rank};
  }
  const auto g = h % (config_.buckets_per_rank * p);
  return {static_cast<rma::RankId>(g % p), g / p};
}

DhtTable::Location DhtTable::bucket_location(const Bucket& b) const { return {&table_, b.rank, b.index * 8}; }

DhtTable::Location DhtTable::next_location(std::uint64_t link) const {
  return {&heap_, link_rank(link), link_offset(link)};
}

DhtTable::Entry DhtTable::read_entry(std::uint64_t link) const {
  Entry e;
  heap_.get(link_rank(link), link_offset(link), std::as_writable_bytes(std::span<Entry, 1>(&e, 1)));
  return e;
}

void DhtTable::note_restart(std::uint32_t& restarts) const {
  if (++restarts > config_.max_restarts) {
    throw std::logic_error("hash table operation exceeded " + std::to_string(config_.max_restarts) + " restarts");
  }
  std::this_thread::yield();
}

void DhtTable::record(std::uint32_t restarts) const {
  auto seen = stats_->max_restarts.load(std::memory_order_relaxed);
  while (restarts > seen && !stats_->max_restarts.compare_exchange_weak(seen, restarts)) {
  }
}

std::uint64_t DhtTable::alloc(rma::RankId preferred, std::uint64_t key, std::uint64_t value) {
  const auto p = ranks();
  for (std::uint32_t attempt = 0; attempt < p; ++attempt) {
    const rma::RankId r = (preferred + attempt) % p;
    auto head = FreeListHead::unpack(heap_.atomic_get(r, 0));
    while (!head.empty()) {
      const std::size_t off = kHeapBase + std::size_t{head.index} * kEntryBytes;
      const auto next = static_cast<std::uint32_t>(heap_.atomic_get(r, off + 16));
      const FreeListHead replacement{next, head.tag + 1};
      const auto prior = heap_.compare_and_swap(r, 0, head.pack(), replacement.pack());
      if (prior == head.pack()) {
        heap_.atomic_put(r, off + 8, key);
        heap_.atomic_put(r, off + 16, value);
        return make_link(r, off);
      }
      head = FreeListHead::unpack(prior);
    }
  }
  throw Error(Errc::resource_exhausted, "hash table heap exhausted on all ranks");
}

void DhtTable::dealloc(std::uint64_t link) {
  const auto r = link_rank(link);
  const auto off = link_offset(link);
  const auto index = static_cast<std::uint32_t>((off - kHeapBase) / kEntryBytes);
  heap_.atomic_put(r, off, link | kMark);
  auto head = FreeListHead::unpack(heap_.atomic_get(r, 0));
  for (;;) {
    heap_.atomic_put(r, off + 16, head.index);
    const FreeListHead replacement{index, head.tag + 1};
    const auto prior = heap_.compare_and_swap(r, 0, head.pack(), replacement.pack());
    if (prior == head.pack()) return;
    head = FreeListHead::unpack(prior);
  }
}

void DhtTable::insert(std::uint64_t key, std::uint64_t value) {
  const auto bucket = bucket_of(key);
  const auto loc = bucket_location(bucket);
  const auto link = alloc(bucket.rank, key, value);
  const auto next_loc = next_location(link);
  for (;;) {
    const auto head = table_.atomic_get(loc.rank, loc.offset);
    heap_.atomic_put(next_loc.rank, next_loc.offset, head);
    heap_.flush(next_loc.rank);
    if (table_.compare_and_swap(loc.rank, loc.offset, head, link) == head) return;
  }
}

bool DhtTable::insert_unique(std::uint64_t key, std::uint64_t value) {
  const auto bucket = bucket_of(key);
  const auto loc = bucket_location(bucket);
  std::uint64_t link = kNull;
  std::uint32_t restarts = 0;
  for (;;) {
    const auto head = table_.atomic_get(loc.rank, loc.offset);
    bool found = false;
    bool restart = false;
    for (auto cur = head; cur != kNull;) {
      const auto e = read_entry(cur);
      if (is_self_marked(cur, e) || bucket_of(e.key) != bucket) {
        restart = true;
        break;
      }
      if (e.key == key) {
        found = true;
        break;
      }
      cur = e.next;
    }
    if (restart) {
      note_restart(restarts);
      continue;
    }
    if (found) {
      if (link != kNull) dealloc(link);
      record(restarts);
      return false;
    }
    if (link == kNull) link = alloc(bucket.rank, key, value);
    const auto next_loc = next_location(link);
    heap_.atomic_put(next_loc.rank, next_loc.offset, head);
    heap_.flush(next_loc.rank);
    // A changed head means an insert or a head delete raced us; rescan.
    if (table_.compare_and_swap(loc.rank, loc.offset, head, link) == head) {
      record(restarts);
      return true;
    }
  }
}

std::optional<std::uint64_t> DhtTable::lookup(std::uint64_t key) const {
  const auto bucket = bucket_of(key);
  const auto loc = bucket_location(bucket);
  std::uint32_t restarts = 0;
  for (;;) {
    auto cur = table_.atomic_get(loc.rank, loc.offset);
    bool restart = false;
    while (cur != kNull) {
      const auto e = read_entry(cur);
      // Self-marked: the entry is about to be deleted. A key from another
      // bucket means the entry was recycled under us.
      if (is_self_marked(cur, e) || bucket_of(e.key) != bucket) {
        restart = true;
        break;
      }
      if (e.key == key) {
        record(restarts);
        return e.value;
      }
      cur = e.next;
    }
    if (!restart) {
      record(restarts);
      return std::nullopt;
    }
    note_restart(restarts);
  }
}

bool DhtTable::erase(std::uint64_t key) {
  const auto bucket = bucket_of(key);
  std::uint32_t restarts = 0;
  for (;;) {
    Location pred = bucket_location(bucket);
    auto cur = pred.window->atomic_get(pred.rank, pred.offset);
    bool restart = false;
    while (cur != kNull) {
      const auto e = read_entry(cur);
      if (is_self_marked(cur, e) || bucket_of(e.key) != bucket) {
        restart = true;
        break;
      }
      if (e.key == key) {
        // First CAS: self-mark the victim so concurrent readers back off.
        const auto victim_loc = next_location(cur);
        if (heap_.compare_and_swap(victim_loc.rank, victim_loc.offset, e.next, cur | kMark) != e.next) {
          // Someone else is deleting it, or its successor just went away.
          restart = true;
          break;
        }
        // Second CAS: bypass the victim in its predecessor.
        if (pred.window->compare_and_swap(pred.rank, pred.offset, cur, e.next) != cur) {
          // The predecessor changed; find the victim again and bypass it
          // using the successor we retained.
          unlink_marked(bucket, cur, e.next, restarts);
        }
        dealloc(cur);
        record(restarts);
        return true;
      }
      pred = next_location(cur);
      cur = e.next;
    }
    if (!restart) {
      record(restarts);
      return false;
    }
    note_restart(restarts);
  }
}

void DhtTable::unlink_marked(const Bucket& bucket, std::uint64_t victim, std::uint64_t successor,
                             std::uint32_t& restarts) {
  for (;;) {
    Location pred = bucket_location(bucket);
    auto cur = pred.window->atomic_get(pred.rank, pred.offset);
    bool restart = false;
    while (cur != victim) {
      if (cur == kNull) {
        throw std::logic_error("marked hash table entry vanished from its chain");
      }
      const auto e = read_entry(cur);
      if (is_self_marked(cur, e)) {
        // Another delete in front of us must finish first.
        restart = true;
        break;
      }
      pred = next_location(cur);
      cur = e.next;
    }
    if (!restart && pred.window->compare_and_swap(pred.rank, pred.offset, victim, successor) == victim) return;
    note_restart(restarts);
  }
}

void DhtTable::for_each_local(rma::RankId me,
                              const std::function<void(std::uint64_t, std::uint64_t)>& fn) const {
  for (std::uint64_t b = 0; b < config_.buckets_per_rank; ++b) {
    std::uint32_t restarts = 0;
    std::vector<Entry> chain;
    for (;;) {
      chain.clear();
      auto cur = table_.atomic_get(me, b * 8);
      bool restart = false;
      while (cur != kNull) {
        const auto e = read_entry(cur);
        if (is_self_marked(cur, e)) {
          restart = true;
          break;
        }
        chain.push_back(e);
        cur = e.next;
      }
      if (!restart) break;
      note_restart(restarts);
    }
    for (const auto& e : chain) fn(e.key, e.value);
  }
}

DhtLocalAudit DhtTable::audit_local(rma::RankId me) const {
  DhtLocalAudit audit;
  std::unordered_set<std::uint64_t> reachable_here;
  for (std::uint64_t b = 0; b < config_.buckets_per_rank; ++b) {
    auto cur = table_.atomic_get(me, b * 8);
    std::uint64_t steps = 0;
    while (cur != kNull) {
      if (++steps > std::uint64_t{config_.entries_per_rank} * ranks()) {
        throw std::logic_error("hash table chain is cyclic");
      }
      const auto e = read_entry(cur);
      ++audit.reachable;
      if (e.next & kMark) {
        ++audit.marked;
        break;
      }
      if (link_rank(cur) == me) reachable_here.insert(cur);
      cur = e.next;
    }
  }
  audit.heap_reachable = reachable_here.size();
  auto index = FreeListHead::unpack(heap_.atomic_get(me, 0)).index;
  std::uint64_t steps = 0;
  while (index != FreeListHead::kNullIndex) {
    if (index >= config_.entries_per_rank || ++steps > config_.entries_per_rank) {
      throw std::logic_error("hash table heap free list is malformed");
    }
    const auto off = kHeapBase + std::size_t{index} * kEntryBytes;
    ++audit.free;
    if (reachable_here.count(make_link(me, off))) ++audit.overlap;
    index = static_cast<std::uint32_t>(heap_.atomic_get(me, off + 16));
  }
  return audit;
}

}  // namespace gdi
