#pragma once

// One-sided communication layer.
//
// A World hosts P ranks, each driven by its own execution agent (thread).
// Windows expose one zero-initialized byte segment per rank that every rank
// may read and write with put/get and 8-byte atomics. Puts and gets take
// effect immediately in this backend; callers must still flush(target)
// before relying on remote visibility so that a real transport can be
// substituted without changing the code above this layer.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace gdi::rma {

using RankId = std::uint32_t;

inline constexpr std::uint32_t kMaxRanks = 1u << 16;

enum class ReduceOp { sum, max, min };

struct WorldOptions {
  std::chrono::milliseconds collective_timeout{120'000};
  // Uniform latency charged to every window operation. The issuing agent
  // sleeps for the duration, modelling a NIC round trip during which the
  // core is free for other agents.
  std::chrono::nanoseconds op_delay{0};
};

class World;

namespace detail {
struct WindowState;
class Rendezvous;
}  // namespace detail

class Window {
 public:
  Window() = default;

  std::size_t size_per_rank() const noexcept;
  std::uint32_t ranks() const noexcept;
  explicit operator bool() const noexcept { return state_ != nullptr; }

  void put(RankId target, std::size_t offset, std::span<const std::byte> data) const;
  void get(RankId target, std::size_t offset, std::span<std::byte> out) const;

  std::uint64_t compare_and_swap(RankId target, std::size_t offset, std::uint64_t compare,
                                 std::uint64_t desired) const;
  std::uint64_t atomic_get(RankId target, std::size_t offset) const;
  void atomic_put(RankId target, std::size_t offset, std::uint64_t value) const;

  void flush(RankId target) const;

  // Typed helpers for fixed-width fields.
  template <typename T>
  void put_value(RankId target, std::size_t offset, const T& value) const {
    put(target, offset, std::as_bytes(std::span<const T, 1>(&value, 1)));
  }
  template <typename T>
  T get_value(RankId target, std::size_t offset) const {
    T value{};
    get(target, offset, std::as_writable_bytes(std::span<T, 1>(&value, 1)));
    return value;
  }

 private:
  friend class Rank;
  explicit Window(std::shared_ptr<detail::WindowState> state) : state_(std::move(state)) {}

  std::shared_ptr<detail::WindowState> state_;
};

// Per-agent context handed to the rank function. All collectives must be
// called by every rank the same number of times in the same order.
class Rank {
 public:
  RankId id() const noexcept { return id_; }
  std::uint32_t size() const noexcept;
  World& world() noexcept { return *world_; }

  Window win_alloc(std::size_t size_per_rank);

  void barrier();
  std::uint64_t allreduce(std::uint64_t local, ReduceOp op);
  double allreduce_sum(double local);
  // Result is meaningful at root only; other ranks receive 0.
  std::uint64_t reduce(std::uint64_t local, RankId root, ReduceOp op = ReduceOp::sum);
  std::uint64_t broadcast(std::uint64_t value, RankId root);
  std::vector<std::uint64_t> allgather(std::uint64_t local);
  std::vector<std::uint64_t> allgatherv(std::span<const std::uint64_t> local);

  // Personalized all-to-all exchange. per_dest[d] is delivered to rank d;
  // the result concatenates what every source sent here, ordered by source.
  std::vector<std::uint64_t> alltoallv(const std::vector<std::vector<std::uint64_t>>& per_dest);

  // Collective: one rank constructs an agent-shared object and every rank
  // receives the same instance. Only meaningful for the in-process backend;
  // used for debug ledgers and audit state, never for graph data.
  template <typename T>
  std::shared_ptr<T> share(const std::function<std::shared_ptr<T>()>& make) {
    return std::static_pointer_cast<T>(share_object([&] { return std::shared_ptr<void>(make()); }));
  }

 private:
  friend class World;
  std::shared_ptr<void> share_object(const std::function<std::shared_ptr<void>()>& make);
  Rank(World* world, RankId id) : world_(world), id_(id) {}

  World* world_;
  RankId id_;
};

class World {
 public:
  explicit World(std::uint32_t ranks, WorldOptions options = {});
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  std::uint32_t size() const noexcept { return ranks_; }

  // Runs fn once per rank on its own agent and joins. The first exception
  // thrown by any rank is rethrown here; ranks blocked in collectives are
  // released with an error.
  void run(const std::function<void(Rank&)>& fn);

  void set_op_delay(std::chrono::nanoseconds delay) noexcept { op_delay_ns_.store(delay.count()); }
  std::chrono::nanoseconds op_delay() const noexcept {
    return std::chrono::nanoseconds(op_delay_ns_.load(std::memory_order_relaxed));
  }

 private:
  friend class Rank;
  friend class Window;

  std::uint32_t ranks_;
  WorldOptions options_;
  std::atomic<std::int64_t> op_delay_ns_;
  std::unique_ptr<detail::Rendezvous> rendezvous_;
};

}  // namespace gdi::rma
