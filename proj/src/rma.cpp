#include "gdi/rma.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#if defined(__linux__)
#include <sys/prctl.h>
#endif

#include "gdi/error.hpp"

namespace gdi::rma {
namespace detail {

struct WindowState {
  World* world = nullptr;
  std::size_t size = 0;
  std::size_t words = 0;
  std::vector<std::unique_ptr<std::atomic<std::uint64_t>[]>> segments;

  void charge() const {
    auto delay = world->op_delay();
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
  }

  std::atomic<std::uint64_t>* segment(RankId target) const {
    if (target >= segments.size()) {
      throw Error(Errc::bounds, "rank " + std::to_string(target) + " outside world");
    }
    return segments[target].get();
  }

  void check_range(std::size_t offset, std::size_t len) const {
    if (offset >= size || len > size - offset) {
      throw Error(Errc::bounds, "window access [" + std::to_string(offset) + ", +" +
                                    std::to_string(len) + ") exceeds " + std::to_string(size));
    }
  }

  std::atomic<std::uint64_t>& word(RankId target, std::size_t offset) const {
    check_range(offset, 8);
    if (offset % 8 != 0) {
      throw Error(Errc::alignment, "atomic at offset " + std::to_string(offset));
    }
    return segment(target)[offset / 8];
  }
};

struct Contribution {
  std::string_view kind;
  std::vector<std::uint64_t> words;
  std::shared_ptr<void> object;
};

using Combiner = std::function<void(std::vector<Contribution>&)>;

// Centralized rendezvous: the last arriving rank runs the combiner over all
// contributions and publishes the results.
class Rendezvous {
 public:
  Rendezvous(std::uint32_t ranks, std::chrono::milliseconds timeout)
      : ranks_(ranks), timeout_(timeout), in_(ranks), out_(ranks) {}

  Contribution exchange(RankId me, Contribution contribution, const Combiner& combine) {
    std::unique_lock lock(mutex_);
    rethrow_failure();
    in_[me] = std::move(contribution);
    const std::uint64_t generation = generation_;
    if (++arrived_ == ranks_) {
      for (const auto& c : in_) {
        if (c.kind != in_[0].kind) {
          fail(Errc::collective_mismatch, "ranks disagree on collective: '" + std::string(in_[0].kind) +
                                              "' vs '" + std::string(c.kind) + "'");
        }
      }
      if (combine) {
        try {
          combine(in_);
        } catch (const Error& e) {
          fail(e.code(), e.what());
        }
      }
      out_.swap(in_);
      in_.assign(ranks_, Contribution{});
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
    } else {
      const bool done = cv_.wait_for(lock, timeout_, [&] {
        return generation_ != generation || failure_ || departed_ > 0;
      });
      if (generation_ == generation) {
        if (!done) fail(Errc::collective_timeout, "collective did not complete within timeout");
        if (departed_ > 0 && !failure_) {
          fail(Errc::collective_mismatch, "a rank left while others wait in a collective");
        }
        rethrow_failure();
      }
    }
    return std::move(out_[me]);
  }

  void depart() {
    std::lock_guard lock(mutex_);
    ++departed_;
    cv_.notify_all();
  }

  void poison(const std::string& why) {
    std::lock_guard lock(mutex_);
    if (!failure_) failure_ = Error(Errc::collective_mismatch, "peer rank failed: " + why);
    cv_.notify_all();
  }

 private:
  [[noreturn]] void fail(Errc code, const std::string& what) {
    if (!failure_) failure_ = Error(code, what);
    cv_.notify_all();
    throw *failure_;
  }

  void rethrow_failure() {
    if (failure_) throw *failure_;
  }

  std::uint32_t ranks_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Contribution> in_;
  std::vector<Contribution> out_;
  std::uint32_t arrived_ = 0;
  std::uint64_t generation_ = 0;
  std::uint32_t departed_ = 0;
  std::optional<Error> failure_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Window

std::size_t Window::size_per_rank() const noexcept { return state_ ? state_->size : 0; }

std::uint32_t Window::ranks() const noexcept {
  return state_ ? static_cast<std::uint32_t>(state_->segments.size()) : 0;
}

void Window::put(RankId target, std::size_t offset, std::span<const std::byte> data) const {
  state_->check_range(offset, data.size());
  auto* seg = state_->segment(target);
  state_->charge();
  std::size_t pos = offset;
  std::size_t src = 0;
  while (src < data.size()) {
    const std::size_t w = pos / 8;
    const std::size_t in_word = pos % 8;
    const std::size_t n = std::min<std::size_t>(8 - in_word, data.size() - src);
    if (n == 8) {
      std::uint64_t v;
      std::memcpy(&v, data.data() + src, 8);
      seg[w].store(v, std::memory_order_release);
    } else {
      std::uint64_t prior = seg[w].load(std::memory_order_relaxed);
      std::uint64_t merged;
      do {
        merged = prior;
        std::memcpy(reinterpret_cast<std::byte*>(&merged) + in_word, data.data() + src, n);
      } while (!seg[w].compare_exchange_weak(prior, merged, std::memory_order_release,
                                             std::memory_order_relaxed));
    }
    pos += n;
    src += n;
  }
}

void Window::get(RankId target, std::size_t offset, std::span<std::byte> out) const {
  state_->check_range(offset, out.size());
  auto* seg = state_->segment(target);
  state_->charge();
  std::size_t pos = offset;
  std::size_t dst = 0;
  while (dst < out.size()) {
    const std::size_t w = pos / 8;
    const std::size_t in_word = pos % 8;
    const std::size_t n = std::min<std::size_t>(8 - in_word, out.size() - dst);
    const std::uint64_t v = seg[w].load(std::memory_order_acquire);
    std::memcpy(out.data() + dst, reinterpret_cast<const std::byte*>(&v) + in_word, n);
    pos += n;
    dst += n;
  }
}

std::uint64_t Window::compare_and_swap(RankId target, std::size_t offset, std::uint64_t compare,
                                       std::uint64_t desired) const {
  auto& w = state_->word(target, offset);
  state_->charge();
  w.compare_exchange_strong(compare, desired, std::memory_order_acq_rel, std::memory_order_acquire);
  return compare;
}

std::uint64_t Window::atomic_get(RankId target, std::size_t offset) const {
  auto& w = state_->word(target, offset);
  state_->charge();
  return w.load(std::memory_order_acquire);
}

void Window::atomic_put(RankId target, std::size_t offset, std::uint64_t value) const {
  auto& w = state_->word(target, offset);
  state_->charge();
  w.store(value, std::memory_order_release);
}

void Window::flush(RankId target) const {
  state_->segment(target);
  std::atomic_thread_fence(std::memory_order_seq_cst);
}

// ---------------------------------------------------------------------------
// Rank

std::uint32_t Rank::size() const noexcept { return world_->size(); }

Window Rank::win_alloc(std::size_t size_per_rank) {
  detail::Contribution c{"win_alloc", {size_per_rank}, nullptr};
  World* world = world_;
  auto out = world_->rendezvous_->exchange(id_, std::move(c), [world](auto& all) {
    for (const auto& x : all) {
      if (x.words[0] != all[0].words[0]) {
        throw Error(Errc::collective_mismatch, "win_alloc sizes differ across ranks");
      }
    }
    auto state = std::make_shared<detail::WindowState>();
    state->world = world;
    state->size = all[0].words[0];
    state->words = (state->size + 7) / 8;
    try {
      for (std::size_t r = 0; r < all.size(); ++r) {
        state->segments.push_back(std::make_unique<std::atomic<std::uint64_t>[]>(state->words));
      }
    } catch (const std::bad_alloc&) {
      throw Error(Errc::resource_exhausted, "window allocation of " +
                                                std::to_string(state->size) + " bytes per rank");
    }
    for (auto& x : all) x.object = state;
  });
  return Window(std::static_pointer_cast<detail::WindowState>(out.object));
}

std::shared_ptr<void> Rank::share_object(const std::function<std::shared_ptr<void>()>& make) {
  detail::Contribution c{"share", {}, id_ == 0 ? make() : nullptr};
  auto out = world_->rendezvous_->exchange(id_, std::move(c), [](auto& all) {
    auto object = all[0].object;
    for (auto& x : all) x.object = object;
  });
  return out.object;
}

void Rank::barrier() { world_->rendezvous_->exchange(id_, {"barrier", {}, nullptr}, nullptr); }

std::uint64_t Rank::allreduce(std::uint64_t local, ReduceOp op) {
  auto out = world_->rendezvous_->exchange(id_, {"allreduce", {local, static_cast<std::uint64_t>(op)}, nullptr},
                                           [](auto& all) {
    std::uint64_t acc = all[0].words[0];
    const auto op = static_cast<ReduceOp>(all[0].words[1]);
    for (std::size_t i = 1; i < all.size(); ++i) {
      const auto v = all[i].words[0];
      switch (op) {
        case ReduceOp::sum: acc += v; break;
        case ReduceOp::max: acc = std::max(acc, v); break;
        case ReduceOp::min: acc = std::min(acc, v); break;
      }
    }
    for (auto& x : all) x.words = {acc};
  });
  return out.words[0];
}

double Rank::allreduce_sum(double local) {
  std::uint64_t bits;
  std::memcpy(&bits, &local, 8);
  auto out = world_->rendezvous_->exchange(id_, {"allreduce_f64", {bits}, nullptr}, [](auto& all) {
    // Summed in rank order so every rank sees the identical value.
    double acc = 0.0;
    for (const auto& x : all) {
      double v;
      std::memcpy(&v, &x.words[0], 8);
      acc += v;
    }
    std::uint64_t b;
    std::memcpy(&b, &acc, 8);
    for (auto& x : all) x.words = {b};
  });
  double result;
  std::memcpy(&result, &out.words[0], 8);
  return result;
}

std::uint64_t Rank::reduce(std::uint64_t local, RankId root, ReduceOp op) {
  const auto total = allreduce(local, op);
  return id_ == root ? total : 0;
}

std::uint64_t Rank::broadcast(std::uint64_t value, RankId root) {
  auto out = world_->rendezvous_->exchange(id_, {"broadcast", {value, root}, nullptr}, [](auto& all) {
    const auto root = all[0].words[1];
    if (root >= all.size()) throw Error(Errc::invalid_argument, "broadcast root out of range");
    const auto v = all[root].words[0];
    for (auto& x : all) x.words = {v};
  });
  return out.words[0];
}

std::vector<std::uint64_t> Rank::allgather(std::uint64_t local) {
  return allgatherv(std::span<const std::uint64_t>(&local, 1));
}

std::vector<std::uint64_t> Rank::allgatherv(std::span<const std::uint64_t> local) {
  detail::Contribution c{"allgather", std::vector<std::uint64_t>(local.begin(), local.end()), nullptr};
  auto out = world_->rendezvous_->exchange(id_, std::move(c), [](auto& all) {
    auto merged = std::make_shared<std::vector<std::uint64_t>>();
    for (const auto& x : all) merged->insert(merged->end(), x.words.begin(), x.words.end());
    for (auto& x : all) x.object = merged;
  });
  return *std::static_pointer_cast<std::vector<std::uint64_t>>(out.object);
}

std::vector<std::uint64_t> Rank::alltoallv(const std::vector<std::vector<std::uint64_t>>& per_dest) {
  const std::uint32_t p = size();
  if (per_dest.size() != p) throw Error(Errc::invalid_argument, "alltoallv needs one buffer per rank");

  std::vector<std::uint64_t> my_counts(p);
  for (std::uint32_t d = 0; d < p; ++d) my_counts[d] = per_dest[d].size();
  // counts[s * p + d] = words sent from s to d
  const auto counts = allgatherv(my_counts);

  std::uint64_t max_recv = 0;
  for (std::uint32_t d = 0; d < p; ++d) {
    std::uint64_t total = 0;
    for (std::uint32_t s = 0; s < p; ++s) total += counts[s * p + d];
    max_recv = std::max(max_recv, total);
  }
  if (max_recv == 0) {
    barrier();
    return {};
  }

  Window buffer = win_alloc(max_recv * 8);
  for (std::uint32_t d = 0; d < p; ++d) {
    if (per_dest[d].empty()) continue;
    std::uint64_t offset = 0;
    for (std::uint32_t s = 0; s < id_; ++s) offset += counts[s * p + d];
    buffer.put(d, offset * 8, std::as_bytes(std::span(per_dest[d])));
    buffer.flush(d);
  }
  barrier();

  std::uint64_t mine = 0;
  for (std::uint32_t s = 0; s < p; ++s) mine += counts[s * p + id_];
  std::vector<std::uint64_t> received(mine);
  if (mine > 0) buffer.get(id_, 0, std::as_writable_bytes(std::span(received)));
  // The buffer may only be released once every rank has read its part.
  barrier();
  return received;
}

// ---------------------------------------------------------------------------
// World

World::World(std::uint32_t ranks, WorldOptions options)
    : ranks_(ranks), options_(options), op_delay_ns_(options.op_delay.count()) {
  if (ranks == 0 || ranks > kMaxRanks) {
    throw Error(Errc::invalid_argument, "rank count must be in [1, 65536]");
  }
}

World::~World() = default;

void World::run(const std::function<void(Rank&)>& fn) {
  rendezvous_ = std::make_unique<detail::Rendezvous>(ranks_, options_.collective_timeout);
  std::mutex error_mutex;
  std::exception_ptr first_error;
  bool first_is_secondary = false;

  auto body = [&](RankId id) {
#if defined(__linux__)
    // Let sub-50us simulated latencies sleep close to their nominal length.
    prctl(PR_SET_TIMERSLACK, 1UL, 0, 0, 0);
#endif
    Rank rank(this, id);
    try {
      fn(rank);
      rendezvous_->depart();
    } catch (const std::exception& e) {
      const bool secondary = std::string_view(e.what()).find("peer rank failed") != std::string_view::npos;
      {
        std::lock_guard lock(error_mutex);
        if (!first_error || (first_is_secondary && !secondary)) {
          first_error = std::current_exception();
          first_is_secondary = secondary;
        }
      }
      rendezvous_->poison(e.what());
      rendezvous_->depart();
    }
  };

  std::vector<std::thread> agents;
  agents.reserve(ranks_);
  for (RankId r = 0; r < ranks_; ++r) agents.emplace_back(body, r);
  for (auto& t : agents) t.join();
  rendezvous_.reset();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gdi::rma
