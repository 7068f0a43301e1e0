#include "gdi/bench.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "gdi/error.hpp"

namespace gdi::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b) { return mix64(mix64(seed ^ mix64(a)) + b); }

double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Local vertices and their undirected adjacency, read inside a transaction.
struct LocalGraph {
  std::vector<GlobalRef> refs;
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  std::vector<std::vector<GlobalRef>> adj;

  LocalGraph(Database& db, Transaction& t) {
    refs = db.local_vertices();
    std::sort(refs.begin(), refs.end());
    adj.resize(refs.size());
    for (std::uint32_t i = 0; i < refs.size(); ++i) {
      index.emplace(refs[i].bits(), i);
      adj[i] = t.associate_vertex(refs[i]).neighbors(kAnyOrientation);
    }
  }
  std::uint32_t at(std::uint64_t bits) const {
    auto it = index.find(bits);
    if (it == index.end()) throw Error(Errc::not_found, "message for a vertex this rank does not store");
    return it->second;
  }
};

void close_collective(Transaction& t) {
  if (t.commit() != Outcome::committed) throw Error(Errc::transaction_failed, "collective transaction aborted");
}

std::vector<std::uint64_t> bfs_levels(Database& db, GlobalRef root, std::uint64_t max_level) {
  auto& rank = db.rank();
  const auto P = db.ranks();
  auto t = db.start_collective_transaction(TxnMode::read);
  LocalGraph g(db, t);
  const std::uint64_t here = g.index.count(root.bits());
  if (rank.allreduce(here, rma::ReduceOp::sum) == 0) {
    close_collective(t);
    throw Error(Errc::not_found, "unknown root " + root.to_string());
  }
  constexpr auto kUnset = ~std::uint64_t{0};
  std::vector<std::uint64_t> depth(g.refs.size(), kUnset);
  std::vector<std::uint32_t> frontier;
  if (here) {
    depth[g.at(root.bits())] = 0;
    frontier.push_back(g.at(root.bits()));
  }
  for (std::uint64_t level = 0; level < max_level; ++level) {
    std::vector<std::vector<std::uint64_t>> out(P);
    for (auto v : frontier) {
      for (auto n : g.adj[v]) out[n.rank()].push_back(n.bits());
    }
    const auto in = rank.alltoallv(out);
    std::vector<std::uint32_t> next;
    for (auto bits : in) {
      const auto i = g.at(bits);
      if (depth[i] == kUnset) {
        depth[i] = level + 1;
        next.push_back(i);
      }
    }
    frontier = std::move(next);
    if (rank.allreduce(frontier.size(), rma::ReduceOp::sum) == 0) break;
  }
  close_collective(t);
  return depth;
}

template <typename T>
std::uint64_t to_word(T v) {
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<std::uint64_t>(v);
  } else {
    return static_cast<std::uint64_t>(v);
  }
}

template <typename T>
T from_word(std::uint64_t w) {
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(w);
  } else {
    return static_cast<T>(w);
  }
}

const char* kColors[] = {"red", "blue", "green", "black"};

bool bi_is_person(const GenSpec& spec, std::uint64_t id) { return draw(spec.seed, 11, id) % 10 < 6; }

}  // namespace

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::get_properties: return "get_properties";
    case OpKind::count_edges: return "count_edges";
    case OpKind::get_edges: return "get_edges";
    case OpKind::add_vertex: return "add_vertex";
    case OpKind::delete_vertex: return "delete_vertex";
    case OpKind::update_property: return "update_property";
    case OpKind::add_edge: return "add_edge";
  }
  return "?";
}

OpKind OltpMix::sample(std::uint64_t u) const {
  // Unbiased integer in [0, kTotal) by rejection.
  constexpr std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % kTotal);
  while (u >= limit) u = mix64(u);
  auto x = static_cast<std::uint32_t>(u % kTotal);
  for (std::size_t k = 0; k < kOpKinds; ++k) {
    if (x < weight[k]) return static_cast<OpKind>(k);
    x -= weight[k];
  }
  throw Error(Errc::invalid_argument, "mix weights do not sum to " + std::to_string(kTotal));
}

bool OltpMix::read_only() const {
  for (std::size_t k = 3; k < kOpKinds; ++k) {
    if (weight[k] != 0) return false;
  }
  return true;
}

const std::vector<OltpMix>& OltpMix::standard() {
  static const std::vector<OltpMix> mixes = {
      {"RM", {288, 117, 593, 0, 0, 0, 2}},
      {"RI", {217, 88, 445, 0, 0, 0, 250}},
      {"WI", {91, 0, 109, 200, 67, 133, 400}},
      {"LB", {129, 49, 512, 26, 10, 74, 200}},
  };
  return mixes;
}

OltpMix OltpMix::by_name(std::string_view name) {
  for (const auto& m : standard()) {
    if (lower(m.name) == lower(name)) return m;
  }
  throw Error(Errc::not_found, "unknown mix '" + std::string(name) + "'");
}

Histogram::Histogram() : counts_(upper_bounds_ns().size() + 1, 0) {}

const std::vector<double>& Histogram::upper_bounds_ns() {
  static const std::vector<double> bounds = [] {
    std::vector<double> b;
    for (int i = 0; i <= 28; ++i) b.push_back(100.0 * std::pow(10.0, i / 4.0));
    return b;
  }();
  return bounds;
}

void Histogram::add(std::chrono::nanoseconds d) {
  const auto& b = upper_bounds_ns();
  const auto ns = static_cast<double>(d.count());
  const auto it = std::lower_bound(b.begin(), b.end(), ns);
  ++counts_[static_cast<std::size_t>(it - b.begin())];
}

void Histogram::merge(const Histogram& other) {
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t Histogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

Histogram Histogram::from_words(std::span<const std::uint64_t> words) {
  Histogram h;
  if (words.size() != h.counts_.size()) throw Error(Errc::invalid_argument, "histogram size mismatch");
  h.counts_.assign(words.begin(), words.end());
  return h;
}

nlohmann::ordered_json Histogram::to_json() const {
  nlohmann::ordered_json j;
  j["upper_bounds_ns"] = upper_bounds_ns();
  j["counts"] = counts_;
  j["total"] = total();
  return j;
}

nlohmann::ordered_json OltpResult::to_json() const {
  nlohmann::ordered_json j;
  j["mix"] = mix;
  j["warmup_per_rank"] = warmup;
  j["attempted"] = attempted;
  j["committed"] = attempted - failed;
  j["failed"] = failed;
  j["failed_fraction"] = failed_fraction();
  j["elapsed_s"] = elapsed_s;
  j["throughput_qps"] = throughput();
  j["latency"] = latency.to_json();
  auto& kinds = j["per_kind"] = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kOpKinds; ++k) {
    kinds[to_string(static_cast<OpKind>(k))] = {{"attempted", kind_attempted[k]},
                                                {"failed", kind_failed[k]},
                                                {"latency_counts", kind_latency[k].counts()}};
  }
  auto& ranks = j["per_rank"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    ranks.push_back({{"rank", r},
                     {"attempted", per_rank[r].attempted},
                     {"failed", per_rank[r].failed},
                     {"elapsed_s", per_rank[r].elapsed_s}});
  }
  j["op_sequence_hash"] = op_sequence_hash;
  return j;
}

GraphContext prepare_graph(Database& db, const GenSpec& spec) {
  GraphContext ctx;
  ctx.spec = spec;
  ctx.gen = generate(db, spec, &ctx.owned);
  auto found = db.catalog().find_property_type("bench_value");
  ctx.value_type = found ? *found : db.create_property_type("bench_value", EntityKind::single, Datatype::u64);
  return ctx;
}

std::vector<OpKind> op_sequence(const OltpMix& mix, std::uint64_t seed, rma::RankId rank, std::uint64_t count) {
  std::vector<OpKind> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(mix.sample(draw(seed, 0x0A11 + rank, i)));
  return out;
}

OltpResult run_oltp(Database& db, GraphContext& ctx, const OltpMix& mix, std::uint64_t queries_per_rank,
                    std::uint64_t seed, std::uint64_t warmup) {
  auto& rank = db.rank();
  const auto me = db.rank_id();
  const auto P = db.ranks();
  const auto n = ctx.spec.vertices();
  if (n == 0) throw Error(Errc::invalid_argument, "empty database");

  std::vector<Label> gen_labels;
  for (std::uint32_t i = 0; i < ctx.spec.labels; ++i) gen_labels.push_back(db.label_from_name(gen_label_name(i)));
  auto label_of = [&](std::uint64_t id) {
    return id < n ? gen_labels[gen_vertex_labels(ctx.spec, id)[0]] : gen_labels[0];
  };

  std::vector<std::uint64_t> ids;
  std::uint64_t top = n;
  {
    auto t = db.start_collective_transaction(TxnMode::read);
    for (auto r : db.local_vertices()) {
      const auto app = t.associate_vertex(r).app_id();
      std::uint64_t id = 0;
      const auto* text = reinterpret_cast<const char*>(app.data());
      const auto [end, ec] = std::from_chars(text, text + app.size(), id);
      if (ec == std::errc() && end == text + app.size()) ids.push_back(id);
    }
    t.commit();
  }
  auto live = rank.allgatherv(ids);
  std::sort(live.begin(), live.end());
  std::unordered_map<std::uint64_t, std::size_t> pos;
  for (std::size_t i = 0; i < live.size(); ++i) {
    pos[live[i]] = i;
    top = std::max(top, live[i] + 1);
  }
  std::uint64_t next_new = rank.allreduce(top, rma::ReduceOp::max);
  next_new += (P - next_new % P) % P + me;
  std::mt19937_64 rng(draw(seed, 0xB0B, me));
  auto pick = [&] { return live[rng() % live.size()]; };
  auto forget = [&](std::uint64_t id) {
    auto it = pos.find(id);
    if (it == pos.end()) return;
    const auto at = it->second;
    live[at] = live.back();
    pos[live[at]] = at;
    live.pop_back();
    pos.erase(id);
  };

  const auto kinds = op_sequence(mix, seed, me, warmup + queries_per_rank);
  OltpResult res;
  res.mix = mix.name;
  res.warmup = warmup;
  std::uint64_t attempted = 0, failed = 0;
  std::array<std::uint64_t, kOpKinds> ka{}, kf{};
  std::array<Histogram, kOpKinds> kh;

  auto run_one = [&](OpKind kind) -> bool {
    if (live.empty() && kind != OpKind::add_vertex) return false;
    const bool write = static_cast<std::size_t>(kind) >= 3;
    auto t = db.start_transaction(write ? TxnMode::write : TxnMode::read);
    std::optional<std::uint64_t> added, removed;
    try {
      auto vertex = [&](std::uint64_t id) {
        return t.associate_vertex(t.translate_vertex_id(label_of(id), bulk_app_id(id)));
      };
      switch (kind) {
        case OpKind::get_properties: {
          auto v = vertex(pick());
          (void)v.all_properties();
          (void)v.labels();
          break;
        }
        case OpKind::count_edges: (void)vertex(pick()).degree(kAnyOrientation); break;
        case OpKind::get_edges: (void)vertex(pick()).edges(kAnyOrientation); break;
        case OpKind::add_vertex: {
          const auto id = next_new;
          next_new += P;
          auto v = t.create_vertex(bulk_app_id(id));
          v.add_label(gen_labels[0]);
          v.add_property(ctx.value_type, u64_value(rng()));
          added = id;
          break;
        }
        case OpKind::delete_vertex: {
          const auto id = pick();
          vertex(id).free();
          removed = id;
          break;
        }
        case OpKind::update_property:
          vertex(pick()).update_property(ctx.value_type, u64_value(rng()));
          break;
        case OpKind::add_edge: {
          const auto a = pick(), b = pick();
          auto va = vertex(a);
          auto vb = a == b ? va : vertex(b);
          t.create_edge(va, vb, true);
          break;
        }
      }
    } catch (const Error&) {
      t.abort();
      return false;
    }
    if (t.commit() != Outcome::committed) return false;
    if (added) {
      pos[*added] = live.size();
      live.push_back(*added);
    }
    if (removed) forget(*removed);
    return true;
  };

  rank.barrier();
  for (std::uint64_t i = 0; i < warmup; ++i) run_one(kinds[i]);
  rank.barrier();
  const auto start = Clock::now();
  for (std::uint64_t i = warmup; i < kinds.size(); ++i) {
    const auto t0 = Clock::now();
    const bool ok = run_one(kinds[i]);
    const auto d = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    const auto k = static_cast<std::size_t>(kinds[i]);
    ++attempted;
    ++ka[k];
    kh[k].add(d);
    if (!ok) {
      ++failed;
      ++kf[k];
    }
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();

  std::uint64_t seq_hash = 0;
  for (std::uint64_t i = warmup; i < kinds.size(); ++i) seq_hash = mix64(seq_hash ^ static_cast<std::uint64_t>(kinds[i]));
  std::vector<std::uint64_t> words = {attempted, failed, static_cast<std::uint64_t>(elapsed), seq_hash};
  words.insert(words.end(), ka.begin(), ka.end());
  words.insert(words.end(), kf.begin(), kf.end());
  for (const auto& h : kh) words.insert(words.end(), h.counts().begin(), h.counts().end());
  const auto all = rank.allgatherv(words);
  const auto stride = words.size();
  const auto buckets = kh[0].counts().size();
  res.per_rank.resize(P);
  for (std::uint32_t r = 0; r < P; ++r) {
    const auto* w = all.data() + r * stride;
    res.per_rank[r] = {w[0], w[1], static_cast<double>(w[2]) * 1e-9};
    res.attempted += w[0];
    res.failed += w[1];
    res.elapsed_s = std::max(res.elapsed_s, res.per_rank[r].elapsed_s);
    res.op_sequence_hash = mix64(res.op_sequence_hash ^ w[3]);
    for (std::size_t k = 0; k < kOpKinds; ++k) {
      res.kind_attempted[k] += w[4 + k];
      res.kind_failed[k] += w[4 + kOpKinds + k];
      const auto h = Histogram::from_words(std::span(w + 4 + 2 * kOpKinds + k * buckets, buckets));
      res.kind_latency[k].merge(h);
      res.latency.merge(h);
    }
  }
  return res;
}

LocalValues<std::uint64_t> run_bfs(Database& db, GlobalRef root) {
  const auto depth = bfs_levels(db, root, ~std::uint64_t{0});
  auto refs = db.local_vertices();
  std::sort(refs.begin(), refs.end());
  LocalValues<std::uint64_t> out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (depth[i] != ~std::uint64_t{0}) out.emplace_back(refs[i], depth[i]);
  }
  return out;
}

std::vector<GlobalRef> run_khop(Database& db, GlobalRef root, std::uint32_t k) {
  const auto depth = bfs_levels(db, root, k);
  auto refs = db.local_vertices();
  std::sort(refs.begin(), refs.end());
  std::vector<GlobalRef> out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (depth[i] <= k) out.push_back(refs[i]);
  }
  return out;
}

PageRankResult run_pagerank(Database& db, std::uint32_t iters, double damping) {
  auto& rank = db.rank();
  const auto P = db.ranks();
  auto t = db.start_collective_transaction(TxnMode::read);
  LocalGraph g(db, t);
  const auto n_local = g.refs.size();
  const auto N = static_cast<double>(rank.allreduce(n_local, rma::ReduceOp::sum));
  std::vector<double> pr(n_local, N > 0 ? 1.0 / N : 0.0);
  PageRankResult res;
  for (std::uint32_t it = 0; it < iters; ++it) {
    std::vector<std::vector<std::uint64_t>> out(P);
    double dangling = 0;
    for (std::size_t v = 0; v < n_local; ++v) {
      if (g.adj[v].empty()) {
        dangling += pr[v];
        continue;
      }
      const double share = pr[v] / static_cast<double>(g.adj[v].size());
      for (auto n : g.adj[v]) {
        out[n.rank()].push_back(n.bits());
        out[n.rank()].push_back(std::bit_cast<std::uint64_t>(share));
      }
    }
    const auto in = rank.alltoallv(out);
    const double dangling_total = rank.allreduce_sum(dangling);
    std::vector<double> acc(n_local, 0.0);
    for (std::size_t i = 0; i < in.size(); i += 2) acc[g.at(in[i])] += std::bit_cast<double>(in[i + 1]);
    double local_sum = 0;
    for (std::size_t v = 0; v < n_local; ++v) {
      pr[v] = (1.0 - damping) / N + damping * (acc[v] + dangling_total / N);
      local_sum += pr[v];
    }
    res.sums.push_back(rank.allreduce_sum(local_sum));
  }
  close_collective(t);
  for (std::size_t v = 0; v < n_local; ++v) res.scores.emplace_back(g.refs[v], pr[v]);
  return res;
}

LocalValues<std::uint64_t> run_wcc(Database& db) {
  auto& rank = db.rank();
  const auto P = db.ranks();
  auto t = db.start_collective_transaction(TxnMode::read);
  LocalGraph g(db, t);
  const auto n_local = g.refs.size();
  std::vector<std::uint64_t> label(n_local);
  std::vector<char> changed(n_local, 1);
  for (std::size_t v = 0; v < n_local; ++v) label[v] = g.refs[v].bits();
  while (true) {
    std::vector<std::vector<std::uint64_t>> out(P);
    for (std::size_t v = 0; v < n_local; ++v) {
      if (!changed[v]) continue;
      for (auto n : g.adj[v]) {
        out[n.rank()].push_back(n.bits());
        out[n.rank()].push_back(label[v]);
      }
    }
    const auto in = rank.alltoallv(out);
    std::fill(changed.begin(), changed.end(), 0);
    std::uint64_t updates = 0;
    for (std::size_t i = 0; i < in.size(); i += 2) {
      const auto v = g.at(in[i]);
      if (in[i + 1] < label[v]) {
        label[v] = in[i + 1];
        changed[v] = 1;
        ++updates;
      }
    }
    if (rank.allreduce(updates, rma::ReduceOp::sum) == 0) break;
  }
  close_collective(t);
  LocalValues<std::uint64_t> out;
  for (std::size_t v = 0; v < n_local; ++v) out.emplace_back(g.refs[v], label[v]);
  return out;
}

LocalValues<std::uint64_t> run_cdlp(Database& db, std::uint32_t iters) {
  auto& rank = db.rank();
  const auto P = db.ranks();
  auto t = db.start_collective_transaction(TxnMode::read);
  LocalGraph g(db, t);
  const auto n_local = g.refs.size();
  std::vector<std::uint64_t> label(n_local);
  for (std::size_t v = 0; v < n_local; ++v) label[v] = g.refs[v].bits();
  for (std::uint32_t it = 0; it < iters; ++it) {
    std::vector<std::vector<std::uint64_t>> out(P);
    for (std::size_t v = 0; v < n_local; ++v) {
      for (auto n : g.adj[v]) {
        out[n.rank()].push_back(n.bits());
        out[n.rank()].push_back(label[v]);
      }
    }
    const auto in = rank.alltoallv(out);
    std::vector<std::vector<std::uint64_t>> seen(n_local);
    for (std::size_t i = 0; i < in.size(); i += 2) seen[g.at(in[i])].push_back(in[i + 1]);
    for (std::size_t v = 0; v < n_local; ++v) {
      auto& s = seen[v];
      if (s.empty()) continue;
      std::sort(s.begin(), s.end());
      std::uint64_t best = s[0], best_count = 0;
      for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        if (j - i > best_count) {
          best_count = j - i;
          best = s[i];
        }
        i = j;
      }
      label[v] = best;
    }
  }
  close_collective(t);
  LocalValues<std::uint64_t> out;
  for (std::size_t v = 0; v < n_local; ++v) out.emplace_back(g.refs[v], label[v]);
  return out;
}

LocalValues<double> run_lcc(Database& db) {
  auto t = db.start_collective_transaction(TxnMode::read);
  LocalGraph g(db, t);
  auto simple = [](std::vector<GlobalRef> ns, GlobalRef self) {
    std::vector<std::uint64_t> out;
    out.reserve(ns.size());
    for (auto n : ns) {
      if (n != self) out.push_back(n.bits());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> cache;
  auto neighborhood = [&](std::uint64_t bits) -> const std::vector<std::uint64_t>& {
    auto it = cache.find(bits);
    if (it != cache.end()) return it->second;
    const auto ref = GlobalRef::from_bits(bits);
    auto local = g.index.find(bits);
    auto ns = local != g.index.end() ? g.adj[local->second] : t.associate_vertex(ref).neighbors(kAnyOrientation);
    return cache.emplace(bits, simple(std::move(ns), ref)).first->second;
  };
  LocalValues<double> out;
  for (std::size_t v = 0; v < g.refs.size(); ++v) {
    const auto nv = neighborhood(g.refs[v].bits());
    const auto d = static_cast<double>(nv.size());
    std::uint64_t twice = 0;
    for (auto u : nv) {
      const auto& nu = neighborhood(u);
      const auto& small = nu.size() < nv.size() ? nu : nv;
      const auto& large = nu.size() < nv.size() ? nv : nu;
      for (auto w : small) twice += std::binary_search(large.begin(), large.end(), w);
    }
    out.emplace_back(g.refs[v], nv.size() < 2 ? 0.0 : static_cast<double>(twice) / (d * (d - 1)));
  }
  close_collective(t);
  return out;
}

GcnModel GcnModel::identity(std::uint32_t dim) {
  GcnModel m;
  m.dim = dim;
  m.weight.assign(std::size_t{dim} * dim, 0.0);
  for (std::uint32_t i = 0; i < dim; ++i) m.weight[std::size_t{i} * dim + i] = 1.0;
  m.bias.assign(dim, 0.0);
  return m;
}

GcnModel GcnModel::random(std::uint32_t dim, std::uint64_t seed) {
  GcnModel m;
  m.dim = dim;
  for (std::size_t i = 0; i < std::size_t{dim} * dim; ++i) m.weight.push_back((unit(draw(seed, 21, i)) - 0.5) / dim);
  for (std::uint32_t i = 0; i < dim; ++i) m.bias.push_back((unit(draw(seed, 22, i)) - 0.5) * 0.1);
  return m;
}

std::vector<double> GcnModel::apply(const std::vector<double>& x) const {
  if (x.size() != dim) throw Error(Errc::invalid_argument, "feature dimension mismatch");
  std::vector<double> y(dim);
  for (std::uint32_t r = 0; r < dim; ++r) {
    double s = bias[r];
    for (std::uint32_t c = 0; c < dim; ++c) s += weight[std::size_t{r} * dim + c] * x[c];
    y[r] = s > 0 ? s : 0.0;
  }
  return y;
}

void init_features(Database& db, PropertyType feature, std::uint32_t dim, std::uint64_t seed) {
  auto t = db.start_collective_transaction(TxnMode::write);
  for (auto ref : db.local_vertices()) {
    auto v = t.associate_vertex(ref);
    const auto app = v.app_id();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (auto b : app) h = (h ^ static_cast<std::uint8_t>(b)) * 0x100000001B3ull;
    std::vector<double> x(dim);
    for (std::uint32_t i = 0; i < dim; ++i) x[i] = unit(draw(seed, h, i)) * 2.0 - 1.0;
    v.update_property(feature, x);
  }
  close_collective(t);
}

void run_gcn(Database& db, PropertyType feature, const GcnModel& model, std::uint32_t layers) {
  auto& rank = db.rank();
  for (std::uint32_t layer = 0; layer < layers; ++layer) {
    auto t = db.start_collective_transaction(TxnMode::write);
    std::unordered_map<std::uint64_t, std::vector<double>> cache;
    std::string problem;
    auto features = [&](GlobalRef ref) -> const std::vector<double>& {
      auto it = cache.find(ref.bits());
      if (it != cache.end()) return it->second;
      auto vals = t.associate_vertex(ref).properties(feature);
      if (vals.size() != 1) throw Error(Errc::not_found, "vertex " + ref.to_string() + " has no feature vector");
      auto x = std::get<std::vector<double>>(vals[0]);
      if (x.size() != model.dim) throw Error(Errc::invalid_argument, "feature dimension mismatch");
      return cache.emplace(ref.bits(), std::move(x)).first->second;
    };
    std::vector<std::pair<GlobalRef, std::vector<double>>> updates;
    Errc code = Errc::not_found;
    try {
      LocalGraph g(db, t);
      for (std::size_t v = 0; v < g.refs.size(); ++v) {
        auto x = features(g.refs[v]);
        for (auto n : g.adj[v]) {
          const auto& y = features(n);
          for (std::uint32_t i = 0; i < model.dim; ++i) x[i] += y[i];
        }
        updates.emplace_back(g.refs[v], model.apply(x));
      }
    } catch (const Error& e) {
      problem = e.what();
      code = e.code();
    }
    const std::uint64_t bad = problem.empty() ? 0 : 1;
    if (rank.allreduce(bad, rma::ReduceOp::max) != 0) {
      t.abort();
      throw Error(code, problem.empty() ? "another rank failed the layer" : problem);
    }
    for (auto& [ref, y] : updates) t.associate_vertex(ref).update_property(feature, y);
    close_collective(t);
  }
}

BiSchema bi_schema(Database& db) {
  auto label = [&](const char* name) {
    auto l = db.catalog().find_label(name);
    return l ? *l : db.create_label(name);
  };
  auto ptype = [&](const char* name, Datatype type, SizeKind size, std::uint32_t limit) {
    auto p = db.catalog().find_property_type(name);
    return p ? *p : db.create_property_type(name, EntityKind::single, type, size, limit);
  };
  BiSchema s;
  s.person = label("Person");
  s.car = label("Car");
  s.own = label("OWN");
  s.age = ptype("age", Datatype::u64, SizeKind::fixed, 1);
  s.color = ptype("color", Datatype::utf8, SizeKind::max, 16);
  bool found = false;
  for (std::uint32_t i = 0; i < db.index_count() && !found; ++i) {
    const auto& def = db.index(i);
    if (def.labels == std::vector<Label>{s.person} && def.ptypes.empty()) {
      s.person_index = i;
      found = true;
    }
  }
  if (!found) s.person_index = db.create_index({s.person}, {}, db.config().index_capacity);
  return s;
}

BulkReport bi_load(Database& db, const GenSpec& spec, const BiSchema& schema) {
  auto edges = kronecker_edges(db.rank(), spec);
  for (auto& e : edges) {
    if (bi_is_person(spec, e.u) && !bi_is_person(spec, e.v)) e.label = schema.own.id;
  }
  BulkOptions opt;
  opt.chunk = spec.chunk;
  opt.decorate = [&](std::uint64_t id, VertexHandle& v) {
    if (bi_is_person(spec, id)) {
      v.add_label(schema.person);
      v.add_property(schema.age, u64_value(draw(spec.seed, 12, id) % 80));
    } else {
      v.add_label(schema.car);
      v.add_property(schema.color, utf8_value(kColors[draw(spec.seed, 13, id) % 4]));
    }
  };
  return bulk_load(db, spec.vertices(), edges, opt);
}

std::uint64_t run_bi_query(Database& db, const BiSchema& schema) {
  std::uint64_t local_count = 0;
  auto t = db.start_collective_transaction(TxnMode::read);
  Constraint owns;
  owns.add(Subconstraint().has(schema.own));
  for (auto person : t.local_vertices_of_index(schema.person_index)) {
    auto v = t.associate_vertex(person);
    const auto age = v.properties(schema.age);
    if (age.empty() || as_u64(age[0]) <= 30) continue;
    for (auto object : v.neighbors(Orientation::kOutgoing, &owns)) {
      auto o = t.associate_vertex(object);
      if (!o.has_label(schema.car)) continue;
      const auto color = o.properties(schema.color);
      if (!color.empty() && std::get<std::string>(color[0]) == "red") ++local_count;
    }
  }
  close_collective(t);
  return db.rank().allreduce(local_count, rma::ReduceOp::sum);
}

GlobalRef ref_of(Database& db, const GraphContext& ctx, std::uint64_t id) {
  const auto owner = bulk_owner(id, db.ranks());
  std::uint64_t bits = 0;
  if (db.rank_id() == owner) bits = ctx.owned.at(id / db.ranks()).bits();
  return GlobalRef::from_bits(db.rank().broadcast(bits, owner));
}

template <typename T>
LocalValues<T> gather(Database& db, const LocalValues<T>& local) {
  std::vector<std::uint64_t> words;
  for (const auto& [r, v] : local) {
    words.push_back(r.bits());
    words.push_back(to_word(v));
  }
  const auto all = db.rank().allgatherv(words);
  LocalValues<T> out;
  for (std::size_t i = 0; i < all.size(); i += 2) out.emplace_back(GlobalRef::from_bits(all[i]), from_word<T>(all[i + 1]));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

template LocalValues<std::uint64_t> gather(Database&, const LocalValues<std::uint64_t>&);
template LocalValues<double> gather(Database&, const LocalValues<double>&);

nlohmann::ordered_json make_report(const std::string& workload, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json r;
  r["schema_version"] = 1;
  r["tool"] = "gdi-bench";
  r["workload"] = workload;
  r["config"] = config;
  r["protocol"] =
      "each rank runs warmup operations followed by the measured operations; every operation is one local "
      "transaction; failed transactions are counted and not retried; the simulated operation delay applies to the "
      "measured phase only";
  return r;
}

namespace {

void flatten(const nlohmann::ordered_json& j, const std::string& path, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    std::string value = j.is_string() ? j.get<std::string>() : j.dump();
    if (value.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : value) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      value = quoted + "\"";
    }
    out << path << ',' << value << '\n';
  }
}

bool type_matches(const nlohmann::json& j, const std::string& type) {
  if (type == "object") return j.is_object();
  if (type == "array") return j.is_array();
  if (type == "string") return j.is_string();
  if (type == "integer") return j.is_number_integer();
  if (type == "number") return j.is_number();
  if (type == "boolean") return j.is_boolean();
  if (type == "null") return j.is_null();
  return false;
}

void check(const nlohmann::json& j, const nlohmann::json& s, const std::string& path, std::vector<std::string>& errs) {
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || type_matches(j, t.get<std::string>());
    } else {
      ok = type_matches(j, s["type"].get<std::string>());
    }
    if (!ok) {
      errs.push_back(path + ": expected type " + s["type"].dump());
      return;
    }
  }
  if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), j) == s["enum"].end()) {
    errs.push_back(path + ": value " + j.dump() + " not allowed");
  }
  if (j.is_number()) {
    if (s.contains("minimum") && j.get<double>() < s["minimum"].get<double>()) errs.push_back(path + ": below minimum");
    if (s.contains("maximum") && j.get<double>() > s["maximum"].get<double>()) errs.push_back(path + ": above maximum");
  }
  if (j.is_object()) {
    for (const auto& r : s.value("required", nlohmann::json::array())) {
      if (!j.contains(r.get<std::string>())) errs.push_back(path + ": missing '" + r.get<std::string>() + "'");
    }
    const auto props = s.value("properties", nlohmann::json::object());
    for (const auto& [k, v] : j.items()) {
      if (props.contains(k)) {
        check(v, props[k], path + "." + k, errs);
      } else if (s.contains("additionalProperties")) {
        const auto& extra = s["additionalProperties"];
        if (extra.is_boolean() && !extra.get<bool>()) {
          errs.push_back(path + ": unexpected '" + k + "'");
        } else if (extra.is_object()) {
          check(v, extra, path + "." + k, errs);
        }
      }
    }
  }
  if (j.is_array()) {
    if (s.contains("minItems") && j.size() < s["minItems"].get<std::size_t>()) errs.push_back(path + ": too few items");
    if (s.contains("items")) {
      for (std::size_t i = 0; i < j.size(); ++i) check(j[i], s["items"], path + "[" + std::to_string(i) + "]", errs);
    }
  }
}

}  // namespace

std::string report_to_csv(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out << "field,value\n";
  flatten(report, "", out);
  return out.str();
}

std::vector<std::string> validate_report(const nlohmann::json& report, const nlohmann::json& schema) {
  std::vector<std::string> errs;
  check(report, schema, "$", errs);
  return errs;
}

}  // namespace gdi::bench
