// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gdi/bench.hpp"
#include "gdi/block_pool.hpp"
#include "gdi/dht.hpp"
#include "gdi/error.hpp"
#include "oracles.hpp"
#include "txn_oracle.hpp"

using namespace gdi;
using namespace gdi::bench;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool ok = true;
  std::vector<std::string> notes;
  std::mutex m;

  void expect(bool cond, const std::string& what) {
    std::lock_guard lock(m);
    if (!cond) {
      ok = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& what) {
    std::lock_guard lock(m);
    notes.push_back(what);
  }
};

template <typename... Args>
std::string str(const Args&... args) {
  std::ostringstream s;
  (s << ... << args);
  return s.str();
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

DatabaseConfig db_config(std::uint32_t blocks, std::uint32_t index_capacity = 1u << 15) {
  DatabaseConfig c;
  c.block_size = 512;
  c.blocks_per_rank = blocks;
  c.index_capacity = index_capacity;
  return c;
}

void dht_oracle(Verdict& out) {
  const auto t0 = Clock::now();
  rma::World world(1);
  world.run([&](rma::Rank& r) {
    auto t = DhtTable::create(r, DhtConfig{4096, 1u << 15});
    std::unordered_map<std::uint64_t, std::uint64_t> oracle;
    std::mt19937_64 rng(2024);
    std::uint64_t mismatches = 0;
    for (int i = 0; i < 100000; ++i) {
      const auto key = rng() % 20000;
      switch (rng() % 3) {
        case 0: {
          const auto val = rng();
          if (t.insert_unique(key, val) != oracle.emplace(key, val).second) ++mismatches;
          break;
        }
        case 1: {
          const auto got = t.lookup(key);
          const auto it = oracle.find(key);
          if (got.has_value() != (it != oracle.end()) || (got && *got != it->second)) ++mismatches;
          break;
        }
        default:
          if (t.erase(key) != (oracle.erase(key) == 1)) ++mismatches;
      }
    }
    std::uint64_t final_mismatches = 0;
    for (std::uint64_t key = 0; key < 20000; ++key) {
      const auto got = t.lookup(key);
      const auto it = oracle.find(key);
      if (got.has_value() != (it != oracle.end()) || (got && *got != it->second)) ++final_mismatches;
    }
    out.expect(mismatches == 0, str(mismatches, " operation mismatches"));
    out.expect(final_mismatches == 0, str(final_mismatches, " final-state mismatches"));
    out.expect(t.audit_local(0).reachable == oracle.size(), "live entry count equals the map size");
    out.note(str("10^5 ops, ", oracle.size(), " live keys"));
  });
  const auto elapsed = since(t0);
  out.expect(elapsed < 10, str("runtime ", elapsed, " s under 10 s"));
}

void dht_concurrency(Verdict& out) {
  std::atomic<std::uint64_t> lost{0}, phantom{0}, count_errors{0};
  rma::World world(8);
  world.run([&](rma::Rank& r) {
    auto t = DhtTable::create(r, DhtConfig{4096, 1u << 15});
    const std::uint64_t base = std::uint64_t{r.id() + 1} << 40;
    std::mt19937_64 rng(r.id() + 100);
    std::map<std::uint64_t, std::uint64_t> mine;
    std::uint64_t inserts = 0, deletes = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto key = base + rng() % 4000;
      switch (rng() % 3) {
        case 0: {
          const bool ok = t.insert_unique(key, key * 3);
          if (ok != mine.emplace(key, key * 3).second) ++count_errors;
          inserts += ok;
          break;
        }
        case 1: {
          const bool ok = t.erase(key);
          if (ok != (mine.erase(key) == 1)) ++count_errors;
          deletes += ok;
          break;
        }
        default: {
          const auto v = t.lookup(key);
          if (v.has_value() != (mine.count(key) == 1)) ++count_errors;
        }
      }
    }
    r.barrier();
    for (std::uint64_t k = base; k < base + 4000; ++k) {
      const auto v = t.lookup(k);
      const bool expected = mine.count(k) == 1;
      if (expected && (!v || *v != k * 3)) ++lost;
      if (!expected && v) ++phantom;
    }
    const auto live = r.allreduce(t.audit_local(r.id()).reachable, rma::ReduceOp::sum);
    const auto net = r.allreduce(inserts - deletes, rma::ReduceOp::sum);
    if (r.id() == 0) {
      out.expect(live == net, str("live count ", live, " equals inserts minus deletes ", net));
      out.note(str("8 ranks x 10^4 ops, live ", live));
    }
  });
  out.expect(lost == 0, str(lost.load(), " lost entries"));
  out.expect(phantom == 0, str(phantom.load(), " phantom entries"));
  out.expect(count_errors == 0, str(count_errors.load(), " operation results disagree with the per-rank oracle"));

  constexpr std::uint64_t kKeys = 4000;
  std::vector<std::atomic<int>> wins(kKeys);
  world.run([&](rma::Rank& r) {
    auto t = DhtTable::create(r, DhtConfig{512, 2048});
    for (std::uint64_t k = r.id(); k < kKeys; k += 8) t.insert(k, k);
    r.barrier();
    for (std::uint64_t i = 0; i < kKeys; ++i) {
      const auto k = (i * 13 + r.id() * 499) % kKeys;
      if (t.erase(k)) ++wins[k];
    }
  });
  int bad = 0;
  for (auto& w : wins) bad += w.load() != 1;
  out.expect(bad == 0, str(bad, " shared keys without exactly one delete winner"));
}

void block_store(Verdict& out) {
  constexpr std::uint32_t kBlocks = 8192;
  std::mutex mu;
  std::vector<GlobalRef> all;
  rma::World world(8);
  world.run([&](rma::Rank& r) {
    BlockPoolConfig c;
    c.block_size = 64;
    c.blocks_per_rank = kBlocks;
    auto pool = BlockPool::create(r, c);
    std::vector<GlobalRef> mine;
    for (;;) {
      const auto b = pool.acquire(0);
      if (b.is_null()) break;
      mine.push_back(b);
    }
    out.expect(pool.acquire(0).is_null(), "exhausted pool returns the null ref");
    {
      std::lock_guard lock(mu);
      all.insert(all.end(), mine.begin(), mine.end());
    }
    r.barrier();
    if (r.id() == 0) {
      const std::set<GlobalRef> unique(all.begin(), all.end());
      out.expect(all.size() == kBlocks, str(all.size(), " grants for ", kBlocks, " blocks"));
      out.expect(unique.size() == all.size(), str(all.size() - unique.size(), " duplicate grants"));
    }
    r.barrier();
    for (auto b : mine) pool.release(b);
    r.barrier();
    if (r.id() == 0) out.expect(pool.free_count(0) == kBlocks, "free count equals capacity after release");
  });
  rma::World single(1);
  single.run([&](rma::Rank& r) {
    BlockPoolConfig c;
    c.block_size = 64;
    c.blocks_per_rank = 8;
    auto pool = BlockPool::create(r, c);
    const auto stale = pool.head(0);
    for (int i = 0; i < 2; ++i) pool.release(pool.acquire(0));
    out.expect(pool.head(0).index == stale.index, "head index recurs after two cycles");
    out.expect(!pool.try_acquire_from(0, stale).has_value(), "stale-head CAS is rejected");
    out.expect(pool.free_count(0) == 8, "stale CAS leaves the free list intact");
  });
  out.note(str("8 ranks, ", kBlocks, " blocks"));
}

void serializability(Verdict& out) {
  int contended = 0, rounds = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto r = txn_oracle::run_round(seed, std::chrono::microseconds(20 + 10 * seed));
    ++rounds;
    contended += r.failures[0] + r.failures[1];
    out.expect(r.audits_ok, str("audit after round ", seed));
    out.expect(txn_oracle::serializable(r.init, r.committed[0], r.committed[1], r.final),
               str("round ", seed, " final state matches a serial order"));
  }
  out.expect(contended > 0, "some transactions conflicted");
  out.note(str(rounds, " rounds of 2 x 20 transactions, ", contended, " aborted by conflicts"));

  int audited = 0;
  for (const char* w : {"rm", "ri", "wi", "lb", "bfs", "khop", "pr", "wcc", "cdlp", "lcc", "gcn", "bi", "bulk"}) {
    RunOptions o;
    o.workload = w;
    o.ranks = 4;
    o.spec.scale = 9;
    o.spec.edge_factor = 8;
    o.queries = 300;
    o.roots = 2;
    o.audit = true;
    const auto res = run_benchmark(o);
    out.expect(res.audit_ok, str("audit after ", w, ": ", res.report["audit"]["violations"].dump()));
    ++audited;
  }
  out.note(str(audited, " benchmark runs audited"));
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Order-independent digest of every vertex's app id, labels, properties and degree.
std::uint64_t content_digest(std::uint32_t ranks, const GenSpec& spec, GenReport* report) {
  std::uint64_t digest = 0;
  rma::World world(ranks);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, db_config(1u << 16, 1u << 15));
    const auto rep = generate(*db, spec);
    std::uint64_t local = 0;
    auto t = db->start_collective_transaction(TxnMode::read);
    for (auto r : db->local_vertices()) {
      auto v = t.associate_vertex(r);
      std::uint64_t h = 0;
      for (auto b : v.app_id()) h = mix64(h ^ static_cast<std::uint8_t>(b));
      for (auto l : v.labels()) h = mix64(h ^ std::hash<std::string>{}(db->catalog().info(l).name));
      for (const auto& [p, val] : v.all_properties()) {
        h = mix64(h ^ p.id);
        for (auto b : encode(val)) h = mix64(h ^ static_cast<std::uint8_t>(b));
      }
      h = mix64(h ^ v.degree(kOutgoing));
      h = mix64(h ^ (v.degree(kIncoming) << 20));
      local += h;
    }
    t.commit();
    const auto sum = rank.allreduce(local, rma::ReduceOp::sum);
    if (rank.id() == 0) {
      digest = sum;
      if (report) *report = rep;
    }
  });
  return digest;
}

void generator(Verdict& out) {
  GenSpec spec;
  spec.scale = 14;
  spec.edge_factor = 16;
  spec.seed = 1;

  std::map<std::uint32_t, std::vector<std::pair<std::uint64_t, std::uint64_t>>> edges;
  for (std::uint32_t p : {1u, 2u, 4u, 8u}) {
    std::mutex m;
    auto& list = edges[p];
    rma::World world(p);
    world.run([&](rma::Rank& rank) {
      const auto local = kronecker_edges(rank, spec);
      std::lock_guard lock(m);
      for (const auto& e : local) list.emplace_back(e.u, e.v);
    });
    std::sort(list.begin(), list.end());
  }
  for (std::uint32_t p : {2u, 4u, 8u}) out.expect(edges[p] == edges[1], str("edge set at P=", p, " equals P=1"));

  const auto& list = edges[1];
  const double target = 262144;
  out.expect(std::abs(static_cast<double>(list.size()) - target) <= 0.02 * target,
             str(list.size(), " edges within 2% of 262144"));
  std::vector<std::uint64_t> degree(spec.vertices());
  for (auto [u, v] : list) {
    ++degree[u];
    ++degree[v];
  }
  const double mean = 2.0 * static_cast<double>(list.size()) / static_cast<double>(spec.vertices());
  const auto max_degree = *std::max_element(degree.begin(), degree.end());
  out.expect(static_cast<double>(max_degree) >= 20 * mean, str("max degree ", max_degree, " >= 20 x mean ", mean));

  std::map<std::uint32_t, std::uint64_t> digests;
  for (std::uint32_t p : {1u, 2u, 4u, 8u}) {
    GenReport rep;
    digests[p] = content_digest(p, spec, &rep);
    out.expect(rep.n == 16384, str("P=", p, " vertex count ", rep.n));
    out.expect(rep.m == list.size(), str("P=", p, " edge count ", rep.m));
    const auto [lo, hi] = std::minmax_element(rep.vertices_per_rank.begin(), rep.vertices_per_rank.end());
    out.expect(*hi - *lo <= 1, str("P=", p, " per-rank vertex counts differ by ", *hi - *lo));
  }
  for (std::uint32_t p : {2u, 4u, 8u}) {
    out.expect(digests[p] == digests[1], str("labels, properties and degrees at P=", p, " equal P=1"));
  }
  out.note(str("n=16384 m=", list.size(), " max degree ", max_degree, " mean ", mean));
}

void olap(Verdict& out) {
  const auto t0 = Clock::now();
  for (std::uint32_t scale : {12u, 14u}) {
    GenSpec spec;
    spec.scale = scale;
    spec.edge_factor = 16;
    spec.seed = 7;
    spec.ptypes = 0;
    rma::World world(4);
    world.run([&](rma::Rank& rank) {
      auto db = Database::create(rank, db_config(scale == 12 ? 1u << 15 : 1u << 16));
      auto ctx = prepare_graph(*db, spec);
      const auto s = oracle::snapshot(*db);
      std::mt19937_64 rng(scale);
      for (int i = 0; i < 10; ++i) {
        const auto id = rng() % spec.vertices();
        const auto root = ref_of(*db, ctx, id);
        const auto want = oracle::bfs(s, root.bits());
        std::map<std::uint64_t, std::uint64_t> got;
        for (const auto& [r, d] : gather(*db, run_bfs(*db, root))) got[r.bits()] = d;
        out.expect(got == want, str("scale ", scale, " BFS from ", id));
        const auto hop = run_khop(*db, root, 2);
        const auto hops = rank.allreduce(hop.size(), rma::ReduceOp::sum);
        out.expect(hops == oracle::bfs(s, root.bits(), 2).size(), str("scale ", scale, " 2-hop from ", id));
      }
      std::map<std::uint64_t, std::uint64_t> comp;
      for (const auto& [r, c] : gather(*db, run_wcc(*db))) comp[r.bits()] = c;
      out.expect(comp == oracle::wcc(s), str("scale ", scale, " WCC"));
      std::map<std::uint64_t, std::uint64_t> labels;
      for (const auto& [r, c] : gather(*db, run_cdlp(*db, 10))) labels[r.bits()] = c;
      out.expect(labels == oracle::cdlp(s, 10), str("scale ", scale, " CDLP"));
      const auto want_lcc = oracle::lcc(s);
      std::uint64_t lcc_bad = 0;
      for (const auto& [r, x] : gather(*db, run_lcc(*db))) lcc_bad += std::abs(x - want_lcc.at(r.bits())) > 1e-12;
      out.expect(lcc_bad == 0, str("scale ", scale, " LCC, ", lcc_bad, " mismatches"));
      const auto pr = run_pagerank(*db, 20);
      const auto want_pr = oracle::pagerank(s, 20, 0.85);
      double l1 = 0;
      for (const auto& [r, x] : gather(*db, pr.scores)) l1 += std::abs(x - want_pr.at(r.bits()));
      out.expect(l1 < 1e-8, str("scale ", scale, " PageRank L1 ", l1));
      if (rank.id() == 0) out.note(str("scale ", scale, ": PR L1 ", l1));
    });
    world.run([&](rma::Rank& rank) {
      auto db = Database::create(rank, db_config(scale == 12 ? 1u << 15 : 1u << 16));
      const auto schema = bi_schema(*db);
      bi_load(*db, spec, schema);
      const auto want = oracle::bi_full_scan(*db, schema);
      const auto got = run_bi_query(*db, schema);
      out.expect(got == want, str("scale ", scale, " BI count ", got, " vs scan ", want));
    });
  }

  rma::World world(3);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, db_config(512));
    std::vector<GlobalRef> owned;
    BulkOptions opt;
    opt.directed = false;
    const std::vector<BulkEdge> path = {{0, 1}, {1, 2}};
    bulk_load(*db, 3, rank.id() == 0 ? path : std::vector<BulkEdge>{}, opt, &owned);
    const auto feat = db->create_property_type("feat", EntityKind::single, Datatype::f64, SizeKind::fixed, 2);
    const std::vector<std::vector<double>> h = {{1, 0}, {0, 1}, {1, 1}};
    auto t = db->start_collective_transaction(TxnMode::write);
    for (std::size_t k = 0; k < owned.size(); ++k) t.associate_vertex(owned[k]).add_property(feat, h[rank.id() + k * 3]);
    t.commit();
    GcnModel m;
    m.dim = 2;
    m.weight = {1, -1, 0, 2};
    m.bias = {0.5, -1};
    run_gcn(*db, feat, m, 1);
    // Sums (1,1) (2,2) (1,2) mapped through W and b, then clamped.
    const std::vector<std::vector<double>> want = {{0.5, 1}, {0.5, 3}, {0, 3}};
    const auto got = oracle::features(*db, feat, 2);
    GraphContext ctx;
    ctx.owned = owned;
    for (std::uint64_t i = 0; i < 3; ++i) {
      out.expect(got.at(ref_of(*db, ctx, i).bits()) == want[i], str("GCN 3-vertex path, vertex ", i));
    }
  });
  world.run([&](rma::Rank& rank) {
    GenSpec spec;
    spec.scale = 8;
    spec.edge_factor = 8;
    spec.ptypes = 0;
    const std::uint32_t dim = 8;
    auto db = Database::create(rank, db_config(1u << 13));
    prepare_graph(*db, spec);
    const auto feat = db->create_property_type("feat", EntityKind::single, Datatype::f64, SizeKind::fixed, dim);
    init_features(*db, feat, dim, 3);
    const auto s = oracle::snapshot(*db);
    auto h = oracle::features(*db, feat, dim);
    const auto model = GcnModel::random(dim, 8);
    run_gcn(*db, feat, model, 3);
    for (int layer = 0; layer < 3; ++layer) {
      std::map<std::uint64_t, std::vector<double>> next;
      for (auto v : s.vertices) {
        std::vector<double> x = h.at(v);
        for (auto n : s.adj.at(v)) {
          for (std::uint32_t i = 0; i < dim; ++i) x[i] += h.at(n)[i];
        }
        std::vector<double> y(dim);
        for (std::uint32_t r = 0; r < dim; ++r) {
          double acc = model.bias[r];
          for (std::uint32_t c = 0; c < dim; ++c) acc += model.weight[r * dim + c] * x[c];
          y[r] = std::max(acc, 0.0);
        }
        next[v] = y;
      }
      h = std::move(next);
    }
    const auto got = oracle::features(*db, feat, dim);
    double worst = 0;
    for (const auto& [v, y] : h) {
      for (std::uint32_t i = 0; i < dim; ++i) {
        worst = std::max(worst, std::abs(got.at(v)[i] - y[i]) / std::max(1.0, std::abs(y[i])));
      }
    }
    out.expect(worst < 1e-9, str("GCN scale 8 dense reference, worst relative error ", worst));
  });
  const auto elapsed = since(t0);
  out.expect(elapsed < 300, str("combined runtime ", elapsed, " s under 5 min"));
}

void mix_fidelity(Verdict& out) {
  for (const auto& mix : OltpMix::standard()) {
    std::array<std::uint64_t, kOpKinds> seen{};
    for (auto k : op_sequence(mix, 99, 0, 100000)) ++seen[static_cast<std::size_t>(k)];
    double worst = 0, chi2 = 0;
    for (std::size_t k = 0; k < kOpKinds; ++k) {
      const double p = mix.probability(static_cast<OpKind>(k));
      worst = std::max(worst, std::abs(static_cast<double>(seen[k]) / 1e5 - p));
      if (p > 0) chi2 += std::pow(static_cast<double>(seen[k]) - p * 1e5, 2) / (p * 1e5);
    }
    out.expect(worst <= 0.005, str(mix.name, " worst deviation ", worst));
    out.expect(chi2 < 22.46, str(mix.name, " chi-square ", chi2));
    out.note(str(mix.name, " max dev ", worst));
  }
}

void conflicts(Verdict& out) {
  GenSpec spec;
  spec.scale = 14;
  spec.edge_factor = 16;
  spec.seed = 5;
  RunOptions o;
  o.ranks = 4;
  o.spec = spec;
  o.queries = 2000;
  o.workload = "lb";
  rma::World world(4);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, db_config(default_blocks_per_rank(o), 1u << 15));
    auto ctx = prepare_graph(*db, spec);
    const auto lb = run_oltp(*db, ctx, OltpMix::by_name("LB"), o.queries, 17);
    const auto reads = run_oltp(*db, ctx, {"reads", {290, 117, 593, 0, 0, 0, 0}}, o.queries, 18);
    const auto audit = db->audit();
    if (rank.id() == 0) {
      out.expect(lb.failed_fraction() <= 0.05, str("LB failed fraction ", lb.failed_fraction()));
      out.expect(reads.failed == 0, str("read-only mix failures ", reads.failed));
      out.note(str("LB ", lb.failed, "/", lb.attempted, " failed"));
    }
    out.expect(audit.ok(), "audit after the runs");
  });
}

void scaling(Verdict& out) {
  std::map<std::uint32_t, double> qps;
  for (std::uint32_t p : {1u, 2u, 4u, 8u}) {
    RunOptions o;
    o.workload = "rm";
    o.ranks = p;
    o.spec.scale = 12 + static_cast<std::uint32_t>(std::log2(p));
    o.queries = 200;
    o.warmup = 20;
    o.op_delay = std::chrono::microseconds(50);
    o.audit = true;
    const auto res = run_benchmark(o);
    const auto errors = validate_report(nlohmann::json::parse(res.report.dump()), report_schema());
    out.expect(errors.empty(), str("P=", p, " report is schema-valid", errors.empty() ? "" : ": " + errors[0]));
    out.expect(res.audit_ok, str("P=", p, " audit"));
    qps[p] = res.report["results"]["throughput_qps"].get<double>();
  }
  out.expect(qps[8] > qps[1], str("RM throughput P=8 ", qps[8], " > P=1 ", qps[1]));
  out.note(str("RM qps P=1 ", std::lround(qps[1]), ", P=2 ", std::lround(qps[2]), ", P=4 ", std::lround(qps[4]),
               ", P=8 ", std::lround(qps[8])));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"DHT matches a map oracle", dht_oracle},
      {"DHT under concurrency", dht_concurrency},
      {"block store grants and ABA guard", block_store},
      {"serializability and audits", serializability},
      {"generator", generator},
      {"OLAP oracle equivalence", olap},
      {"OLTP mix fidelity", mix_fidelity},
      {"conflict behavior", conflicts},
      {"scaling smoke", scaling},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict out;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.ok = false;
      out.notes.push_back(std::string("exception: ") + e.what());
    }
    failed += !out.ok;
    std::printf("criterion %zu: %s  %s (%.1f s)\n", i + 1, out.ok ? "PASS" : "FAIL", criteria[i].first, since(t0));
    for (const auto& n : out.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
