#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <random>
#include <set>

#include "gdi/bench.hpp"
#include "gdi/error.hpp"

namespace gdi::bench {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<std::string> kWorkloads = {"rm", "ri", "wi", "lb", "bfs", "khop", "pr",
                                             "wcc", "cdlp", "lcc", "gcn", "bi", "bulk"};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t local_vertex_count(const RunOptions& o) {
  const auto n = o.spec.vertices();
  return (n + o.ranks - 1) / o.ranks;
}

std::uint32_t default_index_capacity(const RunOptions& o) {
  const auto need = 2 * (local_vertex_count(o) + o.queries + o.warmup);
  return static_cast<std::uint32_t>(std::bit_ceil(std::max<std::uint64_t>(need, 4096)));
}

nlohmann::ordered_json config_json(const RunOptions& o, const DatabaseConfig& cfg) {
  nlohmann::ordered_json c;
  c["ranks"] = o.ranks;
  c["scale"] = o.spec.scale;
  c["edge_factor"] = o.spec.edge_factor;
  c["labels"] = o.spec.labels;
  c["ptypes"] = o.spec.ptypes;
  c["seed"] = o.spec.seed;
  c["block_size"] = cfg.block_size;
  c["blocks_per_rank"] = cfg.blocks_per_rank;
  c["index_capacity"] = cfg.index_capacity;
  c["queries_per_rank"] = o.queries;
  c["warmup_per_rank"] = o.warmup;
  c["op_delay_ns"] = o.op_delay.count();
  c["k"] = o.k;
  c["roots"] = o.roots;
  c["iters"] = o.iters;
  c["layers"] = o.layers;
  c["dim"] = o.dim;
  if (!o.edge_file.empty()) c["edge_file"] = o.edge_file;
  c["generator"] = o.spec.to_json();
  return c;
}

std::vector<std::uint64_t> pick_roots(const RunOptions& o) {
  std::mt19937_64 rng(o.spec.seed);
  std::uniform_int_distribution<std::uint64_t> dist(0, o.spec.vertices() - 1);
  std::vector<std::uint64_t> roots;
  for (std::uint32_t i = 0; i < o.roots; ++i) roots.push_back(dist(rng));
  return roots;
}

nlohmann::ordered_json run_traversal(Database& db, const GraphContext& ctx, const RunOptions& o, bool khop) {
  auto& rank = db.rank();
  nlohmann::ordered_json roots = nlohmann::ordered_json::array();
  double total = 0;
  for (auto id : pick_roots(o)) {
    const auto root = ref_of(db, ctx, id);
    rank.barrier();
    const auto t0 = Clock::now();
    std::uint64_t reached = 0, max_depth = 0;
    if (khop) {
      reached = run_khop(db, root, o.k).size();
    } else {
      const auto depth = run_bfs(db, root);
      reached = depth.size();
      for (const auto& [r, d] : depth) max_depth = std::max(max_depth, d);
    }
    const auto elapsed = seconds_since(t0);
    total += elapsed;
    nlohmann::ordered_json entry = {{"id", id}, {"reached", rank.allreduce(reached, rma::ReduceOp::sum)}};
    if (!khop) entry["max_depth"] = rank.allreduce(max_depth, rma::ReduceOp::max);
    entry["elapsed_s"] = elapsed;
    roots.push_back(entry);
  }
  nlohmann::ordered_json r;
  r["root_selection"] = "uniform random vertex ids drawn from the seed";
  if (khop) r["k"] = o.k;
  r["roots"] = roots;
  r["elapsed_s"] = total;
  return r;
}

template <typename T>
std::uint64_t distinct_values(Database& db, const LocalValues<T>& local) {
  std::set<T> seen;
  for (const auto& [r, v] : gather(db, local)) seen.insert(v);
  return seen.size();
}

}  // namespace

std::uint32_t default_blocks_per_rank(const RunOptions& o) {
  const double B = o.block_size;
  const double n_local = static_cast<double>(local_vertex_count(o));
  const double halves = 2.0 * static_cast<double>(o.spec.target_edges()) / o.ranks;
  double vertex_bytes = kHeaderBytes + 24 + 16 + 20.0 * o.spec.ptypes;
  if (o.workload == "gcn") vertex_bytes += 8.0 * o.dim + 16;
  const double blocks = n_local * (1.0 + vertex_bytes / B) + halves * kLightEdgeBytes / B;
  const double extra = 4.0 * static_cast<double>(o.queries + o.warmup) + 1024;
  return static_cast<std::uint32_t>(std::ceil(1.5 * blocks + extra));
}

RunOutcome run_benchmark(const RunOptions& o) {
  if (std::find(kWorkloads.begin(), kWorkloads.end(), o.workload) == kWorkloads.end()) {
    throw Error(Errc::invalid_argument, "unknown workload '" + o.workload + "'");
  }
  if (o.ranks == 0) throw Error(Errc::invalid_argument, "at least one rank is required");
  o.spec.validate();

  DatabaseConfig cfg;
  cfg.block_size = o.block_size;
  cfg.blocks_per_rank = o.blocks_per_rank ? o.blocks_per_rank : default_blocks_per_rank(o);
  cfg.index_capacity = o.index_capacity ? o.index_capacity : default_index_capacity(o);

  RunOutcome out;
  out.report = make_report(o.workload, config_json(o, cfg));
  std::mutex m;
  rma::World world(o.ranks);
  auto delay = [&](rma::Rank& rank, std::chrono::nanoseconds d) {
    rank.barrier();
    if (rank.id() == 0) world.set_op_delay(d);
    rank.barrier();
  };
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, cfg);
    nlohmann::ordered_json generation, results;
    auto t0 = Clock::now();

    if (o.workload == "bulk") {
      std::vector<BulkEdge> edges;
      std::uint64_t n = o.spec.vertices();
      if (o.edge_file.empty()) {
        edges = kronecker_edges(rank, o.spec);
      } else {
        edges = read_edge_list(*db, o.edge_file, &n);
      }
      delay(rank, o.op_delay);
      t0 = Clock::now();
      const auto rep = bulk_load(*db, n, edges);
      const auto elapsed = seconds_since(t0);
      results["vertices"] = rep.vertices;
      results["edges"] = rep.edges;
      results["vertices_per_rank"] = rep.vertices_per_rank;
      results["half_edges_per_rank"] = rep.edges_per_rank;
      results["elapsed_s"] = elapsed;
      results["edges_per_s"] = elapsed > 0 ? static_cast<double>(rep.edges) / elapsed : 0.0;
    } else if (o.workload == "bi") {
      const auto schema = bi_schema(*db);
      const auto rep = bi_load(*db, o.spec, schema);
      generation = {{"n", rep.vertices},
                    {"m", rep.edges},
                    {"vertices_per_rank", rep.vertices_per_rank},
                    {"edges_per_rank", rep.edges_per_rank},
                    {"elapsed_s", seconds_since(t0)}};
      delay(rank, o.op_delay);
      t0 = Clock::now();
      const auto count = run_bi_query(*db, schema);
      results["count"] = count;
      results["elapsed_s"] = seconds_since(t0);
    } else {
      auto ctx = prepare_graph(*db, o.spec);
      generation = ctx.gen.to_json();
      generation["elapsed_s"] = seconds_since(t0);
      if (o.workload == "gcn") {
        const auto feature =
            db->create_property_type("gcn_feature", EntityKind::single, Datatype::f64, SizeKind::fixed, o.dim);
        init_features(*db, feature, o.dim, o.spec.seed);
      }
      delay(rank, o.op_delay);
      t0 = Clock::now();
      const auto& w = o.workload;
      if (w == "rm" || w == "ri" || w == "wi" || w == "lb") {
        results = run_oltp(*db, ctx, OltpMix::by_name(w), o.queries, o.spec.seed, o.warmup).to_json();
      } else if (w == "bfs" || w == "khop") {
        results = run_traversal(*db, ctx, o, w == "khop");
      } else if (w == "pr") {
        const auto iters = o.iters ? o.iters : 20;
        const auto pr = run_pagerank(*db, iters);
        double best = 0;
        for (const auto& [r, x] : pr.scores) best = std::max(best, x);
        results["iters"] = iters;
        results["damping"] = 0.85;
        results["score_sums"] = pr.sums;
        results["max_score"] = std::bit_cast<double>(rank.allreduce(std::bit_cast<std::uint64_t>(best), rma::ReduceOp::max));
        results["elapsed_s"] = seconds_since(t0);
      } else if (w == "wcc") {
        const auto comp = run_wcc(*db);
        const auto elapsed = seconds_since(t0);
        std::uint64_t roots = 0;
        for (const auto& [r, c] : comp) roots += r.bits() == c;
        results["components"] = rank.allreduce(roots, rma::ReduceOp::sum);
        results["elapsed_s"] = elapsed;
      } else if (w == "cdlp") {
        const auto iters = o.iters ? o.iters : 10;
        const auto labels = run_cdlp(*db, iters);
        const auto elapsed = seconds_since(t0);
        results["iters"] = iters;
        results["communities"] = distinct_values(*db, labels);
        results["elapsed_s"] = elapsed;
      } else if (w == "lcc") {
        const auto lcc = run_lcc(*db);
        const auto elapsed = seconds_since(t0);
        double sum = 0;
        for (const auto& [r, x] : lcc) sum += x;
        results["mean_lcc"] = rank.allreduce_sum(sum) / static_cast<double>(o.spec.vertices());
        results["elapsed_s"] = elapsed;
      } else if (w == "gcn") {
        const auto feature = db->property_type_from_name("gcn_feature");
        run_gcn(*db, feature, GcnModel::random(o.dim, o.spec.seed), o.layers);
        const auto elapsed = seconds_since(t0);
        delay(rank, std::chrono::nanoseconds(0));
        double checksum = 0;
        auto t = db->start_collective_transaction(TxnMode::read);
        for (auto r : db->local_vertices()) {
          const auto vals = t.associate_vertex(r).properties(feature);
          for (double x : std::get<std::vector<double>>(vals.at(0))) checksum += x;
        }
        t.commit();
        results["layers"] = o.layers;
        results["dim"] = o.dim;
        results["feature_checksum"] = rank.allreduce_sum(checksum);
        results["elapsed_s"] = elapsed;
      }
    }

    delay(rank, std::chrono::nanoseconds(0));
    nlohmann::ordered_json audit;
    bool audit_ok = true;
    if (o.audit) {
      const auto a = db->audit();
      audit_ok = a.ok();
      audit = {{"ok", a.ok()},
               {"violations", a.violations()},
               {"vertices", a.vertices},
               {"edge_holders", a.edge_holders},
               {"half_edges", a.half_edges},
               {"held_locks", a.held_locks},
               {"free_blocks", a.free_blocks},
               {"referenced_blocks", a.referenced_blocks},
               {"capacity", a.capacity}};
    }
    if (rank.id() == 0) {
      std::lock_guard lock(m);
      if (!generation.is_null()) out.report["generation"] = generation;
      out.report["results"] = results;
      if (o.audit) out.report["audit"] = audit;
      out.audit_ok = audit_ok;
    }
  });
  return out;
}

}  // namespace gdi::bench
