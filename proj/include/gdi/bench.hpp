#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gdi/database.hpp"
#include "gdi/gen.hpp"
#include "json.hpp"

namespace gdi::bench {

enum class OpKind : std::uint8_t {
  get_properties,
  count_edges,
  get_edges,
  add_vertex,
  delete_vertex,
  update_property,
  add_edge,
};
inline constexpr std::size_t kOpKinds = 7;
const char* to_string(OpKind k);

// Operation probabilities in units of 1/1000, so every mix sums to exactly 1.
struct OltpMix {
  std::string name;
  std::array<std::uint32_t, kOpKinds> weight{};

  static constexpr std::uint32_t kTotal = 1000;
  double probability(OpKind k) const { return weight[static_cast<std::size_t>(k)] / double(kTotal); }
  // u is a uniform 64-bit draw.
  OpKind sample(std::uint64_t u) const;
  bool read_only() const;

  static const std::vector<OltpMix>& standard();  // RM, RI, WI, LB
  static OltpMix by_name(std::string_view name);   // case-insensitive
};

// Latency histogram with log-spaced buckets from 100 ns to 1 s, four per
// decade, plus an underflow and an overflow bucket.
class Histogram {
 public:
  Histogram();
  void add(std::chrono::nanoseconds d);
  void merge(const Histogram& other);
  std::uint64_t total() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  // Upper bounds of every bucket but the overflow bucket.
  static const std::vector<double>& upper_bounds_ns();
  std::vector<std::uint64_t> to_words() const { return counts_; }
  static Histogram from_words(std::span<const std::uint64_t> words);
  nlohmann::ordered_json to_json() const;

 private:
  std::vector<std::uint64_t> counts_;
};

// Graph produced by the generator, as seen by the workload drivers.
struct GraphContext {
  GenSpec spec;
  GenReport gen;
  std::vector<GlobalRef> owned;  // refs of this rank's vertices, index id / P
  PropertyType value_type;       // u64 property touched by update operations
};

// Collective. Generates the graph and the extra metadata the drivers use.
GraphContext prepare_graph(Database& db, const GenSpec& spec);

struct OltpResult {
  std::string mix;
  std::uint64_t attempted = 0;
  std::uint64_t failed = 0;
  double elapsed_s = 0;  // slowest rank
  Histogram latency;
  std::array<std::uint64_t, kOpKinds> kind_attempted{};
  std::array<std::uint64_t, kOpKinds> kind_failed{};
  std::array<Histogram, kOpKinds> kind_latency;
  struct RankStats {
    std::uint64_t attempted = 0, failed = 0;
    double elapsed_s = 0;
  };
  std::vector<RankStats> per_rank;
  std::uint64_t op_sequence_hash = 0;
  std::uint64_t warmup = 0;

  double failed_fraction() const { return attempted ? double(failed) / double(attempted) : 0.0; }
  double throughput() const { return elapsed_s > 0 ? double(attempted) / elapsed_s : 0.0; }
  nlohmann::ordered_json to_json() const;
};

// Collective. Each rank runs warmup unmeasured and then queries_per_rank
// measured operations, each a local transaction. Failures are counted, not
// retried. Operands come from the vertices live at the start of the run,
// updated by the rank's own adds and deletes.
OltpResult run_oltp(Database& db, GraphContext& ctx, const OltpMix& mix, std::uint64_t queries_per_rank,
                    std::uint64_t seed, std::uint64_t warmup = 100);

// Op kinds drawn by rank `rank` for a run; independent of outcomes.
std::vector<OpKind> op_sequence(const OltpMix& mix, std::uint64_t seed, rma::RankId rank, std::uint64_t count);

template <typename T>
using LocalValues = std::vector<std::pair<GlobalRef, T>>;

// Analytics run inside one collective read transaction each and treat every
// edge as traversable both ways. Results cover the calling rank's vertices.
LocalValues<std::uint64_t> run_bfs(Database& db, GlobalRef root);
std::vector<GlobalRef> run_khop(Database& db, GlobalRef root, std::uint32_t k);

struct PageRankResult {
  LocalValues<double> scores;
  std::vector<double> sums;  // global score sum after each iteration
};
PageRankResult run_pagerank(Database& db, std::uint32_t iters, double damping = 0.85);

// Component id: smallest vertex ref bits in the component.
LocalValues<std::uint64_t> run_wcc(Database& db);
// Each round a vertex adopts the most frequent label among its neighbors,
// the smallest on ties. Labels start as vertex ref bits.
LocalValues<std::uint64_t> run_cdlp(Database& db, std::uint32_t iters);
LocalValues<double> run_lcc(Database& db);

struct GcnModel {
  std::uint32_t dim = 0;
  std::vector<double> weight;  // dim x dim, row-major
  std::vector<double> bias;
  static GcnModel identity(std::uint32_t dim);
  static GcnModel random(std::uint32_t dim, std::uint64_t seed);
  std::vector<double> apply(const std::vector<double>& x) const;  // ReLU(W x + b)
};
// Collective. Sets a deterministic feature vector on every vertex.
void init_features(Database& db, PropertyType feature, std::uint32_t dim, std::uint64_t seed);
// One collective write transaction per layer. Throws not_found if a vertex
// lacks the feature.
void run_gcn(Database& db, PropertyType feature, const GcnModel& model, std::uint32_t layers);

struct BiSchema {
  Label person, car, own;
  PropertyType age, color;
  std::uint32_t person_index = 0;
};
// Collective. Creates the schema and the Person index when missing.
BiSchema bi_schema(Database& db);
// Collective. Loads a Kronecker graph whose vertices are persons and cars.
BulkReport bi_load(Database& db, const GenSpec& spec, const BiSchema& schema);
// Collective. Persons older than 30 and their OWN edges to red cars.
std::uint64_t run_bi_query(Database& db, const BiSchema& schema);

// Collective. The global vertex with a given application id under the
// generator's labeling.
GlobalRef ref_of(Database& db, const GraphContext& ctx, std::uint64_t id);

// Collective. Gathers a LocalValues result on every rank, sorted by ref.
template <typename T>
LocalValues<T> gather(Database& db, const LocalValues<T>& local);

// One complete benchmark invocation, as driven by the command line tool.
struct RunOptions {
  std::string workload = "lb";  // rm ri wi lb bfs khop pr wcc cdlp lcc gcn bi bulk
  std::uint32_t ranks = 1;
  GenSpec spec;
  std::uint64_t queries = 1000;  // per rank
  std::uint64_t warmup = 100;    // per rank
  std::uint32_t block_size = 512;
  std::uint32_t blocks_per_rank = 0;  // 0: sized from the graph
  std::uint32_t index_capacity = 0;   // 0: sized from the graph
  std::uint32_t k = 2;
  std::uint32_t roots = 10;
  std::uint32_t iters = 0;  // 0: 20 for pr, 10 for cdlp
  std::uint32_t layers = 2;
  std::uint32_t dim = 16;
  std::string edge_file;  // bulk workload input; generated edges when empty
  std::chrono::nanoseconds op_delay{0};
  bool audit = false;
};

struct RunOutcome {
  nlohmann::ordered_json report;
  bool audit_ok = true;
};

std::uint32_t default_blocks_per_rank(const RunOptions& options);
// Spawns options.ranks ranks and runs the workload on a fresh database.
RunOutcome run_benchmark(const RunOptions& options);

// Report document.
nlohmann::ordered_json make_report(const std::string& workload, const nlohmann::ordered_json& config);
std::string report_to_csv(const nlohmann::ordered_json& report);
// Returns violations of the shipped report schema; empty when valid.
std::vector<std::string> validate_report(const nlohmann::json& report, const nlohmann::json& schema);
// The report schema compiled into the library.
const nlohmann::json& report_schema();

}  // namespace gdi::bench
