#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

#include "doctest.h"
#include "gdi/error.hpp"
#include "gdi/gen.hpp"

using namespace gdi;

namespace {

DatabaseConfig config(std::uint32_t blocks = 4096) {
  DatabaseConfig c;
  c.block_size = 512;
  c.blocks_per_rank = blocks;
  c.index_capacity = 1u << 15;
  return c;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> all_edges(std::uint32_t ranks, const GenSpec& spec,
                                                             GenReport* report = nullptr) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  std::mutex m;
  rma::World world(ranks);
  world.run([&](rma::Rank& rank) {
    GenReport rep;
    const auto edges = kronecker_edges(rank, spec, &rep);
    std::lock_guard lock(m);
    for (const auto& e : edges) out.emplace_back(e.u, e.v);
    if (rank.id() == 0 && report) *report = rep;
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::string app_string(const std::vector<std::byte>& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

}  // namespace

TEST_CASE("generated edge sets are exact and independent of the rank count") {
  GenSpec spec;
  spec.scale = 4;
  spec.edge_factor = 1;
  spec.seed = 42;
  const auto base = all_edges(1, spec);
  CHECK(base.size() == 16);
  for (std::uint32_t p : {2u, 4u, 8u}) CHECK(all_edges(p, spec) == base);

  spec.scale = 11;
  spec.edge_factor = 8;
  GenReport rep;
  const auto big = all_edges(1, spec, &rep);
  CHECK(big.size() == spec.target_edges());
  CHECK(rep.m == spec.target_edges());
  CHECK(rep.duplicates > 0);
  std::set<std::pair<std::uint64_t, std::uint64_t>> pairs;
  for (auto [u, v] : big) {
    CHECK(u != v);
    CHECK(u < spec.vertices());
    CHECK(v < spec.vertices());
    pairs.insert({std::min(u, v), std::max(u, v)});
  }
  CHECK(pairs.size() == big.size());
  CHECK(all_edges(4, spec) == big);
  CHECK(all_edges(3, spec) == big);

  spec.seed = 43;
  CHECK(all_edges(2, spec) != big);
}

TEST_CASE("invalid generator specs are rejected") {
  GenSpec s;
  s.scale = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.scale = 2;
  s.edge_factor = 4;
  CHECK_THROWS_AS(s.validate(), Error);
  s.edge_factor = 1;
  s.label_rules = {{"nope", 1.0}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.label_rules.clear();
  s.property_rules = {{"p99"}};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("spec json round trip") {
  GenSpec s;
  s.scale = 9;
  s.label_rules = {{"L1", 0.3}};
  PropertyRule r;
  r.ptype = "p0";
  r.probability = 1.0;
  s.property_rules = {r};
  const auto back = GenSpec::from_json(nlohmann::json::parse(s.to_json().dump()));
  CHECK(back.to_json() == s.to_json());
}

TEST_CASE("generated graph matches the edge list and labels") {
  GenSpec spec;
  spec.scale = 8;
  spec.edge_factor = 4;
  spec.seed = 5;
  const auto expected = all_edges(1, spec);
  std::map<std::string, std::multiset<std::string>> out_oracle, in_oracle;
  for (auto [u, v] : expected) {
    out_oracle[bulk_app_id(u)].insert(bulk_app_id(v));
    in_oracle[bulk_app_id(v)].insert(bulk_app_id(u));
  }
  rma::World world(3);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    std::vector<GlobalRef> refs;
    const auto rep = generate(*db, spec, &refs);
    CHECK(rep.n == 256);
    CHECK(rep.m == 1024);
    const auto [lo, hi] = std::minmax_element(rep.vertices_per_rank.begin(), rep.vertices_per_rank.end());
    CHECK(*hi - *lo <= 1);
    auto t = db->start_collective_transaction(TxnMode::read);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const auto id = rank.id() + k * rank.size();
      auto v = t.associate_vertex(refs[k]);
      CHECK(app_string(v.app_id()) == bulk_app_id(id));
      const auto want = gen_vertex_labels(spec, id);
      REQUIRE(v.labels().size() == want.size());
      CHECK(v.labels()[0] == db->label_from_name(gen_label_name(want[0])));
      std::multiset<std::string> out, in;
      for (auto n : v.neighbors(Orientation::kOutgoing)) out.insert(app_string(t.associate_vertex(n).app_id()));
      for (auto n : v.neighbors(Orientation::kIncoming)) in.insert(app_string(t.associate_vertex(n).app_id()));
      CHECK(out == out_oracle[bulk_app_id(id)]);
      CHECK(in == in_oracle[bulk_app_id(id)]);
      CHECK(t.translate_vertex_id(db->label_from_name(gen_label_name(want[0])), bulk_app_id(id)) == refs[k]);
    }
    t.commit();
    const auto audit = db->audit();
    CHECK(audit.ok());
    CHECK(audit.vertices == 256);
    CHECK(audit.half_edges == 2048);
  });
}

TEST_CASE("label and property assignment rules") {
  GenSpec spec;
  spec.scale = 12;
  std::vector<std::uint64_t> counts(spec.labels);
  for (std::uint64_t id = 0; id < spec.vertices(); ++id) {
    const auto ls = gen_vertex_labels(spec, id);
    REQUIRE(ls.size() == 1);
    ++counts[ls[0]];
  }
  const double n = static_cast<double>(spec.vertices());
  const double mean = n / 20, sigma = std::sqrt(n * (1.0 / 20) * (19.0 / 20));
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - mean) < 5 * sigma);

  GenSpec one = spec;
  one.label_rules = {{"L3", 1.0}};
  for (std::uint64_t id = 0; id < 100; ++id) CHECK(gen_vertex_labels(one, id) == std::vector<std::uint32_t>{3});

  GenSpec bare;
  bare.scale = 6;
  bare.edge_factor = 2;
  bare.ptypes = 0;
  bare.labels = 2;
  rma::World world(2);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    std::vector<GlobalRef> refs;
    generate(*db, bare, &refs);
    CHECK(db->catalog().property_types().empty());
    auto t = db->start_collective_transaction(TxnMode::read);
    for (auto r : refs) {
      auto v = t.associate_vertex(r);
      CHECK(v.labels().size() == 1);
      CHECK(v.all_properties().empty());
    }
    t.commit();
    CHECK_THROWS_AS(generate(*db, bare), Error);
  });
}

TEST_CASE("default property schema") {
  GenSpec spec;
  spec.scale = 6;
  spec.edge_factor = 2;
  PropertyRule always;
  always.ptype = "p2";
  always.probability = 1.0;
  always.length = 20;
  spec.property_rules = {always};
  rma::World world(2);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    std::vector<GlobalRef> refs;
    generate(*db, spec, &refs);
    std::map<Datatype, int> kinds;
    int multi = 0;
    for (auto p : db->catalog().property_types()) {
      ++kinds[db->catalog().info(p).datatype];
      multi += db->catalog().info(p).entity == EntityKind::multi;
    }
    CHECK(kinds[Datatype::u64] == 6);
    CHECK(kinds[Datatype::f64] == 3);
    CHECK(kinds[Datatype::utf8] == 4);
    CHECK(multi == 2);
    const auto p2 = db->property_type_from_name("p2");
    auto t = db->start_collective_transaction(TxnMode::read);
    for (auto r : refs) {
      auto vals = t.associate_vertex(r).properties(p2);
      REQUIRE(vals.size() == 1);
      CHECK(std::get<std::string>(vals[0]).size() == 20);
    }
    t.commit();
  });
}

TEST_CASE("pool exhaustion reports the needed capacity") {
  GenSpec spec;
  spec.scale = 10;
  spec.edge_factor = 16;
  rma::World world(2);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, config(64));
    try {
      generate(*db, spec);
      FAIL("expected exhaustion");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::resource_exhausted);
      CHECK(std::string(e.what()).find("blocks per rank") != std::string::npos);
    }
  });
}

TEST_CASE("edge list and vertex files") {
  const auto dir = std::filesystem::temp_directory_path() / "gdi_bulk_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "edges.txt");
    f << "# u v label\n0 1 KNOWS\n1 2\n2 0 KNOWS\n3 3\n";
    std::ofstream g(dir / "vertices.json");
    g << R"([{"id": 0, "labels": ["Person"], "properties": {"age": 31, "name": "ann"}},
             {"id": 3, "properties": {"scores": [1.5, 2.5]}}])";
  }
  rma::World world(2);
  world.run([&](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    const auto knows = db->create_label("KNOWS");
    const auto person = db->create_label("Person");
    const auto age = db->create_property_type("age", EntityKind::single, Datatype::u64);
    db->create_property_type("name", EntityKind::single, Datatype::utf8);
    const auto scores = db->create_property_type("scores", EntityKind::single, Datatype::f64);
    std::uint64_t n = 0;
    const auto edges = read_edge_list(*db, (dir / "edges.txt").string(), &n);
    CHECK(n == 4);
    CHECK(rank.allreduce(edges.size(), rma::ReduceOp::sum) == 4);
    std::vector<GlobalRef> refs;
    BulkOptions opt;
    opt.directed = false;
    const auto rep = bulk_load(*db, n, edges, opt, &refs);
    CHECK(rep.edges == 4);
    apply_vertex_file(*db, (dir / "vertices.json").string(), refs);
    rank.barrier();
    if (rank.id() == 1) {
      auto t = db->start_transaction(TxnMode::read);
      auto v0 = t.associate_vertex(t.translate_vertex_id(person, "0"));
      CHECK(as_u64(v0.properties(age).at(0)) == 31);
      CHECK(v0.degree(Orientation::kUndirected) == 2);
      Constraint c;
      c.add(Subconstraint().has(knows));
      CHECK(v0.neighbors(kAnyOrientation, &c).size() == 2);
      auto v3 = t.associate_vertex(t.translate_vertex_id(std::nullopt, "3"));
      CHECK(v3.degree(kAnyOrientation) == 2);
      CHECK(std::get<std::vector<double>>(v3.properties(scores).at(0)) == std::vector<double>{1.5, 2.5});
      t.commit();
    }
    CHECK(db->audit().ok());
    CHECK_THROWS_AS(read_edge_list(*db, (dir / "missing.txt").string(), nullptr), Error);
  });
  std::filesystem::remove_all(dir);
}
