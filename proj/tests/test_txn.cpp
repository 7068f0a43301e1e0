#include <array>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "doctest.h"
#include "gdi/database.hpp"
#include "gdi/error.hpp"
#include "txn_oracle.hpp"

using namespace gdi;
using namespace std::chrono_literals;
using namespace txn_oracle;

namespace {

DatabaseConfig config() {
  DatabaseConfig c;
  c.block_size = 256;
  c.blocks_per_rank = 2048;
  c.index_capacity = 4096;
  return c;
}

}  // namespace

TEST_CASE("concurrent write transactions are serializable") {
  int contended = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto r = run_round(seed, std::chrono::microseconds(20 + 10 * seed));
    INFO("seed " << seed << " committed " << r.committed[0].size() << "+" << r.committed[1].size());
    contended += r.failures[0] + r.failures[1];
    CHECK(r.audits_ok);
    CHECK(r.only_critical_errors);
    CHECK(r.committed[0].size() + r.committed[1].size() > 0);
    CHECK(serializable(r.init, r.committed[0], r.committed[1], r.final));
  }
  CHECK(contended > 0);
}

TEST_CASE("the serializability oracle rejects a lost update") {
  State init{};
  const std::vector<Step> a{{0, 0, 1, 5}};
  const std::vector<Step> b{{1, 1, 0, 7}};
  State ab = init, ba = init;
  apply(ab, a[0]);
  apply(ab, b[0]);
  apply(ba, b[0]);
  apply(ba, a[0]);
  CHECK(serializable(init, a, b, ab));
  CHECK(serializable(init, a, b, ba));
  State both_from_init = init;
  apply(both_from_init, a[0]);
  both_from_init[0] = (init[1] * 3 + init[1] + 7) & 0xFFFFFFFFull;
  CHECK_FALSE(serializable(init, a, b, both_from_init));
}

TEST_CASE("hot-spot increments are never lost") {
  rma::World world(4);
  world.set_op_delay(10us);
  world.run([](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    const auto cnt = db->create_property_type("cnt", EntityKind::single, Datatype::u64);
    if (rank.id() == 0) {
      auto t = db->start_transaction(TxnMode::write);
      for (int i = 0; i < 2; ++i) t.create_vertex("hot" + std::to_string(i)).add_property(cnt, u64_value(0));
      t.commit();
    }
    rank.barrier();
    std::array<std::uint64_t, 2> ok{};
    std::mt19937_64 rng(rank.id());
    for (int n = 0; n < 60; ++n) {
      const auto which = rng() % 2;
      auto t = db->start_transaction(TxnMode::write);
      try {
        auto v = t.associate_vertex(t.translate_vertex_id(std::nullopt, "hot" + std::to_string(which)));
        v.update_property(cnt, u64_value(as_u64(v.properties(cnt).at(0)) + 1));
      } catch (const Error&) {
      }
      if (t.commit() == Outcome::committed) ++ok[which];
    }
    const auto total0 = rank.allreduce(ok[0], rma::ReduceOp::sum);
    const auto total1 = rank.allreduce(ok[1], rma::ReduceOp::sum);
    if (rank.id() == 0) {
      auto t = db->start_transaction(TxnMode::read);
      CHECK(as_u64(t.associate_vertex(t.translate_vertex_id(std::nullopt, "hot0")).properties(cnt).at(0)) == total0);
      CHECK(as_u64(t.associate_vertex(t.translate_vertex_id(std::nullopt, "hot1")).properties(cnt).at(0)) == total1);
      t.commit();
    }
    CHECK(total0 + total1 > 0);
    CHECK(db->audit().ok());
  });
}

TEST_CASE("read transactions reject mutations") {
  rma::World world(1);
  world.run([](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    const auto l = db->create_label("L");
    GlobalRef ref;
    {
      auto t = db->start_transaction(TxnMode::write);
      ref = t.create_vertex("v").ref();
      t.commit();
    }
    auto t = db->start_transaction(TxnMode::read);
    auto v = t.associate_vertex(ref);
    try {
      v.add_label(l);
      FAIL("expected wrong_mode");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::wrong_mode);
    }
    CHECK_THROWS_AS(t.create_vertex("w"), Error);
    t.commit();
    CHECK(db->audit().ok());
  });
}

TEST_CASE("collective transactions agree on the outcome") {
  rma::World world(3);
  world.run([](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    const auto val = db->create_property_type("val", EntityKind::single, Datatype::u64);
    {
      auto t = db->start_transaction(TxnMode::write);
      t.create_vertex("v" + std::to_string(rank.id()), rank.id()).add_property(val, u64_value(1));
      t.commit();
    }
    rank.barrier();
    auto bump = [&](std::uint64_t to, Decision d) {
      auto t = db->start_collective_transaction(TxnMode::write);
      for (auto r : db->local_vertices()) t.associate_vertex(r).update_property(val, u64_value(to));
      return t.close(d);
    };
    CHECK(bump(2, rank.id() == 1 ? Decision::abort : Decision::commit) == Outcome::aborted);
    {
      auto t = db->start_collective_transaction(TxnMode::read);
      std::uint64_t sum = 0;
      for (auto r : db->local_vertices()) sum += as_u64(t.associate_vertex(r).properties(val).at(0));
      CHECK(rank.allreduce(sum, rma::ReduceOp::sum) == 3);
      CHECK(t.commit() == Outcome::committed);
    }
    CHECK(bump(5, Decision::commit) == Outcome::committed);
    {
      auto t = db->start_collective_transaction(TxnMode::read);
      std::uint64_t sum = 0;
      for (auto r : db->local_vertices()) sum += as_u64(t.associate_vertex(r).properties(val).at(0));
      CHECK(rank.allreduce(sum, rma::ReduceOp::sum) == 15);
      t.commit();
    }
    CHECK(db->audit().ok());
  });
}

TEST_CASE("volatile ids must be obtained inside the transaction") {
  rma::World world(1);
  world.run([](rma::Rank& rank) {
    auto cfg = config();
    cfg.poison_volatile_ids = true;
    auto db = Database::create(rank, cfg);
    GlobalRef ref;
    {
      auto t = db->start_transaction(TxnMode::write);
      ref = t.create_vertex("v").ref();
      t.commit();
    }
    {
      auto t = db->start_transaction(TxnMode::read);
      try {
        t.associate_vertex(ref);
        FAIL("expected rejection");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_argument);
      }
      t.abort();
    }
    auto t = db->start_transaction(TxnMode::read);
    CHECK(t.associate_vertex(t.translate_vertex_id(std::nullopt, "v")).ref() == ref);
    t.commit();
  });
}

TEST_CASE("metadata removal sweeps stored objects") {
  rma::World world(2);
  world.run([](rma::Rank& rank) {
    auto db = Database::create(rank, config());
    const auto red = db->create_label("red");
    const auto green = db->create_label("green");
    const auto tag = db->create_property_type("tag", EntityKind::multi, Datatype::u64);
    const auto name = db->create_property_type("name", EntityKind::single, Datatype::utf8, SizeKind::max, 8);
    CHECK_THROWS_AS(db->create_label("red"), Error);
    if (rank.id() == 0) {
      auto t = db->start_transaction(TxnMode::write);
      auto a = t.create_vertex("a", 0);
      auto b = t.create_vertex("b", 1);
      a.add_label(red);
      a.add_label(green);
      a.add_property(tag, u64_value(1));
      a.add_property(name, utf8_value("abcdefgh"));
      b.add_label(red);
      t.create_edge(a, b, true, red);
      const auto heavy = t.create_edge(b, a, true, red);
      t.associate_edge(heavy).add_property(tag, u64_value(9));
      CHECK(t.commit() == Outcome::committed);
    }
    db->free_label(red);
    CHECK_FALSE(db->catalog().contains(red));
    CHECK_THROWS_AS(db->free_label(red), Error);
    db->free_property_type(tag);
    if (rank.id() == 1) {
      auto t = db->start_transaction(TxnMode::read);
      auto a = t.associate_vertex(t.translate_vertex_id(green, "a"));
      CHECK(a.labels() == std::vector<Label>{green});
      CHECK(a.all_properties().size() == 1);
      for (auto uid : a.edges(kAnyOrientation)) {
        auto e = t.associate_edge(uid);
        CHECK(e.labels().empty());
        CHECK(e.properties(name).empty());
      }
      auto b = t.associate_vertex(t.translate_vertex_id(std::nullopt, "b"));
      CHECK(b.labels().empty());
      t.commit();
    }
    CHECK(db->audit().ok());

    CHECK_THROWS_AS(db->update_property_type(name, EntityKind::single, SizeKind::fixed, 4), Error);
    db->update_property_type(name, EntityKind::single, SizeKind::fixed, 10, utf8_value("_"));
    if (rank.id() == 0) {
      auto t = db->start_transaction(TxnMode::read);
      auto a = t.associate_vertex(t.translate_vertex_id(green, "a"));
      CHECK(std::get<std::string>(a.properties(name).at(0)) == "abcdefgh__");
      t.commit();
    }
    CHECK(db->catalog().info(name).size_limit == 10);
    CHECK(db->audit().ok());
  });
}
