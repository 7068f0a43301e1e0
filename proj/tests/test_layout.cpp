#include <random>

#include "doctest.h"
#include "gdi/error.hpp"
#include "gdi/layout.hpp"

using namespace gdi;

namespace {

ObjectImage random_image(std::mt19937_64& rng, std::uint32_t block_size) {
  ObjectImage img;
  img.kind = rng() % 4 == 0 ? ObjectKind::edge : ObjectKind::vertex;
  img.incarnation = static_cast<std::uint32_t>(rng());
  img.app_id.resize(rng() % 40);
  for (auto& b : img.app_id) b = static_cast<std::byte>(rng());
  const auto edges = rng() % 60;
  for (std::uint64_t i = 0; i < edges; ++i) {
    LightEdge e;
    e.neighbor = GlobalRef(rng() % 8, (rng() % 1000) * block_size);
    if (rng() % 5 == 0) e.holder = GlobalRef(rng() % 8, (rng() % 1000) * block_size);
    e.label = rng() % 3 == 0 ? 0 : 3 + rng() % 20;
    e.orientation = static_cast<Orientation>(1u << (rng() % 3));
    e.tombstone = rng() % 7 == 0;
    img.edges.push_back(e);
  }
  const auto entries = rng() % 20;
  for (std::uint64_t i = 0; i < entries; ++i) {
    PropertyEntry p;
    p.marker = rng() % 6 == 0 ? kEntryEmpty : 2 + rng() % 10;
    p.payload.resize(rng() % 70);
    for (auto& b : p.payload) b = static_cast<std::byte>(rng());
    img.entries.push_back(p);
  }
  if (img.kind == ObjectKind::edge) {
    img.origin = GlobalRef(1, 512);
    img.target = GlobalRef(2, 1024);
    img.directed = rng() % 2 == 0;
  }
  const auto n = blocks_needed(img, block_size);
  img.blocks.push_back(kNullRef);
  for (std::uint32_t i = 1; i < n; ++i) img.blocks.push_back(GlobalRef(rng() % 8, (rng() % 1000) * block_size));
  return img;
}

}  // namespace

TEST_CASE("serialize and parse are inverse") {
  std::mt19937_64 rng(7);
  for (std::uint32_t bs : {64u, 128u, 512u}) {
    for (int i = 0; i < 300; ++i) {
      auto img = random_image(rng, bs);
      auto bytes = serialize(img, bs);
      CHECK(bytes.size() == img.blocks.size() * bs);
      auto back = parse(bytes);
      CHECK(back == img);
    }
  }
}

TEST_CASE("fresh vertex fits one block") {
  ObjectImage img;
  img.app_id.resize(8);
  CHECK(blocks_needed(img, 512) == 1);
  CHECK(image_bytes(img, 1) == kHeaderBytes + 8 + 8);
}

TEST_CASE("block list precedes the data it addresses") {
  ObjectImage img;
  img.entries.push_back({7, std::vector<std::byte>(5000)});
  const auto n = blocks_needed(img, 64);
  CHECK(n > 70);
  // Address of block i sits inside blocks 0..i-1.
  for (std::uint32_t i = 1; i < n; ++i) CHECK(kHeaderBytes + 8 * i <= std::size_t{i} * 64);
}

TEST_CASE("parse rejects non-holders and truncation") {
  std::vector<std::byte> zero(64);
  try {
    parse(zero);
    FAIL("parsed a zero block");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::stale);
  }
  ObjectImage img;
  img.blocks = {kNullRef};
  auto bytes = serialize(img, 64);
  bytes.resize(20);
  CHECK_THROWS_AS(parse(bytes), Error);
}

TEST_CASE("compaction drops tombstones and empty entries") {
  ObjectImage img;
  img.edges.push_back({GlobalRef(0, 0), kNullRef, 0, kOutgoing, true});
  img.edges.push_back({GlobalRef(0, 64), kNullRef, 3, kIncoming, false});
  img.entries.push_back({kEntryEmpty, {}});
  img.entries.push_back({kEntryLabel, label_payload(Label{4})});
  CHECK(compact(img));
  CHECK(img.edges.size() == 1);
  CHECK(img.entries.size() == 1);
  CHECK(label_of(img.entries[0]) == Label{4});
  CHECK_FALSE(compact(img));
}

TEST_CASE("fetching a multi-block image through the pool") {
  rma::World world(2);
  world.run([](rma::Rank& r) {
    BlockPoolConfig cfg;
    cfg.block_size = 64;
    cfg.blocks_per_rank = 128;
    auto pool = BlockPool::create(r, cfg);
    if (r.id() == 0) {
      ObjectImage img;
      img.app_id = {std::byte{1}, std::byte{2}};
      img.entries.push_back({9, std::vector<std::byte>(700, std::byte{5})});
      const auto n = blocks_needed(img, 64);
      for (std::uint32_t i = 0; i < n; ++i) img.blocks.push_back(pool.acquire(i % 2));
      auto bytes = serialize(img, 64);
      for (std::uint32_t i = 0; i < n; ++i) pool.write(img.blocks[i], 0, std::span(bytes).subspan(i * 64, 64));
      auto fetched = fetch_image(pool, img.blocks[0]);
      auto back = parse(fetched);
      back.blocks[0] = img.blocks[0];
      CHECK(back == img);
      auto spare = pool.acquire(1);
      CHECK(fetch_image(pool, spare).empty());
    }
    r.barrier();
  });
}
