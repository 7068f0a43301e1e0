#include "gdi/database.hpp"

#include <algorithm>
#include <functional>
#include <unordered_set>

#include "txn_impl.hpp"

namespace gdi {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (auto b : bytes) {
    h ^= static_cast<std::uint8_t>(b);
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t text_hash(std::string_view s) { return fnv1a(std::as_bytes(std::span(s.data(), s.size()))); }

// Order-independent fingerprint of one lightweight entry as stored at `at`.
std::uint64_t edge_signature(GlobalRef at, const LightEdge& e) {
  std::uint64_t h = mix(at.bits());
  h = mix(h ^ e.neighbor.bits());
  h = mix(h ^ e.holder.bits());
  h = mix(h ^ (std::uint64_t{e.label} << 8 | e.orientation));
  return h;
}

}  // namespace

std::uint64_t app_key(std::uint32_t label_id, std::span<const std::byte> app_id) {
  std::byte prefix[4];
  std::memcpy(prefix, &label_id, 4);
  return mix(fnv1a(app_id, fnv1a(prefix)));
}

std::vector<Label> labels_of(const ObjectImage& image) {
  std::vector<Label> out;
  for (const auto& e : image.entries) {
    if (e.marker == kEntryLabel) out.push_back(label_of(e));
  }
  return out;
}

std::vector<std::uint64_t> app_keys(const ObjectImage& image) {
  std::vector<std::uint64_t> out;
  for (auto l : labels_of(image)) out.push_back(app_key(l.id, image.app_id));
  if (out.empty()) out.push_back(app_key(0, image.app_id));
  return out;
}

bool ImageAttributes::has_label(Label l) const {
  for (const auto& e : image_.entries) {
    if (e.marker == kEntryLabel && label_of(e) == l) return true;
  }
  return false;
}

std::vector<Value> ImageAttributes::property_values(PropertyType p) const {
  std::vector<Value> out;
  const auto type = catalog_.info(p).datatype;
  for (const auto& e : image_.entries) {
    if (e.marker == p.id) out.push_back(decode(type, e.payload));
  }
  return out;
}

bool AuditReport::ok() const { return violations().empty(); }

std::vector<std::string> AuditReport::violations() const {
  std::vector<std::string> out;
  if (!locks_clean()) out.push_back(std::to_string(held_locks) + " lock words still held");
  if (!no_leaks()) {
    out.push_back("block leak: free " + std::to_string(free_blocks) + " + referenced " +
                  std::to_string(referenced_blocks) + " != capacity " + std::to_string(capacity));
  }
  if (dangling_edges) out.push_back(std::to_string(dangling_edges) + " dangling edge entries");
  if (index_errors) out.push_back(std::to_string(index_errors) + " index mismatches");
  if (dht_errors) out.push_back(std::to_string(dht_errors) + " hash table chain errors");
  if (!free_lists_ok) out.push_back("malformed free list");
  if (!catalogs_equal) out.push_back("metadata replicas differ");
  return out;
}

Database::Database(rma::Rank& rank, DatabaseConfig config) : rank_(rank), config_(config) {}

Database::~Database() = default;

std::unique_ptr<Database> Database::create(rma::Rank& rank, DatabaseConfig config) {
  if (rank.size() > rma::kMaxRanks) throw Error(Errc::invalid_argument, "too many ranks");
  std::unique_ptr<Database> db(new Database(rank, config));
  BlockPoolConfig pc;
  pc.block_size = config.block_size;
  pc.blocks_per_rank = config.blocks_per_rank;
  pc.track_holders = config.track_block_holders;
  db->pool_ = BlockPool::create(rank, pc);
  DhtConfig dc;
  dc.entries_per_rank = std::max<std::uint32_t>(config.index_capacity, 1);
  dc.buckets_per_rank = std::max<std::uint64_t>(dc.entries_per_rank / 2, 1);
  db->internal_index_ = DhtTable::create(rank, dc);
  rank.barrier();
  return db;
}

void Database::agree(std::string_view what) {
  const auto h = text_hash(what);
  const auto lo = rank_.allreduce(h, rma::ReduceOp::min);
  const auto hi = rank_.allreduce(h, rma::ReduceOp::max);
  if (lo != hi) throw Error(Errc::collective_mismatch, "ranks disagree on collective call: " + std::string(what));
}

Label Database::create_label(const std::string& name) {
  agree("create_label " + name);
  return catalog_.add_label(name);
}

PropertyType Database::create_property_type(const std::string& name, EntityKind entity, Datatype datatype,
                                            SizeKind size_kind, std::uint32_t size_limit) {
  agree("create_property_type " + name);
  PropertyTypeInfo info;
  info.name = name;
  info.entity = entity;
  info.datatype = datatype;
  info.size_kind = size_kind;
  info.size_limit = size_limit;
  return catalog_.add_property_type(info);
}

void Database::sweep_entries(std::uint32_t marker, std::optional<Label> light_label) {
  auto txn = start_collective_transaction(TxnMode::write);
  auto& impl = *txn.impl_;
  auto edit = [&](ObjectKind kind, GlobalRef ref) {
    auto& h = impl.load(ref, kind);
    bool changed = false;
    const auto n = std::erase_if(h.image.entries, [&](const PropertyEntry& e) {
      if (e.marker != marker) return false;
      return marker != kEntryLabel || (light_label && label_of(e) == *light_label);
    });
    changed = n > 0;
    if (light_label) {
      for (auto& e : h.image.edges) {
        if (e.label == light_label->id) {
          e.label = 0;
          changed = true;
        }
      }
    }
    if (changed) impl.ensure_writable(h);
  };
  for (auto ref : local_vertices()) edit(ObjectKind::vertex, ref);
  for (auto ref : local_edge_holders()) edit(ObjectKind::edge, ref);
  if (txn.commit() != Outcome::committed) throw Error(Errc::transaction_failed, "metadata sweep aborted");
}

void Database::rebuild_indexes_touching(const std::vector<Label>& labels, const std::vector<PropertyType>& ptypes) {
  for (std::uint32_t i = 0; i < indexes_.size(); ++i) {
    auto& def = indexes_[i]->def;
    const auto before = def.labels.size() + def.ptypes.size();
    std::erase_if(def.labels, [&](Label l) { return std::find(labels.begin(), labels.end(), l) != labels.end(); });
    std::erase_if(def.ptypes,
                  [&](PropertyType p) { return std::find(ptypes.begin(), ptypes.end(), p) != ptypes.end(); });
    if (def.labels.size() + def.ptypes.size() != before) rebuild_index(i);
  }
}

void Database::free_label(Label label) {
  agree("free_label " + std::to_string(label.id));
  if (!catalog_.contains(label)) throw Error(Errc::not_found, "unknown label");
  sweep_entries(kEntryLabel, label);
  catalog_.remove_label(label);
  rebuild_indexes_touching({label}, {});
}

void Database::free_property_type(PropertyType ptype) {
  agree("free_property_type " + std::to_string(ptype.id));
  if (!catalog_.contains(ptype)) throw Error(Errc::not_found, "unknown property type");
  sweep_entries(ptype.id, std::nullopt);
  catalog_.remove_property_type(ptype);
  rebuild_indexes_touching({}, {ptype});
}

void Database::update_property_type(PropertyType ptype, EntityKind entity, SizeKind size_kind,
                                    std::uint32_t size_limit, std::optional<Value> fill) {
  agree("update_property_type " + std::to_string(ptype.id));
  const auto info = catalog_.info(ptype);
  Catalog::check_limits(size_kind, size_limit);
  if (fill && datatype_of(*fill) != info.datatype) throw Error(Errc::type_mismatch, "fill value has the wrong datatype");

  auto needs_change = [&](const Value& v) {
    const auto n = element_count(v);
    return (size_kind == SizeKind::fixed && n != size_limit) || (size_kind == SizeKind::max && n > size_limit);
  };
  auto scan = [&](const std::function<void(ObjectImage&, GlobalRef, ObjectKind)>& fn) {
    for (auto ref : local_vertices()) {
      auto img = parse(fetch_image(pool_, ref));
      fn(img, ref, ObjectKind::vertex);
    }
    for (auto ref : local_edge_holders()) {
      auto img = parse(fetch_image(pool_, ref));
      fn(img, ref, ObjectKind::edge);
    }
  };

  std::uint64_t bad = 0;
  scan([&](ObjectImage& img, GlobalRef, ObjectKind) {
    std::size_t count = 0;
    for (const auto& e : img.entries) {
      if (e.marker != ptype.id) continue;
      ++count;
      if (!fill && needs_change(decode(info.datatype, e.payload))) bad = 1;
    }
    if (entity == EntityKind::single && count > 1) bad = 1;
  });
  if (rank_.allreduce(bad, rma::ReduceOp::max) != 0) {
    throw Error(Errc::invalid_argument, "stored values of '" + info.name + "' violate the new limits");
  }

  auto txn = start_collective_transaction(TxnMode::write);
  auto& impl = *txn.impl_;
  std::vector<std::pair<ObjectKind, GlobalRef>> touched;
  scan([&](ObjectImage& img, GlobalRef ref, ObjectKind kind) {
    for (const auto& e : img.entries) {
      if (e.marker == ptype.id && needs_change(decode(info.datatype, e.payload))) {
        touched.emplace_back(kind, ref);
        break;
      }
    }
  });
  for (auto [kind, ref] : touched) {
    auto& h = impl.load(ref, kind);
    impl.ensure_writable(h);
    for (auto& e : h.image.entries) {
      if (e.marker != ptype.id) continue;
      const auto v = decode(info.datatype, e.payload);
      if (needs_change(v)) e.payload = encode(resized(v, size_limit, *fill));
    }
    impl.fit(h);
  }
  if (txn.commit() != Outcome::committed) throw Error(Errc::transaction_failed, "property type update aborted");
  catalog_.update_property_type(ptype, entity, size_kind, size_limit);
}

void Database::load_schema(const nlohmann::json& schema) {
  if (schema.contains("labels")) {
    for (const auto& l : schema.at("labels")) create_label(l.get<std::string>());
  }
  if (schema.contains("property_types")) {
    for (const auto& p : schema.at("property_types")) {
      create_property_type(p.at("name").get<std::string>(), entity_from_string(p.value("entity", "single")),
                           datatype_from_string(p.at("datatype").get<std::string>()),
                           size_kind_from_string(p.value("size", "none")), p.value("limit", 0u));
    }
  }
}

Label Database::label_from_name(std::string_view name) const {
  auto l = catalog_.find_label(name);
  if (!l) throw Error(Errc::not_found, "unknown label '" + std::string(name) + "'");
  return *l;
}

const std::string& Database::name_of(Label label) const { return catalog_.info(label).name; }

PropertyType Database::property_type_from_name(std::string_view name) const {
  auto p = catalog_.find_property_type(name);
  if (!p) throw Error(Errc::not_found, "unknown property type '" + std::string(name) + "'");
  return *p;
}

bool Database::member_of(const ObjectImage& image, const IndexDef& def) const {
  for (const auto& e : image.entries) {
    if (e.marker == kEntryLabel) {
      if (std::find(def.labels.begin(), def.labels.end(), label_of(e)) != def.labels.end()) return true;
    } else if (std::find(def.ptypes.begin(), def.ptypes.end(), PropertyType{e.marker}) != def.ptypes.end()) {
      return true;
    }
  }
  return false;
}

std::uint32_t Database::create_index(std::vector<Label> labels, std::vector<PropertyType> ptypes,
                                     std::uint32_t capacity_per_rank) {
  agree("create_index " + std::to_string(indexes_.size()));
  if (labels.empty() && ptypes.empty()) throw Error(Errc::invalid_argument, "index needs a label or property type");
  for (auto l : labels) {
    if (!catalog_.contains(l)) throw Error(Errc::not_found, "unknown label");
  }
  for (auto p : ptypes) {
    if (!catalog_.contains(p)) throw Error(Errc::not_found, "unknown property type");
  }
  auto ix = std::make_unique<Index>();
  ix->def = IndexDef{std::move(labels), std::move(ptypes), std::max<std::uint32_t>(capacity_per_rank, 1)};
  DhtConfig dc;
  dc.entries_per_rank = ix->def.capacity;
  dc.buckets_per_rank = std::max<std::uint64_t>(ix->def.capacity / 2, 1);
  dc.placement = DhtPlacement::by_key_rank;
  ix->table = DhtTable::create(rank_, dc);
  indexes_.push_back(std::move(ix));
  const auto id = static_cast<std::uint32_t>(indexes_.size() - 1);
  rebuild_index(id);
  return id;
}

void Database::add_to_index(std::uint32_t index, std::vector<Label> labels, std::vector<PropertyType> ptypes) {
  agree("add_to_index " + std::to_string(index));
  auto& def = indexes_.at(index)->def;
  for (auto l : labels) {
    if (!catalog_.contains(l)) throw Error(Errc::not_found, "unknown label");
    if (std::find(def.labels.begin(), def.labels.end(), l) == def.labels.end()) def.labels.push_back(l);
  }
  for (auto p : ptypes) {
    if (!catalog_.contains(p)) throw Error(Errc::not_found, "unknown property type");
    if (std::find(def.ptypes.begin(), def.ptypes.end(), p) == def.ptypes.end()) def.ptypes.push_back(p);
  }
  rebuild_index(index);
}

void Database::rebuild_index(std::uint32_t index) {
  auto& ix = *indexes_.at(index);
  rank_.barrier();
  std::vector<std::uint64_t> keys;
  ix.table.for_each_local(rank_id(), [&](std::uint64_t k, std::uint64_t) { keys.push_back(k); });
  for (auto k : keys) ix.table.erase(k);
  rank_.barrier();
  std::uint64_t exhausted = 0;
  try {
    for (auto ref : local_vertices()) {
      const auto img = parse(fetch_image(pool_, ref));
      if (member_of(img, ix.def)) ix.table.insert(ref.bits(), ref.bits());
    }
  } catch (const Error& e) {
    if (e.code() != Errc::resource_exhausted) throw;
    exhausted = 1;
  }
  if (rank_.allreduce(exhausted, rma::ReduceOp::max) != 0) {
    throw Error(Errc::resource_exhausted, "index capacity exceeded");
  }
  rank_.barrier();
}

const IndexDef& Database::index(std::uint32_t index) const { return indexes_.at(index)->def; }

std::uint64_t Database::index_local_size(std::uint32_t index) const {
  std::uint64_t n = 0;
  indexes_.at(index)->table.for_each_local(rank_id(), [&](std::uint64_t, std::uint64_t) { ++n; });
  return n;
}

Transaction Database::start_transaction(TxnMode mode) {
  return Transaction(std::make_unique<detail::TxnImpl>(*this, mode, TxnKind::local));
}

Transaction Database::start_collective_transaction(TxnMode mode) {
  rank_.barrier();
  return Transaction(std::make_unique<detail::TxnImpl>(*this, mode, TxnKind::collective));
}

std::vector<GlobalRef> Database::local_vertices() const { return pool_.blocks_of_kind(rank_id(), BlockKind::vertex); }

std::vector<GlobalRef> Database::local_edge_holders() const {
  return pool_.blocks_of_kind(rank_id(), BlockKind::edge);
}

rma::RankId Database::next_placement() {
  return static_cast<rma::RankId>((rank_id() + placement_counter_++) % ranks());
}

AuditReport Database::audit() {
  rank_.barrier();
  AuditReport rep;
  const auto me = rank_id();
  std::uint64_t free_ok = 1;
  std::uint64_t free_local = 0;
  try {
    free_local = pool_.free_count(me);
  } catch (const std::logic_error&) {
    free_ok = 0;
  }
  const std::uint64_t locks = pool_.held_locks(me).size();

  const auto vertices = local_vertices();
  const auto holders = local_edge_holders();
  const auto live_vertices = rank_.allgatherv(
      [&] {
        std::vector<std::uint64_t> v;
        for (auto r : vertices) v.push_back(r.bits());
        return v;
      }());
  const auto live_holders = rank_.allgatherv(
      [&] {
        std::vector<std::uint64_t> v;
        for (auto r : holders) v.push_back(r.bits());
        return v;
      }());
  const std::unordered_set<std::uint64_t> vset(live_vertices.begin(), live_vertices.end());
  const std::unordered_set<std::uint64_t> hset(live_holders.begin(), live_holders.end());

  std::uint64_t referenced = 0, half_edges = 0, dangling = 0, index_errors = 0, key_count = 0;
  std::uint64_t signature_balance = 0;
  std::vector<std::unordered_set<std::uint64_t>> expected(indexes_.size());

  for (auto ref : vertices) {
    const auto bytes = fetch_image(pool_, ref);
    if (bytes.empty() || peek_magic(bytes) != kVertexMagic) {
      ++dangling;
      continue;
    }
    const auto img = parse(bytes);
    referenced += img.blocks.size();
    for (auto k : app_keys(img)) {
      ++key_count;
      const auto v = internal_index_.lookup(k);
      if (!v || *v != ref.bits()) ++index_errors;
    }
    for (std::size_t i = 0; i < indexes_.size(); ++i) {
      if (member_of(img, indexes_[i]->def)) expected[i].insert(ref.bits());
    }
    for (const auto& e : img.edges) {
      if (e.tombstone) continue;
      ++half_edges;
      if (!vset.count(e.neighbor.bits())) ++dangling;
      if (e.heavy() && !hset.count(e.holder.bits())) ++dangling;
      LightEdge mirror = e;
      mirror.neighbor = ref;
      mirror.orientation = mirror_of(e.orientation);
      signature_balance += edge_signature(ref, e);
      signature_balance -= edge_signature(e.neighbor, mirror);
    }
  }
  for (auto ref : holders) {
    const auto bytes = fetch_image(pool_, ref);
    if (bytes.empty() || peek_magic(bytes) != kEdgeMagic) {
      ++dangling;
      continue;
    }
    const auto img = parse(bytes);
    referenced += img.blocks.size();
    if (!vset.count(img.origin.bits()) || !vset.count(img.target.bits())) ++dangling;
  }

  std::uint64_t dht_errors = 0;
  const auto internal = internal_index_.audit_local(me);
  dht_errors += internal.overlap + internal.marked;
  for (std::size_t i = 0; i < indexes_.size(); ++i) {
    std::unordered_set<std::uint64_t> actual;
    std::uint64_t entries = 0;
    indexes_[i]->table.for_each_local(me, [&](std::uint64_t k, std::uint64_t) {
      actual.insert(k);
      ++entries;
    });
    index_errors += entries - actual.size();
    for (auto k : actual) index_errors += !expected[i].count(k);
    for (auto k : expected[i]) index_errors += !actual.count(k);
    const auto a = indexes_[i]->table.audit_local(me);
    dht_errors += a.overlap + a.marked;
  }

  using rma::ReduceOp;
  rep.capacity = std::uint64_t{pool_.blocks_per_rank()} * ranks();
  rep.free_blocks = rank_.allreduce(free_local, ReduceOp::sum);
  rep.referenced_blocks = rank_.allreduce(referenced, ReduceOp::sum);
  rep.vertices = live_vertices.size();
  rep.edge_holders = live_holders.size();
  rep.half_edges = rank_.allreduce(half_edges, ReduceOp::sum);
  rep.held_locks = rank_.allreduce(locks, ReduceOp::sum);
  rep.dangling_edges = rank_.allreduce(dangling, ReduceOp::sum);
  if (rank_.allreduce(signature_balance, ReduceOp::sum) != 0) ++rep.dangling_edges;
  const auto reachable = rank_.allreduce(internal.reachable, ReduceOp::sum);
  const auto keys = rank_.allreduce(key_count, ReduceOp::sum);
  rep.index_errors = rank_.allreduce(index_errors, ReduceOp::sum) + (reachable != keys ? 1 : 0);
  rep.dht_errors = rank_.allreduce(dht_errors, ReduceOp::sum);
  rep.free_lists_ok = rank_.allreduce(free_ok, ReduceOp::min) == 1;
  const auto h = text_hash(catalog_.serialize());
  rep.catalogs_equal = rank_.allreduce(h, ReduceOp::min) == rank_.allreduce(h, ReduceOp::max);
  rank_.barrier();
  return rep;
}

}  // namespace gdi
