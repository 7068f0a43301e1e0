#include <algorithm>
#include <cstring>

#include "txn_impl.hpp"

namespace gdi {

namespace {

class LightAttributes : public AttributeView {
 public:
  explicit LightAttributes(std::uint32_t label) : label_(label) {}
  bool has_label(Label l) const override { return label_ != 0 && l.id == label_; }
  std::vector<Value> property_values(PropertyType) const override { return {}; }

 private:
  std::uint32_t label_;
};

std::span<const std::byte> as_bytes(std::string_view s) {
  return std::as_bytes(std::span(s.data(), s.size()));
}

bool has_label_entry(const ObjectImage& image, Label label) {
  for (const auto& e : image.entries) {
    if (e.marker == kEntryLabel && label_of(e) == label) return true;
  }
  return false;
}

}  // namespace

namespace detail {

TxnImpl::TxnImpl(Database& db, TxnMode mode, TxnKind kind) : db_(db), mode_(mode), kind_(kind) {}

TxnImpl::~TxnImpl() {
  if (status_ == TxnStatus::open || status_ == TxnStatus::failed) {
    try {
      rollback();
    } catch (...) {
    }
  }
}

void TxnImpl::fail(Errc code, const std::string& what) {
  status_ = TxnStatus::failed;
  throw Error(code, what);
}

void TxnImpl::require_readable() const {
  if (status_ == TxnStatus::committed || status_ == TxnStatus::aborted) {
    throw Error(Errc::invalid_argument, "transaction is closed");
  }
}

void TxnImpl::take_lock(GlobalRef ref, LockMode mode, std::uint32_t* incarnation) {
  const auto r = db_.pool_.try_lock(ref, mode);
  if (r.status != LockStatus::acquired) fail(Errc::lock_busy, "object " + ref.to_string() + " is locked");
  locks_.emplace_back(ref, mode);
  if (incarnation) *incarnation = r.incarnation;
}

GlobalRef TxnImpl::acquire_block(rma::RankId preferred) {
  const auto p = db_.ranks();
  for (std::uint32_t i = 0; i < p; ++i) {
    const auto b = db_.pool_.acquire((preferred + i) % p);
    if (!b.is_null()) {
      new_blocks_.insert(b);
      return b;
    }
  }
  fail(Errc::resource_exhausted, "block pools of all ranks are exhausted");
}

std::vector<char> TxnImpl::memberships(const ObjectImage& image) const {
  std::vector<char> out(db_.indexes_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = db_.member_of(image, db_.indexes_[i]->def);
  return out;
}

Holder& TxnImpl::load(GlobalRef ref, ObjectKind kind) {
  auto& map = kind == ObjectKind::vertex ? vertices_ : edges_;
  if (auto it = map.find(ref); it != map.end()) {
    if (it->second->deleted) throw Error(Errc::not_found, "object was deleted in this transaction");
    return *it->second;
  }
  require_readable();
  if (status_ == TxnStatus::failed) throw Error(Errc::transaction_failed, "transaction has failed");
  auto& pool = db_.pool_;
  if (ref.is_null() || ref.rank() >= db_.ranks() || ref.offset() % pool.block_size() != 0 ||
      ref.offset() / pool.block_size() >= pool.blocks_per_rank()) {
    throw Error(Errc::invalid_argument, "not a block address: " + ref.to_string());
  }
  if (db_.config_.poison_volatile_ids && kind_ == TxnKind::local && kind == ObjectKind::vertex &&
      !issued_.count(ref)) {
    throw Error(Errc::invalid_argument, "vertex id " + ref.to_string() + " was not obtained in this transaction");
  }
  std::uint32_t incarnation = 0;
  bool locked = false;
  if (kind_ == TxnKind::local) {
    take_lock(ref, mode_ == TxnMode::write ? LockMode::write : LockMode::read, &incarnation);
    locked = true;
  } else if (db_.config_.check_collective_quiescence && mode_ == TxnMode::read && pool.lock_word(ref).write) {
    throw std::logic_error("collective read overlaps a local write transaction on " + ref.to_string());
  }
  auto bytes = fetch_image(pool, ref);
  if (bytes.empty()) fail(Errc::stale, "no live object at " + ref.to_string());
  auto image = parse(bytes);
  if (image.kind != kind) fail(Errc::stale, "object at " + ref.to_string() + " has a different kind");
  if (locked && image.incarnation != incarnation) fail(Errc::stale, "object at " + ref.to_string() + " was replaced");
  image.blocks[0] = ref;

  auto h = std::make_unique<Holder>();
  h->ref = ref;
  std::memcpy(&h->original_used, bytes.data() + 8, 4);
  h->original = std::move(bytes);
  h->original_blocks = image.blocks;
  h->image = std::move(image);
  h->locked = locked && mode_ == TxnMode::write;
  if (kind == ObjectKind::vertex) {
    h->original_keys = app_keys(h->image);
    h->original_member = memberships(h->image);
  }
  if (mode_ == TxnMode::write && kind_ == TxnKind::local && compact(h->image)) h->dirty = true;
  return *map.emplace(ref, std::move(h)).first->second;
}

void TxnImpl::ensure_writable(Holder& h) {
  require_readable();
  if (status_ == TxnStatus::failed) throw Error(Errc::transaction_failed, "transaction has failed");
  if (mode_ != TxnMode::write) throw Error(Errc::wrong_mode, "mutation inside a read transaction");
  if (h.deleted) throw Error(Errc::not_found, "object was deleted in this transaction");
  if (!h.locked) {
    std::uint32_t incarnation = 0;
    take_lock(h.ref, LockMode::write, &incarnation);
    h.locked = true;
    if (incarnation != h.image.incarnation) fail(Errc::stale, "object at " + h.ref.to_string() + " was replaced");
  }
  h.dirty = true;
}

void TxnImpl::fit(Holder& h) {
  const auto need = blocks_needed(h.image, db_.pool_.block_size());
  while (h.image.blocks.size() < need) h.image.blocks.push_back(acquire_block(h.ref.rank()));
}

Holder& TxnImpl::create_vertex(std::span<const std::byte> app_id, std::optional<rma::RankId> placement) {
  require_readable();
  if (status_ == TxnStatus::failed) throw Error(Errc::transaction_failed, "transaction has failed");
  if (mode_ != TxnMode::write) throw Error(Errc::wrong_mode, "vertex creation inside a read transaction");
  if (app_id.size() > kMaxAppIdBytes) throw Error(Errc::invalid_argument, "application id exceeds 256 bytes");
  const auto target = placement ? *placement : db_.next_placement();
  if (target >= db_.ranks()) throw Error(Errc::invalid_argument, "placement rank out of range");
  const auto ref = acquire_block(target);
  const auto r = db_.pool_.try_lock(ref, LockMode::write);
  if (r.status != LockStatus::acquired) {
    new_blocks_.erase(ref);
    db_.pool_.release(ref);
    fail(Errc::lock_busy, "fresh block " + ref.to_string() + " is locked");
  }
  locks_.emplace_back(ref, LockMode::write);

  auto h = std::make_unique<Holder>();
  h->ref = ref;
  h->is_new = true;
  h->dirty = true;
  h->locked = true;
  h->image.kind = ObjectKind::vertex;
  h->image.incarnation = r.incarnation;
  h->image.blocks = {ref};
  h->image.app_id.assign(app_id.begin(), app_id.end());
  h->original_member.assign(db_.indexes_.size(), 0);
  issued_.insert(ref);
  auto& out = *vertices_.emplace(ref, std::move(h)).first->second;
  fit(out);
  return out;
}

std::optional<GlobalRef> TxnImpl::find_vertex(std::optional<Label> label, std::span<const std::byte> app_id) {
  require_readable();
  if (label && !db_.catalog_.contains(*label)) throw Error(Errc::not_found, "unknown label");
  const auto value = db_.internal_index_.lookup(app_key(label ? label->id : 0, app_id));
  if (!value) return std::nullopt;
  const auto ref = GlobalRef::from_bits(*value);
  if (auto it = vertices_.find(ref); it != vertices_.end() && it->second->deleted) return std::nullopt;
  issued_.insert(ref);
  Holder& h = load(ref, ObjectKind::vertex);
  const bool same_id = std::equal(h.image.app_id.begin(), h.image.app_id.end(), app_id.begin(), app_id.end());
  const bool same_label = label ? has_label_entry(h.image, *label) : labels_of(h.image).empty();
  if (!same_id || !same_label) return std::nullopt;
  return ref;
}

void TxnImpl::add_label(Holder& h, Label label) {
  ensure_writable(h);
  if (!db_.catalog_.contains(label)) throw Error(Errc::not_found, "unknown label");
  if (has_label_entry(h.image, label)) throw Error(Errc::invalid_argument, "label already present");
  h.image.entries.push_back({kEntryLabel, label_payload(label)});
  fit(h);
}

void TxnImpl::remove_label(Holder& h, Label label) {
  ensure_writable(h);
  auto& entries = h.image.entries;
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const PropertyEntry& e) { return e.marker == kEntryLabel && label_of(e) == label; });
  if (it == entries.end()) throw Error(Errc::not_found, "label not present");
  entries.erase(it);
}

std::vector<Value> TxnImpl::properties(const Holder& h, PropertyType ptype) const {
  const auto& info = db_.catalog_.info(ptype);
  std::vector<Value> out;
  for (const auto& e : h.image.entries) {
    if (e.marker == ptype.id) out.push_back(decode(info.datatype, e.payload));
  }
  return out;
}

void TxnImpl::add_property(Holder& h, PropertyType ptype, const Value& value) {
  ensure_writable(h);
  db_.catalog_.check_value(ptype, value);
  if (db_.catalog_.info(ptype).entity == EntityKind::single) {
    for (const auto& e : h.image.entries) {
      if (e.marker == ptype.id) throw Error(Errc::invalid_argument, "single-entity property already set");
    }
  }
  h.image.entries.push_back({ptype.id, encode(value)});
  fit(h);
}

void TxnImpl::update_property(Holder& h, PropertyType ptype, const Value& value) {
  ensure_writable(h);
  db_.catalog_.check_value(ptype, value);
  auto& entries = h.image.entries;
  bool placed = false;
  for (auto it = entries.begin(); it != entries.end();) {
    if (it->marker != ptype.id) {
      ++it;
    } else if (!placed) {
      it->payload = encode(value);
      placed = true;
      ++it;
    } else {
      it = entries.erase(it);
    }
  }
  if (!placed) entries.push_back({ptype.id, encode(value)});
  fit(h);
}

std::size_t TxnImpl::remove_properties(Holder& h, PropertyType ptype) {
  ensure_writable(h);
  db_.catalog_.info(ptype);
  return std::erase_if(h.image.entries, [&](const PropertyEntry& e) { return e.marker == ptype.id; });
}

bool TxnImpl::remove_property(Holder& h, PropertyType ptype, const Value& value) {
  ensure_writable(h);
  db_.catalog_.check_value(ptype, value);
  const auto raw = encode(value);
  auto& entries = h.image.entries;
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const PropertyEntry& e) { return e.marker == ptype.id && e.payload == raw; });
  if (it == entries.end()) return false;
  entries.erase(it);
  return true;
}

bool TxnImpl::edge_matches(Holder& h, std::uint32_t offset, const Constraint& constraint) {
  const LightEdge e = h.image.edges[offset];
  if (e.heavy()) {
    Holder& eh = load(e.holder, ObjectKind::edge);
    return constraint.evaluate(ImageAttributes(eh.image, db_.catalog_), db_.catalog_);
  }
  return constraint.evaluate(LightAttributes(e.label), db_.catalog_);
}

std::vector<EdgeUid> TxnImpl::edges(Holder& h, OrientationMask mask, const Constraint* constraint) {
  require_readable();
  if (constraint && constraint->is_stale(db_.catalog_)) {
    throw Error(Errc::invalid_argument, "constraint refers to removed metadata");
  }
  std::vector<EdgeUid> out;
  for (std::uint32_t i = 0; i < h.image.edges.size(); ++i) {
    const auto& e = h.image.edges[i];
    if (e.tombstone || !(e.orientation & mask)) continue;
    if (constraint && !constraint->empty() && !edge_matches(h, i, *constraint)) continue;
    out.push_back({h.ref, i});
  }
  return out;
}

EdgeUid TxnImpl::create_edge(Holder& origin, Holder& target, bool directed, std::optional<Label> label) {
  ensure_writable(origin);
  ensure_writable(target);
  if (label && !db_.catalog_.contains(*label)) throw Error(Errc::not_found, "unknown label");
  const std::uint32_t l = label ? label->id : 0;
  origin.image.edges.push_back({target.ref, kNullRef, l, directed ? kOutgoing : kUndirected, false});
  const auto offset = static_cast<std::uint32_t>(origin.image.edges.size() - 1);
  target.image.edges.push_back({origin.ref, kNullRef, l, directed ? kIncoming : kUndirected, false});
  fit(origin);
  fit(target);
  return {origin.ref, offset};
}

TxnImpl::EdgeSlot TxnImpl::resolve(EdgeUid uid) {
  Holder& v = load(uid.vertex, ObjectKind::vertex);
  if (uid.offset >= v.image.edges.size() || v.image.edges[uid.offset].tombstone) {
    throw Error(Errc::not_found, "edge does not exist");
  }
  return {&v, uid.offset};
}

std::uint32_t TxnImpl::find_mirror(Holder& base, std::uint32_t offset, Holder& neighbor) {
  const LightEdge e = base.image.edges[offset];
  const auto want = mirror_of(e.orientation);
  for (std::uint32_t i = 0; i < neighbor.image.edges.size(); ++i) {
    if (&neighbor == &base && i == offset) continue;
    const auto& f = neighbor.image.edges[i];
    if (!f.tombstone && f.neighbor == base.ref && f.orientation == want && f.holder == e.holder &&
        f.label == e.label) {
      return i;
    }
  }
  throw std::logic_error("mirror entry of edge at " + base.ref.to_string() + " is missing");
}

Holder& TxnImpl::neighbor_for_write(Holder& base, GlobalRef neighbor) {
  Holder& nb = neighbor == base.ref ? base : load(neighbor, ObjectKind::vertex);
  ensure_writable(nb);
  return nb;
}

Holder& TxnImpl::escalate(EdgeSlot slot) {
  const LightEdge e = slot.entry();
  if (e.heavy()) {
    Holder& eh = load(e.holder, ObjectKind::edge);
    ensure_writable(eh);
    return eh;
  }
  Holder& base = *slot.base;
  ensure_writable(base);
  Holder& nb = neighbor_for_write(base, e.neighbor);
  const auto m = find_mirror(base, slot.offset, nb);

  const auto ref = acquire_block(base.ref.rank());
  const auto r = db_.pool_.try_lock(ref, LockMode::write);
  if (r.status != LockStatus::acquired) fail(Errc::lock_busy, "fresh block " + ref.to_string() + " is locked");
  locks_.emplace_back(ref, LockMode::write);

  auto h = std::make_unique<Holder>();
  h->ref = ref;
  h->is_new = true;
  h->dirty = true;
  h->locked = true;
  h->image.kind = ObjectKind::edge;
  h->image.incarnation = r.incarnation;
  h->image.blocks = {ref};
  h->image.directed = e.orientation != kUndirected;
  h->image.origin = e.orientation == kIncoming ? e.neighbor : base.ref;
  h->image.target = e.orientation == kIncoming ? base.ref : e.neighbor;
  if (e.label != 0) h->image.entries.push_back({kEntryLabel, label_payload(Label{e.label})});

  for (auto* entry : {&base.image.edges[slot.offset], &nb.image.edges[m]}) {
    entry->holder = ref;
    entry->label = 0;
  }
  auto& out = *edges_.emplace(ref, std::move(h)).first->second;
  fit(out);
  return out;
}

void TxnImpl::free_edge(EdgeSlot slot) {
  Holder& base = *slot.base;
  ensure_writable(base);
  const LightEdge e = slot.entry();
  Holder& nb = neighbor_for_write(base, e.neighbor);
  const auto m = find_mirror(base, slot.offset, nb);
  if (e.heavy()) {
    Holder& eh = load(e.holder, ObjectKind::edge);
    ensure_writable(eh);
    eh.deleted = true;
  }
  base.image.edges[slot.offset].tombstone = true;
  nb.image.edges[m].tombstone = true;
}

void TxnImpl::free_vertex(Holder& h) {
  ensure_writable(h);
  std::vector<GlobalRef> neighbors;
  for (const auto& e : h.image.edges) {
    if (!e.tombstone && e.neighbor != h.ref) neighbors.push_back(e.neighbor);
  }
  std::sort(neighbors.begin(), neighbors.end());
  neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
  for (auto n : neighbors) ensure_writable(load(n, ObjectKind::vertex));

  for (std::uint32_t i = 0; i < h.image.edges.size(); ++i) {
    const LightEdge e = h.image.edges[i];
    if (e.tombstone) continue;
    Holder& nb = e.neighbor == h.ref ? h : *vertices_.at(e.neighbor);
    const auto m = find_mirror(h, i, nb);
    nb.image.edges[m].tombstone = true;
    h.image.edges[i].tombstone = true;
    if (e.heavy()) {
      Holder& eh = load(e.holder, ObjectKind::edge);
      ensure_writable(eh);
      eh.deleted = true;
    }
  }
  h.deleted = true;
}

std::vector<GlobalRef> TxnImpl::local_vertices_of_index(std::uint32_t index, const Constraint* constraint) {
  require_readable();
  if (index >= db_.indexes_.size()) throw Error(Errc::not_found, "unknown index");
  if (constraint && constraint->is_stale(db_.catalog_)) {
    throw Error(Errc::invalid_argument, "constraint refers to removed metadata");
  }
  std::vector<GlobalRef> refs;
  db_.indexes_[index]->table.for_each_local(db_.rank_id(), [&](std::uint64_t, std::uint64_t v) {
    refs.push_back(GlobalRef::from_bits(v));
  });
  std::sort(refs.begin(), refs.end());
  for (auto r : refs) issued_.insert(r);
  if (!constraint || constraint->empty()) return refs;
  std::vector<GlobalRef> out;
  for (auto r : refs) {
    Holder& h = load(r, ObjectKind::vertex);
    if (constraint->evaluate(ImageAttributes(h.image, db_.catalog_), db_.catalog_)) out.push_back(r);
  }
  return out;
}

bool TxnImpl::prepare() {
  if (status_ != TxnStatus::open) return false;
  try {
    for (auto& [ref, hp] : vertices_) {
      Holder& h = *hp;
      if (!h.dirty && !h.deleted) continue;
      if (h.deleted && h.is_new) continue;
      const auto now = h.deleted ? std::vector<std::uint64_t>{} : app_keys(h.image);
      for (auto k : now) {
        if (std::find(h.original_keys.begin(), h.original_keys.end(), k) != h.original_keys.end()) continue;
        if (!db_.internal_index_.insert_unique(k, ref.bits())) {
          status_ = TxnStatus::failed;
          return false;
        }
        inserted_.emplace_back(&db_.internal_index_, k);
      }
      for (std::size_t i = 0; i < db_.indexes_.size(); ++i) {
        const bool was = i < h.original_member.size() && h.original_member[i];
        const bool is = !h.deleted && db_.member_of(h.image, db_.indexes_[i]->def);
        if (!was && is) {
          db_.indexes_[i]->table.insert(ref.bits(), ref.bits());
          inserted_.emplace_back(&db_.indexes_[i]->table, ref.bits());
        }
      }
    }
  } catch (const Error&) {
    status_ = TxnStatus::failed;
    return false;
  }
  return true;
}

void TxnImpl::finish() {
  auto& pool = db_.pool_;
  const auto bs = pool.block_size();
  std::vector<GlobalRef> release_later;
  std::vector<GlobalRef> deleted_primaries;
  std::vector<char> touched(db_.ranks(), 0);

  auto drop = [&](GlobalRef b) { release_later.push_back(b); };

  for (auto* map : {&vertices_, &edges_}) {
    for (auto& [ref, hp] : *map) {
      Holder& h = *hp;
      if (h.deleted) {
        std::vector<GlobalRef> all = h.image.blocks;
        all.insert(all.end(), h.original_blocks.begin(), h.original_blocks.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        for (auto b : all) drop(b);
        if (!h.is_new) {
          const std::uint32_t zero = 0;
          pool.write(ref, 0, std::as_bytes(std::span(&zero, 1)));
          touched[ref.rank()] = 1;
          deleted_primaries.push_back(ref);
        }
        continue;
      }
      if (!h.dirty) continue;
      const auto need = blocks_needed(h.image, bs);
      while (h.image.blocks.size() > need) {
        drop(h.image.blocks.back());
        h.image.blocks.pop_back();
      }
      const auto bytes = serialize(h.image, bs);
      const auto used = image_bytes(h.image, h.image.blocks.size());
      for (std::size_t i = 0; i < h.image.blocks.size(); ++i) {
        const auto b = h.image.blocks[i];
        const std::size_t begin = i * bs;
        const std::size_t len = std::min<std::size_t>(bs, used - begin);
        const bool same = !h.is_new && i < h.original_blocks.size() && h.original_blocks[i] == b &&
                          begin + len <= h.original_used &&
                          std::memcmp(h.original.data() + begin, bytes.data() + begin, len) == 0;
        if (!same) {
          pool.write(b, 0, std::span(bytes).subspan(begin, len));
          dirty_blocks_.push_back(b);
          touched[b.rank()] = 1;
        }
        if (new_blocks_.count(b)) {
          const auto kind = i > 0 ? BlockKind::continuation
                                  : (h.image.kind == ObjectKind::vertex ? BlockKind::vertex : BlockKind::edge);
          pool.set_kind(b, kind);
        }
      }
    }
  }
  for (std::uint32_t r = 0; r < touched.size(); ++r) {
    if (touched[r]) pool.flush(r);
  }
  for (auto ref : deleted_primaries) pool.bump_incarnation(ref);

  for (auto& [ref, hp] : vertices_) {
    Holder& h = *hp;
    if ((!h.dirty && !h.deleted) || (h.deleted && h.is_new)) continue;
    const auto now = h.deleted ? std::vector<std::uint64_t>{} : app_keys(h.image);
    for (auto k : h.original_keys) {
      if (std::find(now.begin(), now.end(), k) == now.end()) db_.internal_index_.erase(k);
    }
    for (std::size_t i = 0; i < db_.indexes_.size(); ++i) {
      const bool was = i < h.original_member.size() && h.original_member[i];
      const bool is = !h.deleted && db_.member_of(h.image, db_.indexes_[i]->def);
      if (was && !is) db_.indexes_[i]->table.erase(ref.bits());
    }
  }

  for (const auto& [ref, mode] : locks_) pool.unlock(ref, mode);
  locks_.clear();
  for (auto b : release_later) pool.release(b);
  new_blocks_.clear();
  inserted_.clear();
  status_ = TxnStatus::committed;
}

void TxnImpl::rollback() {
  for (auto it = inserted_.rbegin(); it != inserted_.rend(); ++it) it->first->erase(it->second);
  inserted_.clear();
  for (const auto& [ref, mode] : locks_) db_.pool_.unlock(ref, mode);
  locks_.clear();
  for (auto b : new_blocks_) db_.pool_.release(b);
  new_blocks_.clear();
  status_ = TxnStatus::aborted;
}

Outcome TxnImpl::close(Decision decision) {
  if (status_ == TxnStatus::committed || status_ == TxnStatus::aborted) {
    throw Error(Errc::invalid_argument, "transaction is already closed");
  }
  if (kind_ == TxnKind::local) {
    if (decision == Decision::commit && prepare()) {
      finish();
      return Outcome::committed;
    }
    rollback();
    return Outcome::aborted;
  }
  const bool ready = decision == Decision::commit && prepare();
  const bool commit = db_.rank_.allreduce(ready ? 1 : 0, rma::ReduceOp::min) == 1;
  if (commit) {
    finish();
  } else {
    rollback();
  }
  db_.rank_.barrier();
  return commit ? Outcome::committed : Outcome::aborted;
}

}  // namespace detail

// VertexHandle

GlobalRef VertexHandle::ref() const { return h_->ref; }

std::vector<std::byte> VertexHandle::app_id() const { return h_->image.app_id; }

bool VertexHandle::deleted() const { return h_->deleted; }

std::uint32_t VertexHandle::block_count() const { return static_cast<std::uint32_t>(h_->image.blocks.size()); }

std::vector<Label> VertexHandle::labels() const {
  txn_->require_readable();
  return labels_of(h_->image);
}

bool VertexHandle::has_label(Label label) const { return has_label_entry(h_->image, label); }

void VertexHandle::add_label(Label label) { txn_->add_label(*h_, label); }

void VertexHandle::remove_label(Label label) { txn_->remove_label(*h_, label); }

std::vector<Value> VertexHandle::properties(PropertyType ptype) const {
  txn_->require_readable();
  return txn_->properties(*h_, ptype);
}

std::vector<std::pair<PropertyType, Value>> VertexHandle::all_properties() const {
  txn_->require_readable();
  const auto& catalog = txn_->db().catalog();
  std::vector<std::pair<PropertyType, Value>> out;
  for (const auto& e : h_->image.entries) {
    if (e.marker < kFirstUserId || !catalog.contains(PropertyType{e.marker})) continue;
    out.emplace_back(PropertyType{e.marker}, decode(catalog.info(PropertyType{e.marker}).datatype, e.payload));
  }
  return out;
}

void VertexHandle::add_property(PropertyType ptype, const Value& value) { txn_->add_property(*h_, ptype, value); }

void VertexHandle::update_property(PropertyType ptype, const Value& value) {
  txn_->update_property(*h_, ptype, value);
}

std::size_t VertexHandle::remove_properties(PropertyType ptype) { return txn_->remove_properties(*h_, ptype); }

bool VertexHandle::remove_property(PropertyType ptype, const Value& value) {
  return txn_->remove_property(*h_, ptype, value);
}

std::vector<EdgeUid> VertexHandle::edges(OrientationMask mask, const Constraint* constraint) const {
  return txn_->edges(*h_, mask, constraint);
}

std::vector<GlobalRef> VertexHandle::neighbors(OrientationMask mask, const Constraint* constraint) const {
  const auto uids = txn_->edges(*h_, mask, constraint);
  std::vector<GlobalRef> out;
  out.reserve(uids.size());
  for (const auto& u : uids) {
    const auto n = h_->image.edges[u.offset].neighbor;
    txn_->issue(n);
    out.push_back(n);
  }
  return out;
}

std::size_t VertexHandle::degree(OrientationMask mask) const {
  txn_->require_readable();
  std::size_t n = 0;
  for (const auto& e : h_->image.edges) n += !e.tombstone && (e.orientation & mask);
  return n;
}

void VertexHandle::free() { txn_->free_vertex(*h_); }

// EdgeHandle

std::pair<GlobalRef, GlobalRef> EdgeHandle::vertices() const {
  auto slot = txn_->resolve(uid_);
  const auto e = slot.entry();
  std::pair<GlobalRef, GlobalRef> out;
  if (e.heavy()) {
    const auto& eh = txn_->load(e.holder, ObjectKind::edge);
    if (eh.image.directed) {
      out = {eh.image.origin, eh.image.target};
    } else {
      const auto other = eh.image.origin == slot.base->ref ? eh.image.target : eh.image.origin;
      out = {slot.base->ref, other};
    }
  } else if (e.orientation == kIncoming) {
    out = {e.neighbor, slot.base->ref};
  } else {
    out = {slot.base->ref, e.neighbor};
  }
  txn_->issue(out.first);
  txn_->issue(out.second);
  return out;
}

bool EdgeHandle::directed() const { return txn_->resolve(uid_).entry().orientation != kUndirected; }

bool EdgeHandle::heavyweight() const { return txn_->resolve(uid_).entry().heavy(); }

Orientation EdgeHandle::orientation() const { return txn_->resolve(uid_).entry().orientation; }

std::vector<Label> EdgeHandle::labels() const {
  const auto e = txn_->resolve(uid_).entry();
  if (e.heavy()) return labels_of(txn_->load(e.holder, ObjectKind::edge).image);
  if (e.label == 0) return {};
  return {Label{e.label}};
}

bool EdgeHandle::has_label(Label label) const {
  const auto l = labels();
  return std::find(l.begin(), l.end(), label) != l.end();
}

void EdgeHandle::add_label(Label label) {
  auto slot = txn_->resolve(uid_);
  const auto e = slot.entry();
  if (!txn_->db().catalog().contains(label)) throw Error(Errc::not_found, "unknown label");
  if (!e.heavy() && e.label == 0) {
    txn_->ensure_writable(*slot.base);
    auto& nb = txn_->neighbor_for_write(*slot.base, e.neighbor);
    const auto m = txn_->find_mirror(*slot.base, slot.offset, nb);
    slot.base->image.edges[slot.offset].label = label.id;
    nb.image.edges[m].label = label.id;
    return;
  }
  if (!e.heavy() && e.label == label.id) throw Error(Errc::invalid_argument, "label already present");
  txn_->add_label(txn_->escalate(slot), label);
}

void EdgeHandle::remove_label(Label label) {
  auto slot = txn_->resolve(uid_);
  const auto e = slot.entry();
  if (e.heavy()) {
    auto& eh = txn_->load(e.holder, ObjectKind::edge);
    txn_->remove_label(eh, label);
    return;
  }
  txn_->ensure_writable(*slot.base);
  if (e.label != label.id) throw Error(Errc::not_found, "label not present");
  auto& nb = txn_->neighbor_for_write(*slot.base, e.neighbor);
  const auto m = txn_->find_mirror(*slot.base, slot.offset, nb);
  slot.base->image.edges[slot.offset].label = 0;
  nb.image.edges[m].label = 0;
}

std::vector<Value> EdgeHandle::properties(PropertyType ptype) const {
  const auto e = txn_->resolve(uid_).entry();
  if (!e.heavy()) {
    txn_->db().catalog().info(ptype);
    return {};
  }
  return txn_->properties(txn_->load(e.holder, ObjectKind::edge), ptype);
}

void EdgeHandle::add_property(PropertyType ptype, const Value& value) {
  txn_->db().catalog().check_value(ptype, value);
  txn_->add_property(txn_->escalate(txn_->resolve(uid_)), ptype, value);
}

void EdgeHandle::update_property(PropertyType ptype, const Value& value) {
  txn_->db().catalog().check_value(ptype, value);
  txn_->update_property(txn_->escalate(txn_->resolve(uid_)), ptype, value);
}

std::size_t EdgeHandle::remove_properties(PropertyType ptype) {
  const auto e = txn_->resolve(uid_).entry();
  if (!e.heavy()) {
    txn_->db().catalog().info(ptype);
    return 0;
  }
  return txn_->remove_properties(txn_->load(e.holder, ObjectKind::edge), ptype);
}

void EdgeHandle::free() { txn_->free_edge(txn_->resolve(uid_)); }

// Transaction

Transaction::Transaction(std::unique_ptr<detail::TxnImpl> impl) : impl_(std::move(impl)) {}
Transaction::Transaction(Transaction&&) noexcept = default;
Transaction& Transaction::operator=(Transaction&&) noexcept = default;
Transaction::~Transaction() = default;

TxnMode Transaction::mode() const { return impl_->mode(); }
TxnKind Transaction::kind() const { return impl_->kind(); }
TxnStatus Transaction::status() const { return impl_->status(); }
Database& Transaction::database() const { return impl_->db(); }

VertexHandle Transaction::create_vertex(std::span<const std::byte> app_id, std::optional<rma::RankId> placement) {
  return VertexHandle(impl_.get(), &impl_->create_vertex(app_id, placement));
}

VertexHandle Transaction::create_vertex(std::string_view app_id, std::optional<rma::RankId> placement) {
  return create_vertex(as_bytes(app_id), placement);
}

VertexHandle Transaction::associate_vertex(GlobalRef ref) {
  return VertexHandle(impl_.get(), &impl_->load(ref, ObjectKind::vertex));
}

std::optional<GlobalRef> Transaction::find_vertex(std::optional<Label> label, std::span<const std::byte> app_id) {
  return impl_->find_vertex(label, app_id);
}

GlobalRef Transaction::translate_vertex_id(std::optional<Label> label, std::span<const std::byte> app_id) {
  auto r = impl_->find_vertex(label, app_id);
  if (!r) throw Error(Errc::not_found, "no vertex with this application id");
  return *r;
}

GlobalRef Transaction::translate_vertex_id(std::optional<Label> label, std::string_view app_id) {
  return translate_vertex_id(label, as_bytes(app_id));
}

EdgeUid Transaction::create_edge(VertexHandle origin, VertexHandle target, bool directed, std::optional<Label> label) {
  if (origin.txn_ != impl_.get() || target.txn_ != impl_.get()) {
    throw Error(Errc::invalid_argument, "edge endpoints belong to a different transaction");
  }
  return impl_->create_edge(*origin.h_, *target.h_, directed, label);
}

EdgeHandle Transaction::associate_edge(EdgeUid uid) {
  auto slot = impl_->resolve(uid);
  if (slot.entry().heavy()) impl_->load(slot.entry().holder, ObjectKind::edge);
  return EdgeHandle(impl_.get(), uid);
}

std::vector<GlobalRef> Transaction::local_vertices_of_index(std::uint32_t index, const Constraint* constraint) {
  return impl_->local_vertices_of_index(index, constraint);
}

void Transaction::append_half_edge(VertexHandle vertex, GlobalRef neighbor, Orientation orientation,
                                   std::uint32_t label) {
  if (vertex.txn_ != impl_.get()) throw Error(Errc::invalid_argument, "vertex belongs to a different transaction");
  impl_->ensure_writable(*vertex.h_);
  vertex.h_->image.edges.push_back({neighbor, kNullRef, label, orientation, false});
  impl_->fit(*vertex.h_);
}

Outcome Transaction::close(Decision decision) { return impl_->close(decision); }

}  // namespace gdi
