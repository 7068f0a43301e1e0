#pragma once

#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gdi/database.hpp"
#include "gdi/error.hpp"
#include "gdi/transaction.hpp"

namespace gdi::detail {

struct Holder {
  GlobalRef ref;
  ObjectImage image;  // image.blocks[0] == ref
  std::vector<std::byte> original;
  std::size_t original_used = 0;
  std::vector<GlobalRef> original_blocks;
  std::vector<std::uint64_t> original_keys;
  std::vector<char> original_member;
  bool is_new = false;
  bool deleted = false;
  bool dirty = false;
  bool locked = false;
};

class TxnImpl {
 public:
  TxnImpl(Database& db, TxnMode mode, TxnKind kind);
  ~TxnImpl();
  TxnImpl(const TxnImpl&) = delete;
  TxnImpl& operator=(const TxnImpl&) = delete;

  Database& db() { return db_; }
  TxnMode mode() const { return mode_; }
  TxnKind kind() const { return kind_; }
  TxnStatus status() const { return status_; }

  Holder& load(GlobalRef ref, ObjectKind kind);
  Holder& create_vertex(std::span<const std::byte> app_id, std::optional<rma::RankId> placement);
  std::optional<GlobalRef> find_vertex(std::optional<Label> label, std::span<const std::byte> app_id);

  // Takes the write lock if needed and marks h dirty.
  void ensure_writable(Holder& h);
  // Acquires blocks until the image fits.
  void fit(Holder& h);
  void require_readable() const;

  // Attribute operations shared by vertex and edge holders.
  void add_label(Holder& h, Label label);
  void remove_label(Holder& h, Label label);
  std::vector<Value> properties(const Holder& h, PropertyType ptype) const;
  void add_property(Holder& h, PropertyType ptype, const Value& value);
  void update_property(Holder& h, PropertyType ptype, const Value& value);
  std::size_t remove_properties(Holder& h, PropertyType ptype);
  bool remove_property(Holder& h, PropertyType ptype, const Value& value);

  std::vector<EdgeUid> edges(Holder& h, OrientationMask mask, const Constraint* constraint);
  bool edge_matches(Holder& h, std::uint32_t offset, const Constraint& constraint);
  EdgeUid create_edge(Holder& origin, Holder& target, bool directed, std::optional<Label> label);
  void free_vertex(Holder& h);

  struct EdgeSlot {
    Holder* base;
    std::uint32_t offset;
    const LightEdge& entry() const { return base->image.edges[offset]; }
  };
  EdgeSlot resolve(EdgeUid uid);
  std::uint32_t find_mirror(Holder& base, std::uint32_t offset, Holder& neighbor);
  Holder& neighbor_for_write(Holder& base, GlobalRef neighbor);
  Holder& escalate(EdgeSlot slot);
  void free_edge(EdgeSlot slot);

  std::vector<GlobalRef> local_vertices_of_index(std::uint32_t index, const Constraint* constraint);
  void issue(GlobalRef ref) { issued_.insert(ref); }

  Outcome close(Decision decision);

 private:
  [[noreturn]] void fail(Errc code, const std::string& what);
  void take_lock(GlobalRef ref, LockMode mode, std::uint32_t* incarnation);
  GlobalRef acquire_block(rma::RankId preferred);
  std::vector<char> memberships(const ObjectImage& image) const;
  bool prepare();
  void finish();
  void rollback();

  Database& db_;
  TxnMode mode_;
  TxnKind kind_;
  TxnStatus status_ = TxnStatus::open;
  std::unordered_map<GlobalRef, std::unique_ptr<Holder>> vertices_;
  std::unordered_map<GlobalRef, std::unique_ptr<Holder>> edges_;
  std::vector<std::pair<GlobalRef, LockMode>> locks_;
  std::unordered_set<GlobalRef> new_blocks_;
  std::vector<GlobalRef> dirty_blocks_;
  std::unordered_set<GlobalRef> issued_;
  std::vector<std::pair<DhtTable*, std::uint64_t>> inserted_;
};

}  // namespace gdi::detail
