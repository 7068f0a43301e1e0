#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gdi/catalog.hpp"
#include "gdi/constraint.hpp"
#include "gdi/global_ref.hpp"
#include "gdi/layout.hpp"
#include "gdi/value.hpp"

namespace gdi {

class Database;

enum class TxnMode { read, write };
enum class TxnKind { local, collective };
enum class TxnStatus { open, failed, committed, aborted };
enum class Decision { commit, abort };
enum class Outcome { committed, aborted };

// Identifies a lightweight edge entry: the vertex storing it and the entry's
// position in that vertex's edge array. Both endpoints store an entry, so one
// edge has two EdgeUids.
struct EdgeUid {
  GlobalRef vertex;
  std::uint32_t offset = 0;
  friend bool operator==(const EdgeUid&, const EdgeUid&) = default;
  friend auto operator<=>(const EdgeUid&, const EdgeUid&) = default;
};

namespace detail {
class TxnImpl;
struct Holder;
}  // namespace detail

class VertexHandle {
 public:
  VertexHandle() = default;

  GlobalRef ref() const;
  std::vector<std::byte> app_id() const;
  bool deleted() const;
  std::uint32_t block_count() const;

  std::vector<Label> labels() const;
  bool has_label(Label label) const;
  void add_label(Label label);
  void remove_label(Label label);

  std::vector<Value> properties(PropertyType ptype) const;
  std::vector<std::pair<PropertyType, Value>> all_properties() const;
  void add_property(PropertyType ptype, const Value& value);
  // Replaces every entry of ptype with a single entry holding value.
  void update_property(PropertyType ptype, const Value& value);
  // Returns the number of entries removed.
  std::size_t remove_properties(PropertyType ptype);
  bool remove_property(PropertyType ptype, const Value& value);

  std::vector<EdgeUid> edges(OrientationMask mask, const Constraint* constraint = nullptr) const;
  std::vector<GlobalRef> neighbors(OrientationMask mask, const Constraint* constraint = nullptr) const;
  std::size_t degree(OrientationMask mask) const;

  // Deletes the vertex and all incident edges.
  void free();

  explicit operator bool() const { return h_ != nullptr; }

 private:
  friend class Transaction;
  friend class detail::TxnImpl;
  VertexHandle(detail::TxnImpl* txn, detail::Holder* h) : txn_(txn), h_(h) {}
  detail::TxnImpl* txn_ = nullptr;
  detail::Holder* h_ = nullptr;
};

class EdgeHandle {
 public:
  EdgeHandle() = default;

  EdgeUid uid() const { return uid_; }
  // (origin, target); for undirected edges (base vertex, neighbor).
  std::pair<GlobalRef, GlobalRef> vertices() const;
  bool directed() const;
  bool heavyweight() const;
  Orientation orientation() const;

  std::vector<Label> labels() const;
  bool has_label(Label label) const;
  void add_label(Label label);
  void remove_label(Label label);

  std::vector<Value> properties(PropertyType ptype) const;
  void add_property(PropertyType ptype, const Value& value);
  void update_property(PropertyType ptype, const Value& value);
  std::size_t remove_properties(PropertyType ptype);

  void free();

 private:
  friend class Transaction;
  friend class detail::TxnImpl;
  EdgeHandle(detail::TxnImpl* txn, EdgeUid uid) : txn_(txn), uid_(uid) {}
  detail::TxnImpl* txn_ = nullptr;
  EdgeUid uid_;
};

// A transaction is confined to the agent of the rank that started it.
class Transaction {
 public:
  Transaction(Transaction&&) noexcept;
  Transaction& operator=(Transaction&&) noexcept;
  ~Transaction();

  TxnMode mode() const;
  TxnKind kind() const;
  TxnStatus status() const;
  Database& database() const;

  VertexHandle create_vertex(std::span<const std::byte> app_id, std::optional<rma::RankId> placement = std::nullopt);
  VertexHandle create_vertex(std::string_view app_id, std::optional<rma::RankId> placement = std::nullopt);
  VertexHandle associate_vertex(GlobalRef ref);

  // Throws not_found if no committed vertex carries app_id under label (or
  // has no labels at all when label is empty).
  GlobalRef translate_vertex_id(std::optional<Label> label, std::span<const std::byte> app_id);
  GlobalRef translate_vertex_id(std::optional<Label> label, std::string_view app_id);
  std::optional<GlobalRef> find_vertex(std::optional<Label> label, std::span<const std::byte> app_id);

  EdgeUid create_edge(VertexHandle origin, VertexHandle target, bool directed,
                      std::optional<Label> label = std::nullopt);
  EdgeHandle associate_edge(EdgeUid uid);

  // Indexed vertices stored on the calling rank that satisfy constraint.
  std::vector<GlobalRef> local_vertices_of_index(std::uint32_t index, const Constraint* constraint = nullptr);

  // Appends one side of an edge without touching the neighbor. The other
  // side must be appended to the neighbor in the same collective transaction
  // (bulk loading).
  void append_half_edge(VertexHandle vertex, GlobalRef neighbor, Orientation orientation, std::uint32_t label = 0);

  // Local transactions: ends the transaction. Collective transactions: every
  // rank must call; the outcome is agreed upon by all ranks.
  Outcome close(Decision decision);
  Outcome commit() { return close(Decision::commit); }
  Outcome abort() { return close(Decision::abort); }

 private:
  friend class Database;
  explicit Transaction(std::unique_ptr<detail::TxnImpl> impl);
  std::unique_ptr<detail::TxnImpl> impl_;
};

}  // namespace gdi
