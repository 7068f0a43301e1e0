#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdi/database.hpp"

namespace gdi {

// Vertex i of a bulk-loaded graph has application id to_string(i) and lives
// on rank i % P.
std::string bulk_app_id(std::uint64_t id);
rma::RankId bulk_owner(std::uint64_t id, std::uint32_t ranks);

struct BulkEdge {
  std::uint64_t u = 0;
  std::uint64_t v = 0;
  std::uint32_t label = 0;
  friend bool operator==(const BulkEdge&, const BulkEdge&) = default;
};

struct BulkOptions {
  bool directed = true;
  // Vertices per collective transaction on each rank.
  std::uint64_t chunk = 1u << 13;
  // Called for every vertex right after creation, on its owner.
  std::function<void(std::uint64_t id, VertexHandle& v)> decorate;
};

struct BulkReport {
  std::uint64_t vertices = 0;
  std::uint64_t edges = 0;
  std::vector<std::uint64_t> vertices_per_rank;
  std::vector<std::uint64_t> edges_per_rank;  // half-edges stored on each rank
};

// Collective. Creates vertices 0..n-1 and the edges each rank passes in
// local_edges. Returns the refs of the vertices owned by the calling rank,
// indexed by id / P, through owned_refs when given.
BulkReport bulk_load(Database& db, std::uint64_t n, std::span<const BulkEdge> local_edges,
                     const BulkOptions& options = {}, std::vector<GlobalRef>* owned_refs = nullptr);

// Collective. Reads "u v [label]" lines; every rank reads the file and keeps
// its share of the lines. Labels must already exist. Lines starting with '#'
// are skipped.
std::vector<BulkEdge> read_edge_list(Database& db, const std::string& path, std::uint64_t* max_id);

// Collective. Applies a vertex file [{"id": n, "labels": [..], "properties": {name: value}}]
// to the vertices owned by the calling rank; owned_refs as returned by bulk_load.
void apply_vertex_file(Database& db, const std::string& path, const std::vector<GlobalRef>& owned_refs);

// Converts a JSON scalar or array to a value of the given datatype.
Value value_from_json(Datatype type, const nlohmann::json& j);

}  // namespace gdi
