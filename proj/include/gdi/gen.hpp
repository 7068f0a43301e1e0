#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdi/bulk.hpp"
#include "gdi/database.hpp"
#include "json.hpp"

namespace gdi {

struct LabelRule {
  std::string label;
  double probability = 1.0;
};

// distribution: "uniform" for u64/f64 (range [min, max)); utf8 values are
// random strings of `length` characters; multi-entity types get 1..3 entries.
struct PropertyRule {
  std::string ptype;
  double probability = 0.5;
  double min = 0;
  double max = 1000;
  std::uint32_t length = 16;
};

struct GenSpec {
  std::uint32_t scale = 10;
  std::uint32_t edge_factor = 16;
  std::uint32_t labels = 20;
  std::uint32_t ptypes = 13;
  std::uint64_t seed = 1;
  // Empty: every vertex gets one label drawn uniformly from the catalog.
  // Otherwise each rule applies independently and a vertex left without a
  // label gets the first rule's label.
  std::vector<LabelRule> label_rules;
  // Overrides for the default per-type rules, matched by name.
  std::vector<PropertyRule> property_rules;
  std::uint64_t chunk = 1u << 13;

  std::uint64_t vertices() const { return std::uint64_t{1} << scale; }
  std::uint64_t target_edges() const { return vertices() * edge_factor; }

  static GenSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct GenReport {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::vector<std::uint64_t> vertices_per_rank;
  std::vector<std::uint64_t> edges_per_rank;
  std::uint64_t candidates = 0;
  std::uint64_t self_loops = 0;
  std::uint64_t duplicates = 0;
  std::uint32_t rounds = 0;
  std::string dedup_policy;

  nlohmann::json to_json() const;
};

// Names of the generated catalog entries.
std::string gen_label_name(std::uint32_t i);
std::string gen_ptype_name(std::uint32_t i);

// Collective. Creates the catalog and returns the edges owned by the calling
// rank: exactly target_edges() distinct undirected pairs without self loops,
// identical for every rank count. An edge is owned by the owner of its
// smaller endpoint.
std::vector<BulkEdge> kronecker_edges(rma::Rank& rank, const GenSpec& spec, GenReport* report = nullptr);

// Collective. Populates an empty database.
GenReport generate(Database& db, const GenSpec& spec, std::vector<GlobalRef>* owned_refs = nullptr);

// Catalog positions (for gen_label_name) of the labels assigned to vertex
// id, ascending. Never empty.
std::vector<std::uint32_t> gen_vertex_labels(const GenSpec& spec, std::uint64_t id);

}  // namespace gdi
