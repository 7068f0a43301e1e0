#include "gdi/bulk.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gdi/error.hpp"

namespace gdi {

namespace {

struct HalfEdge {
  std::uint64_t local;
  GlobalRef neighbor;
  Orientation orientation;
  std::uint32_t label;
};

std::uint64_t chunks_needed(rma::Rank& rank, std::uint64_t items, std::uint64_t chunk) {
  return rank.allreduce((items + chunk - 1) / chunk, rma::ReduceOp::max);
}

void commit_or_throw(Transaction& t, const char* what) {
  if (t.commit() != Outcome::committed) throw Error(Errc::transaction_failed, std::string(what) + " aborted");
}

}  // namespace

std::string bulk_app_id(std::uint64_t id) { return std::to_string(id); }

rma::RankId bulk_owner(std::uint64_t id, std::uint32_t ranks) { return static_cast<rma::RankId>(id % ranks); }

BulkReport bulk_load(Database& db, std::uint64_t n, std::span<const BulkEdge> local_edges, const BulkOptions& options,
                     std::vector<GlobalRef>* owned_refs) {
  auto& rank = db.rank();
  const auto me = db.rank_id();
  const auto P = db.ranks();
  const auto chunk = std::max<std::uint64_t>(options.chunk, 1);
  const std::uint64_t owned = n > me ? (n - me + P - 1) / P : 0;

  std::vector<GlobalRef> refs;
  refs.reserve(owned);
  const auto vchunks = chunks_needed(rank, owned, chunk);
  for (std::uint64_t c = 0; c < vchunks; ++c) {
    auto t = db.start_collective_transaction(TxnMode::write);
    const auto end = std::min(owned, (c + 1) * chunk);
    for (std::uint64_t k = c * chunk; k < end; ++k) {
      const auto id = me + k * P;
      auto v = t.create_vertex(bulk_app_id(id), me);
      if (options.decorate) options.decorate(id, v);
      refs.push_back(v.ref());
    }
    commit_or_throw(t, "bulk vertex creation");
  }

  for (const auto& e : local_edges) {
    if (e.u >= n || e.v >= n) throw Error(Errc::invalid_argument, "edge endpoint out of range");
  }
  std::vector<std::vector<std::uint64_t>> out(P);
  for (const auto& e : local_edges) {
    auto& buf = out[bulk_owner(e.v, P)];
    buf.insert(buf.end(), {e.u, e.v, e.label});
  }
  auto in = rank.alltoallv(out);
  for (auto& b : out) b.clear();
  for (std::size_t i = 0; i < in.size(); i += 3) {
    const auto u = in[i], v = in[i + 1], label = in[i + 2];
    auto& buf = out[bulk_owner(u, P)];
    buf.insert(buf.end(), {u, v, refs[v / P].bits(), label});
  }
  in = rank.alltoallv(out);
  for (auto& b : out) b.clear();

  const auto out_orientation = options.directed ? Orientation::kOutgoing : Orientation::kUndirected;
  const auto in_orientation = options.directed ? Orientation::kIncoming : Orientation::kUndirected;
  std::vector<HalfEdge> halves;
  for (std::size_t i = 0; i < in.size(); i += 4) {
    const auto u = in[i], v = in[i + 1];
    const auto label = static_cast<std::uint32_t>(in[i + 3]);
    halves.push_back({u / P, GlobalRef::from_bits(in[i + 2]), out_orientation, label});
    auto& buf = out[bulk_owner(v, P)];
    buf.insert(buf.end(), {v, refs[u / P].bits(), label});
  }
  in = rank.alltoallv(out);
  for (std::size_t i = 0; i < in.size(); i += 3) {
    halves.push_back({in[i] / P, GlobalRef::from_bits(in[i + 1]), in_orientation, static_cast<std::uint32_t>(in[i + 2])});
  }
  std::stable_sort(halves.begin(), halves.end(), [](const HalfEdge& a, const HalfEdge& b) { return a.local < b.local; });

  const auto echunks = chunks_needed(rank, owned, chunk);
  std::size_t pos = 0;
  for (std::uint64_t c = 0; c < echunks; ++c) {
    auto t = db.start_collective_transaction(TxnMode::write);
    const auto end = std::min(owned, (c + 1) * chunk);
    while (pos < halves.size() && halves[pos].local < end) {
      auto v = t.associate_vertex(refs[halves[pos].local]);
      const auto local = halves[pos].local;
      for (; pos < halves.size() && halves[pos].local == local; ++pos) {
        t.append_half_edge(v, halves[pos].neighbor, halves[pos].orientation, halves[pos].label);
      }
    }
    commit_or_throw(t, "bulk edge insertion");
  }

  BulkReport rep;
  rep.vertices_per_rank = rank.allgather(owned);
  rep.edges_per_rank = rank.allgather(halves.size());
  rep.vertices = n;
  rep.edges = rank.allreduce(local_edges.size(), rma::ReduceOp::sum);
  if (owned_refs) *owned_refs = std::move(refs);
  return rep;
}

std::vector<BulkEdge> read_edge_list(Database& db, const std::string& path, std::uint64_t* max_id) {
  std::ifstream f(path);
  std::uint64_t ok = f ? 1 : 0;
  if (db.rank().allreduce(ok, rma::ReduceOp::min) == 0) throw Error(Errc::io, "cannot open " + path);
  std::vector<BulkEdge> edges;
  std::uint64_t top = 0, seen = 0, line_no = 0;
  std::string line;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    BulkEdge e;
    std::string label;
    if (!(in >> e.u >> e.v)) throw Error(Errc::invalid_argument, path + ":" + std::to_string(line_no) + ": bad edge");
    top = std::max({top, e.u + 1, e.v + 1});
    if (in >> label) e.label = db.label_from_name(label).id;
    if (seen++ % db.ranks() == db.rank_id()) edges.push_back(e);
  }
  if (max_id) *max_id = top;
  return edges;
}

Value value_from_json(Datatype type, const nlohmann::json& j) {
  auto many = [&]<typename T>(std::vector<T>) {
    std::vector<T> out;
    if (j.is_array()) {
      for (const auto& x : j) out.push_back(x.get<T>());
    } else {
      out.push_back(j.get<T>());
    }
    return Value(std::move(out));
  };
  switch (type) {
    case Datatype::u64: return many(std::vector<std::uint64_t>{});
    case Datatype::i64: return many(std::vector<std::int64_t>{});
    case Datatype::f64: return many(std::vector<double>{});
    case Datatype::utf8: return j.get<std::string>();
    case Datatype::bytes: {
      const auto s = j.get<std::string>();
      const auto b = std::as_bytes(std::span(s.data(), s.size()));
      return std::vector<std::byte>(b.begin(), b.end());
    }
  }
  throw Error(Errc::invalid_argument, "unknown datatype");
}

void apply_vertex_file(Database& db, const std::string& path, const std::vector<GlobalRef>& owned_refs) {
  std::ifstream f(path);
  std::uint64_t ok = f ? 1 : 0;
  if (db.rank().allreduce(ok, rma::ReduceOp::min) == 0) throw Error(Errc::io, "cannot open " + path);
  const auto doc = nlohmann::json::parse(f);
  const auto P = db.ranks();
  auto t = db.start_collective_transaction(TxnMode::write);
  std::uint64_t failed = 0;
  std::string reason;
  try {
    for (const auto& item : doc) {
      const auto id = item.at("id").get<std::uint64_t>();
      if (bulk_owner(id, P) != db.rank_id()) continue;
      if (id / P >= owned_refs.size()) throw Error(Errc::not_found, "vertex " + std::to_string(id) + " does not exist");
      auto v = t.associate_vertex(owned_refs[id / P]);
      const auto labels = item.value("labels", nlohmann::json::array());
      const auto props = item.value("properties", nlohmann::json::object());
      for (const auto& l : labels) {
        v.add_label(db.label_from_name(l.get<std::string>()));
      }
      for (const auto& [name, val] : props.items()) {
        const auto p = db.property_type_from_name(name);
        v.add_property(p, value_from_json(db.catalog().info(p).datatype, val));
      }
    }
  } catch (const std::exception& e) {
    failed = 1;
    reason = e.what();
  }
  const auto outcome = t.close(failed ? Decision::abort : Decision::commit);
  if (outcome != Outcome::committed) {
    throw Error(Errc::invalid_argument, "vertex file rejected" + (reason.empty() ? "" : ": " + reason));
  }
}

}  // namespace gdi
