#include "gdi/gen.hpp"

#include <algorithm>
#include <unordered_map>

#include "gdi/error.hpp"

namespace gdi {

namespace {

constexpr double kA = 0.57, kB = 0.19, kC = 0.19;
constexpr char kSchemaPattern[] = "ufsmufsmufsus";
constexpr std::uint32_t kMaxRounds = 64;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream: the value depends only on its coordinates.
std::uint64_t draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0) {
  return mix(mix(mix(seed ^ mix(stream)) ^ a) + b);
}

double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

enum : std::uint64_t { kEdgeStream = 1, kScrambleStream, kLabelStream, kPropStream };

struct Scrambler {
  std::uint32_t s;
  std::uint64_t mask, add, half;
  Scrambler(std::uint32_t scale, std::uint64_t seed)
      : s(scale),
        mask(scale == 64 ? ~0ull : (1ull << scale) - 1),
        add(draw(seed, kScrambleStream, 0)),
        half((scale + 1) / 2) {}
  std::uint64_t operator()(std::uint64_t x) const {
    x = (x + add) & mask;
    x = (x * 0x9E3779B97F4A7C15ull) & mask;
    x ^= x >> half;
    x = (x * 0xBF58476D1CE4E5B9ull) & mask;
    x ^= x >> half;
    return x;
  }
};

std::pair<std::uint64_t, std::uint64_t> kronecker_pair(const GenSpec& spec, const Scrambler& scramble, std::uint64_t k) {
  std::uint64_t u = 0, v = 0;
  for (std::uint32_t level = 0; level < spec.scale; ++level) {
    const double r = unit(draw(spec.seed, kEdgeStream, k, level));
    std::uint64_t bu = 0, bv = 0;
    if (r < kA) {
    } else if (r < kA + kB) {
      bv = 1;
    } else if (r < kA + kB + kC) {
      bu = 1;
    } else {
      bu = bv = 1;
    }
    u = (u << 1) | bu;
    v = (v << 1) | bv;
  }
  return {scramble(u), scramble(v)};
}

struct TypeRule {
  char cls;
  PropertyRule rule;
};

std::vector<TypeRule> type_rules(const GenSpec& spec) {
  std::vector<TypeRule> out;
  for (std::uint32_t i = 0; i < spec.ptypes; ++i) {
    const char cls = kSchemaPattern[i % 13];
    PropertyRule r;
    r.ptype = gen_ptype_name(i);
    if (cls == 'f') r.max = 1.0;
    out.push_back({cls, r});
  }
  for (const auto& r : spec.property_rules) {
    auto it = std::find_if(out.begin(), out.end(), [&](const TypeRule& t) { return t.rule.ptype == r.ptype; });
    if (it == out.end()) throw Error(Errc::not_found, "property rule names unknown type '" + r.ptype + "'");
    it->rule = r;
  }
  return out;
}

PropertyTypeInfo type_info(char cls, const std::string& name) {
  PropertyTypeInfo info;
  info.name = name;
  info.entity = cls == 'm' ? EntityKind::multi : EntityKind::single;
  switch (cls) {
    case 'u':
      info.datatype = Datatype::u64;
      info.size_kind = SizeKind::fixed;
      info.size_limit = 1;
      break;
    case 'f': info.datatype = Datatype::f64; break;
    case 's':
      info.datatype = Datatype::utf8;
      info.size_kind = SizeKind::max;
      info.size_limit = 32;
      break;
    default: info.datatype = Datatype::u64; break;
  }
  return info;
}

std::vector<Value> property_values(const GenSpec& spec, const TypeRule& t, std::uint32_t index, std::uint64_t id) {
  const auto& r = t.rule;
  auto rnd = [&](std::uint64_t slot) { return draw(spec.seed, kPropStream, id, std::uint64_t{index} << 32 | slot); };
  if (unit(rnd(0)) >= r.probability) return {};
  auto u64 = [&](std::uint64_t slot) {
    const auto lo = static_cast<std::uint64_t>(r.min), hi = static_cast<std::uint64_t>(r.max);
    return u64_value(hi > lo ? lo + rnd(slot) % (hi - lo) : lo);
  };
  switch (t.cls) {
    case 'u': return {u64(1)};
    case 'f': return {f64_value(r.min + unit(rnd(1)) * (r.max - r.min))};
    case 's': {
      std::string s(r.length, 'a');
      for (std::uint32_t i = 0; i < r.length; ++i) s[i] = static_cast<char>('a' + rnd(2 + i) % 26);
      return {utf8_value(std::move(s))};
    }
    default: {
      std::vector<Value> out;
      const auto n = 1 + rnd(1) % 3;
      for (std::uint64_t i = 0; i < n; ++i) out.push_back(u64(2 + i));
      return out;
    }
  }
}

struct Attributes {
  std::vector<Label> labels;
  std::vector<std::pair<PropertyType, Value>> props;
};

}  // namespace

std::string gen_label_name(std::uint32_t i) { return "L" + std::to_string(i); }
std::string gen_ptype_name(std::uint32_t i) { return "p" + std::to_string(i); }

void GenSpec::validate() const {
  if (scale < 1 || scale > 32) throw Error(Errc::invalid_argument, "scale must be in [1, 32]");
  if (edge_factor < 1) throw Error(Errc::invalid_argument, "edge factor must be at least 1");
  if (labels < 1) throw Error(Errc::invalid_argument, "at least one label is required");
  const auto n = vertices();
  if (static_cast<double>(target_edges()) > static_cast<double>(n) * static_cast<double>(n - 1) / 2) {
    throw Error(Errc::invalid_argument, "more edges requested than distinct vertex pairs exist");
  }
  for (const auto& r : label_rules) {
    bool known = false;
    for (std::uint32_t i = 0; i < labels; ++i) known = known || r.label == gen_label_name(i);
    if (!known) throw Error(Errc::not_found, "label rule names unknown label '" + r.label + "'");
  }
  for (const auto& t : type_rules(*this)) {
    if (t.cls == 's' && t.rule.length > 32) throw Error(Errc::invalid_argument, "string length exceeds 32");
  }
}

GenSpec GenSpec::from_json(const nlohmann::json& j) {
  GenSpec s;
  s.scale = j.value("scale", s.scale);
  s.edge_factor = j.value("edge_factor", s.edge_factor);
  s.labels = j.value("labels", s.labels);
  s.ptypes = j.value("ptypes", s.ptypes);
  s.seed = j.value("seed", s.seed);
  s.chunk = j.value("chunk", s.chunk);
  for (const auto& r : j.value("label_rules", nlohmann::json::array())) {
    s.label_rules.push_back({r.at("label").get<std::string>(), r.value("probability", 1.0)});
  }
  for (const auto& r : j.value("property_rules", nlohmann::json::array())) {
    PropertyRule p;
    p.ptype = r.at("ptype").get<std::string>();
    p.probability = r.value("probability", p.probability);
    p.min = r.value("min", p.min);
    p.max = r.value("max", p.max);
    p.length = r.value("length", p.length);
    s.property_rules.push_back(p);
  }
  return s;
}

nlohmann::json GenSpec::to_json() const {
  nlohmann::json j = {{"scale", scale}, {"edge_factor", edge_factor}, {"labels", labels},
                      {"ptypes", ptypes}, {"seed", seed},           {"chunk", chunk}};
  j["label_rules"] = nlohmann::json::array();
  for (const auto& r : label_rules) j["label_rules"].push_back({{"label", r.label}, {"probability", r.probability}});
  j["property_rules"] = nlohmann::json::array();
  for (const auto& r : property_rules) {
    j["property_rules"].push_back(
        {{"ptype", r.ptype}, {"probability", r.probability}, {"min", r.min}, {"max", r.max}, {"length", r.length}});
  }
  return j;
}

nlohmann::json GenReport::to_json() const {
  return {{"n", n},
          {"m", m},
          {"vertices_per_rank", vertices_per_rank},
          {"edges_per_rank", edges_per_rank},
          {"candidates", candidates},
          {"self_loops", self_loops},
          {"duplicates", duplicates},
          {"rounds", rounds},
          {"dedup_policy", dedup_policy}};
}

std::vector<std::uint32_t> gen_vertex_labels(const GenSpec& spec, std::uint64_t id) {
  std::vector<std::uint32_t> out;
  if (spec.label_rules.empty()) {
    out.push_back(static_cast<std::uint32_t>(draw(spec.seed, kLabelStream, id) % spec.labels));
    return out;
  }
  auto index_of = [&](const std::string& name) {
    for (std::uint32_t i = 0; i < spec.labels; ++i) {
      if (gen_label_name(i) == name) return i;
    }
    throw Error(Errc::not_found, "label rule names unknown label '" + name + "'");
  };
  for (std::size_t r = 0; r < spec.label_rules.size(); ++r) {
    if (unit(draw(spec.seed, kLabelStream, id, r + 1)) < spec.label_rules[r].probability) {
      out.push_back(index_of(spec.label_rules[r].label));
    }
  }
  if (out.empty()) out.push_back(index_of(spec.label_rules.front().label));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<BulkEdge> kronecker_edges(rma::Rank& rank, const GenSpec& spec, GenReport* report) {
  spec.validate();
  const auto me = rank.id();
  const auto P = rank.size();
  const auto n = spec.vertices();
  const auto target = spec.target_edges();
  const Scrambler scramble(spec.scale, spec.seed);

  // (min, max) pair -> (first candidate index, original direction flag)
  std::unordered_map<std::uint64_t, std::uint64_t> owned;
  std::uint64_t next = 0, self_loops = 0, duplicates = 0, unique = 0;
  std::uint32_t rounds = 0;
  while (unique < target) {
    if (++rounds > kMaxRounds) throw Error(Errc::resource_exhausted, "edge generation does not converge");
    const auto deficit = target - unique;
    const auto batch = rounds == 1 ? target : deficit + deficit / 8 + 64;
    std::vector<std::vector<std::uint64_t>> out(P);
    for (auto k = next + me; k < next + batch; k += P) {
      const auto [u, v] = kronecker_pair(spec, scramble, k);
      if (u == v) {
        ++self_loops;
        continue;
      }
      auto& buf = out[static_cast<rma::RankId>(std::min(u, v) % P)];
      buf.insert(buf.end(), {k, u, v});
    }
    next += batch;
    const auto in = rank.alltoallv(out);
    for (std::size_t i = 0; i < in.size(); i += 3) {
      const auto k = in[i], u = in[i + 1], v = in[i + 2];
      const auto key = std::min(u, v) * n + std::max(u, v);
      const auto value = k << 1 | (u > v ? 1 : 0);
      auto [it, fresh] = owned.emplace(key, value);
      if (!fresh) {
        ++duplicates;
        it->second = std::min(it->second, value);
      }
    }
    unique = rank.allreduce(owned.size(), rma::ReduceOp::sum);
  }

  // Keep the target edges with the smallest first-candidate index.
  std::uint64_t lo = 0, hi = next;
  auto count_below = [&](std::uint64_t bound) {
    std::uint64_t c = 0;
    for (const auto& [key, value] : owned) c += (value >> 1) < bound;
    return rank.allreduce(c, rma::ReduceOp::sum);
  };
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (count_below(mid + 1) >= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  std::vector<std::pair<std::uint64_t, BulkEdge>> kept;
  for (const auto& [key, value] : owned) {
    if ((value >> 1) > lo) continue;
    const auto a = key / n, b = key % n;
    kept.push_back({value >> 1, (value & 1) ? BulkEdge{b, a, 0} : BulkEdge{a, b, 0}});
  }
  std::sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<BulkEdge> edges;
  edges.reserve(kept.size());
  for (const auto& [k, e] : kept) edges.push_back(e);

  if (report) {
    report->n = n;
    report->m = rank.allreduce(edges.size(), rma::ReduceOp::sum);
    report->candidates = next;
    report->self_loops = rank.allreduce(self_loops, rma::ReduceOp::sum);
    report->duplicates = rank.allreduce(duplicates, rma::ReduceOp::sum);
    report->rounds = rounds;
    report->dedup_policy =
        "self loops dropped; parallel and reciprocal pairs merged keeping the first candidate's direction; "
        "top-up rounds until the target is reached, then the earliest candidates kept";
  }
  return edges;
}

GenReport generate(Database& db, const GenSpec& spec, std::vector<GlobalRef>* owned_refs) {
  spec.validate();
  auto& rank = db.rank();
  std::uint64_t existing = db.local_vertices().size();
  if (rank.allreduce(existing, rma::ReduceOp::sum) != 0) throw Error(Errc::invalid_argument, "database is not empty");

  std::vector<Label> labels;
  for (std::uint32_t i = 0; i < spec.labels; ++i) {
    const auto name = gen_label_name(i);
    auto found = db.catalog().find_label(name);
    labels.push_back(found ? *found : db.create_label(name));
  }
  const auto rules = type_rules(spec);
  std::vector<PropertyType> ptypes;
  for (const auto& t : rules) {
    auto found = db.catalog().find_property_type(t.rule.ptype);
    if (found) {
      ptypes.push_back(*found);
    } else {
      const auto info = type_info(t.cls, t.rule.ptype);
      ptypes.push_back(db.create_property_type(info.name, info.entity, info.datatype, info.size_kind, info.size_limit));
    }
  }
  auto attributes = [&](std::uint64_t id) {
    Attributes a;
    for (auto i : gen_vertex_labels(spec, id)) a.labels.push_back(labels[i]);
    for (std::uint32_t i = 0; i < rules.size(); ++i) {
      for (auto& v : property_values(spec, rules[i], i, id)) a.props.emplace_back(ptypes[i], std::move(v));
    }
    return a;
  };

  GenReport report;
  const auto edges = kronecker_edges(rank, spec, &report);

  const auto P = db.ranks();
  const auto me = db.rank_id();
  const auto n = spec.vertices();
  std::vector<std::vector<std::uint64_t>> out(P);
  for (const auto& e : edges) {
    out[bulk_owner(e.u, P)].push_back(e.u);
    out[bulk_owner(e.v, P)].push_back(e.v);
  }
  const auto endpoints = rank.alltoallv(out);
  const std::uint64_t owned = n > me ? (n - me + P - 1) / P : 0;
  std::vector<std::uint32_t> degree(owned);
  for (auto x : endpoints) ++degree[x / P];
  std::uint64_t blocks = 0;
  for (std::uint64_t k = 0; k < owned; ++k) {
    const auto id = me + k * P;
    const auto a = attributes(id);
    ObjectImage img;
    const auto app = bulk_app_id(id);
    const auto bytes = std::as_bytes(std::span(app.data(), app.size()));
    img.app_id.assign(bytes.begin(), bytes.end());
    img.edges.resize(degree[k]);
    for (auto l : a.labels) img.entries.push_back({kEntryLabel, label_payload(l)});
    for (const auto& [p, v] : a.props) img.entries.push_back({p.id, encode(v)});
    blocks += blocks_needed(img, db.config().block_size);
  }
  const auto worst = rank.allreduce(blocks, rma::ReduceOp::max);
  if (worst > db.config().blocks_per_rank) {
    throw Error(Errc::resource_exhausted, "graph needs " + std::to_string(worst) + " blocks per rank, pool has " +
                                              std::to_string(db.config().blocks_per_rank));
  }

  BulkOptions options;
  options.directed = true;
  options.chunk = spec.chunk;
  options.decorate = [&](std::uint64_t id, VertexHandle& v) {
    const auto a = attributes(id);
    for (auto l : a.labels) v.add_label(l);
    for (const auto& [p, val] : a.props) v.add_property(p, val);
  };
  const auto bulk = bulk_load(db, n, edges, options, owned_refs);
  report.vertices_per_rank = bulk.vertices_per_rank;
  report.edges_per_rank = bulk.edges_per_rank;
  return report;
}

}  // namespace gdi
