#pragma once

// Sequential reference algorithms over a gathered copy of the graph.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "gdi/bench.hpp"

namespace oracle {

struct Snapshot {
  std::vector<std::uint64_t> vertices;  // sorted ref bits
  std::map<std::uint64_t, std::vector<std::uint64_t>> adj;  // every stored neighbor, both orientations
};

// Collective.
inline Snapshot snapshot(gdi::Database& db) {
  std::vector<std::uint64_t> words;
  auto t = db.start_collective_transaction(gdi::TxnMode::read);
  for (auto r : db.local_vertices()) {
    const auto ns = t.associate_vertex(r).neighbors(gdi::kAnyOrientation);
    words.push_back(r.bits());
    words.push_back(ns.size());
    for (auto n : ns) words.push_back(n.bits());
  }
  t.commit();
  const auto all = db.rank().allgatherv(words);
  Snapshot s;
  for (std::size_t i = 0; i < all.size();) {
    const auto v = all[i], d = all[i + 1];
    s.vertices.push_back(v);
    s.adj[v].assign(all.begin() + static_cast<std::ptrdiff_t>(i + 2), all.begin() + static_cast<std::ptrdiff_t>(i + 2 + d));
    i += 2 + d;
  }
  std::sort(s.vertices.begin(), s.vertices.end());
  return s;
}

inline std::map<std::uint64_t, std::uint64_t> bfs(const Snapshot& s, std::uint64_t root, std::uint64_t limit = ~0ull) {
  std::map<std::uint64_t, std::uint64_t> depth{{root, 0}};
  std::deque<std::uint64_t> q{root};
  while (!q.empty()) {
    const auto v = q.front();
    q.pop_front();
    if (depth[v] == limit) continue;
    for (auto n : s.adj.at(v)) {
      if (depth.emplace(n, depth[v] + 1).second) q.push_back(n);
    }
  }
  return depth;
}

inline std::map<std::uint64_t, double> pagerank(const Snapshot& s, int iters, double d) {
  const double N = static_cast<double>(s.vertices.size());
  std::map<std::uint64_t, double> pr;
  for (auto v : s.vertices) pr[v] = 1.0 / N;
  for (int it = 0; it < iters; ++it) {
    double dangling = 0;
    std::map<std::uint64_t, double> acc;
    for (auto v : s.vertices) {
      const auto& ns = s.adj.at(v);
      if (ns.empty()) {
        dangling += pr[v];
        continue;
      }
      for (auto n : ns) acc[n] += pr[v] / static_cast<double>(ns.size());
    }
    for (auto v : s.vertices) pr[v] = (1 - d) / N + d * (acc[v] + dangling / N);
  }
  return pr;
}

inline std::map<std::uint64_t, std::uint64_t> wcc(const Snapshot& s) {
  std::map<std::uint64_t, std::uint64_t> comp;
  for (auto v : s.vertices) {
    if (comp.count(v)) continue;
    const auto reach = bfs(s, v);
    for (const auto& [u, d] : reach) comp[u] = v;
  }
  return comp;
}

inline std::map<std::uint64_t, std::uint64_t> cdlp(const Snapshot& s, int iters) {
  std::map<std::uint64_t, std::uint64_t> label;
  for (auto v : s.vertices) label[v] = v;
  for (int it = 0; it < iters; ++it) {
    auto next = label;
    for (auto v : s.vertices) {
      std::map<std::uint64_t, int> freq;
      for (auto n : s.adj.at(v)) ++freq[label[n]];
      int best = 0;
      for (const auto& [l, c] : freq) {
        if (c > best) {
          best = c;
          next[v] = l;
        }
      }
    }
    label = next;
  }
  return label;
}

inline std::map<std::uint64_t, double> lcc(const Snapshot& s) {
  std::map<std::uint64_t, std::set<std::uint64_t>> nb;
  for (auto v : s.vertices) {
    for (auto n : s.adj.at(v)) {
      if (n != v) nb[v].insert(n);
    }
  }
  std::map<std::uint64_t, double> out;
  for (auto v : s.vertices) {
    const auto& N = nb[v];
    const double d = static_cast<double>(N.size());
    std::uint64_t links = 0;
    for (auto a : N) {
      for (auto b : N) {
        if (a < b && nb[a].count(b)) ++links;
      }
    }
    out[v] = N.size() < 2 ? 0.0 : 2.0 * static_cast<double>(links) / (d * (d - 1));
  }
  return out;
}

// Collective. Feature vectors of every vertex, keyed by ref bits.
inline std::map<std::uint64_t, std::vector<double>> features(gdi::Database& db, gdi::PropertyType feature, std::uint32_t dim) {
  std::vector<std::uint64_t> words;
  auto t = db.start_collective_transaction(gdi::TxnMode::read);
  for (auto r : db.local_vertices()) {
    words.push_back(r.bits());
    const auto vals = t.associate_vertex(r).properties(feature);
    for (double x : std::get<std::vector<double>>(vals.at(0))) words.push_back(std::bit_cast<std::uint64_t>(x));
  }
  t.commit();
  const auto all = db.rank().allgatherv(words);
  std::map<std::uint64_t, std::vector<double>> out;
  for (std::size_t i = 0; i < all.size(); i += dim + 1) {
    auto& x = out[all[i]];
    for (std::uint32_t k = 0; k < dim; ++k) x.push_back(std::bit_cast<double>(all[i + 1 + k]));
  }
  return out;
}

// Collective. The BI count by scanning every vertex and edge without the index.
inline std::uint64_t bi_full_scan(gdi::Database& db, const gdi::bench::BiSchema& s) {
  std::uint64_t local = 0;
  auto t = db.start_collective_transaction(gdi::TxnMode::read);
  for (auto r : db.local_vertices()) {
    auto v = t.associate_vertex(r);
    if (!v.has_label(s.person)) continue;
    const auto age = v.properties(s.age);
    if (age.empty() || gdi::as_u64(age[0]) <= 30) continue;
    for (auto e : v.edges(gdi::Orientation::kOutgoing)) {
      auto eh = t.associate_edge(e);
      if (!eh.has_label(s.own)) continue;
      auto o = t.associate_vertex(eh.vertices().second);
      const auto color = o.properties(s.color);
      if (o.has_label(s.car) && !color.empty() && std::get<std::string>(color[0]) == "red") ++local;
    }
  }
  t.commit();
  return db.rank().allreduce(local, gdi::rma::ReduceOp::sum);
}

}  // namespace oracle
