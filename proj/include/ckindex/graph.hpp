#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckindex/rational.hpp"

namespace ckindex {

using json = nlohmann::ordered_json;

struct Edge {
  std::string id;
  int src;
  int rng;
};

// Finite directed graph E = (E^0, E^1, r, s). Vertex and edge order follow
// the input document; out/in edge lists are sorted by edge id so every path
// enumeration below is deterministic.
struct DirectedGraph {
  std::vector<std::string> vertices;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> out_edges;  // per vertex, edge indices sorted by id
  std::vector<std::vector<int>> in_edges;

  int vertex_index(const std::string& id) const {
    for (size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i] == id) return static_cast<int>(i);
    throw input_error("unknown vertex '" + id + "'");
  }
  int edge_index(const std::string& id) const {
    for (size_t i = 0; i < edges.size(); ++i)
      if (edges[i].id == id) return static_cast<int>(i);
    throw input_error("unknown edge '" + id + "'");
  }

  int out_degree(int v) const { return static_cast<int>(out_edges[v].size()); }
  int in_degree(int v) const { return static_cast<int>(in_edges[v].size()); }
  bool is_sink(int v) const { return out_edges[v].empty(); }
  bool is_source(int v) const { return in_edges[v].empty(); }

  void finalize() {
    out_edges.assign(vertices.size(), {});
    in_edges.assign(vertices.size(), {});
    for (size_t i = 0; i < edges.size(); ++i) {
      out_edges[edges[i].src].push_back(static_cast<int>(i));
      in_edges[edges[i].rng].push_back(static_cast<int>(i));
    }
    auto by_id = [this](int a, int b) { return edges[a].id < edges[b].id; };
    for (auto& l : out_edges) std::sort(l.begin(), l.end(), by_id);
    for (auto& l : in_edges) std::sort(l.begin(), l.end(), by_id);
  }
};

using GraphPtr = std::shared_ptr<const DirectedGraph>;

inline GraphPtr load_graph(const json& doc) {
  if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges"))
    throw input_error("graph document must be an object with 'vertices' and 'edges'");
  auto g = std::make_shared<DirectedGraph>();
  std::set<std::string> seen;
  for (const auto& v : doc.at("vertices")) {
    if (!v.is_string()) throw input_error("vertex ids must be strings");
    std::string id = v.get<std::string>();
    if (!seen.insert(id).second) throw input_error("duplicate id '" + id + "'");
    g->vertices.push_back(id);
  }
  std::set<std::string> eseen;
  for (const auto& e : doc.at("edges")) {
    if (!e.is_object() || !e.contains("id") || !e.contains("src") || !e.contains("rng"))
      throw input_error("edge records need 'id', 'src', 'rng'");
    std::string id = e.at("id").get<std::string>();
    if (!eseen.insert(id).second || seen.count(id))
      throw input_error("duplicate id '" + id + "'");
    std::string src = e.at("src").get<std::string>();
    std::string rng = e.at("rng").get<std::string>();
    int si = -1, ri = -1;
    for (size_t i = 0; i < g->vertices.size(); ++i) {
      if (g->vertices[i] == src) si = static_cast<int>(i);
      if (g->vertices[i] == rng) ri = static_cast<int>(i);
    }
    if (si < 0) throw input_error("dangling endpoint: src '" + src + "' not declared");
    if (ri < 0) throw input_error("dangling endpoint: rng '" + rng + "' not declared");
    g->edges.push_back(Edge{id, si, ri});
  }
  g->finalize();
  return g;
}

inline GraphPtr load_graph_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    throw input_error(std::string("malformed graph document: ") + e.what());
  }
  return load_graph(doc);
}

inline json graph_to_json(const DirectedGraph& g) {
  json doc;
  doc["vertices"] = g.vertices;
  doc["edges"] = json::array();
  for (const auto& e : g.edges)
    doc["edges"].push_back({{"id", e.id}, {"src", g.vertices[e.src]}, {"rng", g.vertices[e.rng]}});
  return doc;
}

// Convenience constructors used throughout the tests and the CLI docs.
inline GraphPtr make_cuntz_graph(int n) {
  json doc;
  doc["vertices"] = {"v"};
  doc["edges"] = json::array();
  for (int i = 1; i <= n; ++i)
    doc["edges"].push_back({{"id", std::to_string(i)}, {"src", "v"}, {"rng", "v"}});
  return load_graph(doc);
}

inline GraphPtr make_cycle_graph(int n) {
  json doc;
  doc["vertices"] = json::array();
  doc["edges"] = json::array();
  for (int i = 0; i < n; ++i) doc["vertices"].push_back("v" + std::to_string(i));
  for (int i = 0; i < n; ++i)
    doc["edges"].push_back({{"id", "e" + std::to_string(i)},
                            {"src", "v" + std::to_string(i)},
                            {"rng", "v" + std::to_string((i + 1) % n)}});
  return load_graph(doc);
}

inline GraphPtr make_circle_graph() {
  return load_graph_text(R"({"vertices":["v"],"edges":[{"id":"e","src":"v","rng":"v"}]})");
}

// A path is an edge sequence mu_1...mu_k with r(mu_i) = s(mu_{i+1}); a
// length-0 path is a vertex (kept in `src`).
struct Path {
  int src = 0;
  std::vector<int> edges;

  int length() const { return static_cast<int>(edges.size()); }
  bool empty() const { return edges.empty(); }

  int source(const DirectedGraph& g) const {
    return edges.empty() ? src : g.edges[edges.front()].src;
  }
  int range(const DirectedGraph& g) const {
    return edges.empty() ? src : g.edges[edges.back()].rng;
  }

  static Path at_vertex(int v) { return Path{v, {}}; }
  static Path of_edge(const DirectedGraph& g, int e) { return Path{g.edges[e].src, {e}}; }

  bool valid(const DirectedGraph& g) const {
    for (size_t i = 0; i + 1 < edges.size(); ++i)
      if (g.edges[edges[i]].rng != g.edges[edges[i + 1]].src) return false;
    return true;
  }

  std::string str(const DirectedGraph& g) const {
    std::string s;
    for (size_t i = 0; i < edges.size(); ++i) {
      if (i) s += ".";
      s += g.edges[edges[i]].id;
    }
    return s;
  }
};

inline bool path_eq(const Path& a, const Path& b) {
  if (a.edges != b.edges) return false;
  if (a.edges.empty()) return a.src == b.src;
  return true;
}

// Lexicographic order on the edge-id sequence, shorter prefixes first.
inline bool path_id_less(const DirectedGraph& g, const Path& a, const Path& b) {
  size_t n = std::min(a.edges.size(), b.edges.size());
  for (size_t i = 0; i < n; ++i) {
    const std::string& x = g.edges[a.edges[i]].id;
    const std::string& y = g.edges[b.edges[i]].id;
    if (x != y) return x < y;
  }
  if (a.edges.size() != b.edges.size()) return a.edges.size() < b.edges.size();
  return a.src < b.src && a.edges.empty();
}

inline Path path_concat(const DirectedGraph& g, const Path& a, const Path& b) {
  if (a.range(g) != b.source(g)) throw precondition_error("path_concat: not composable");
  Path r = a;
  if (r.edges.empty()) r.src = a.src;
  r.edges.insert(r.edges.end(), b.edges.begin(), b.edges.end());
  return r;
}

// All length-k paths mu with r(mu) = v, in lexicographic edge-id order.
inline std::vector<Path> paths_with_range(const DirectedGraph& g, int v, int k) {
  if (v < 0 || v >= static_cast<int>(g.vertices.size())) throw input_error("unknown vertex");
  if (k < 0) throw precondition_error("paths_with_range: k < 0");
  std::vector<Path> cur{Path::at_vertex(v)};
  for (int step = 0; step < k; ++step) {
    std::vector<Path> next;
    for (const auto& p : cur) {
      int s = p.source(g);
      for (int e : g.in_edges[s]) {
        Path q = Path::of_edge(g, e);
        next.push_back(path_concat(g, q, p));
      }
    }
    cur = std::move(next);
  }
  std::sort(cur.begin(), cur.end(),
            [&](const Path& a, const Path& b) { return path_id_less(g, a, b); });
  return cur;
}

// |v|_k: the number of length-k paths with range v.
inline long path_count_with_range(const DirectedGraph& g, int v, int k) {
  std::vector<long> cnt(g.vertices.size(), 0);
  cnt[v] = 1;
  for (int step = 0; step < k; ++step) {
    std::vector<long> nxt(g.vertices.size(), 0);
    for (size_t w = 0; w < g.vertices.size(); ++w)
      if (cnt[w] > 0)
        for (int e : g.in_edges[w]) nxt[g.edges[e].src] += cnt[w];
    cnt = std::move(nxt);
  }
  long total = 0;
  for (size_t w = 0; w < g.vertices.size(); ++w) total += cnt[w];
  return total;
}

inline std::vector<Path> paths_from(const DirectedGraph& g, int v, int k) {
  std::vector<Path> cur{Path::at_vertex(v)};
  for (int step = 0; step < k; ++step) {
    std::vector<Path> next;
    for (const auto& p : cur) {
      int r = p.range(g);
      for (int e : g.out_edges[r]) next.push_back(path_concat(g, p, Path::of_edge(g, e)));
    }
    cur = std::move(next);
  }
  std::sort(cur.begin(), cur.end(),
            [&](const Path& a, const Path& b) { return path_id_less(g, a, b); });
  return cur;
}

// true iff some path runs from V into w (length 0 allowed when w is in V).
inline bool downstream(const DirectedGraph& g, const std::set<int>& from, int w) {
  std::vector<char> vis(g.vertices.size(), 0);
  std::vector<int> stack;
  for (int v : from) {
    if (v == w) return true;
    vis[v] = 1;
    stack.push_back(v);
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int e : g.out_edges[v]) {
      int r = g.edges[e].rng;
      if (r == w) return true;
      if (!vis[r]) {
        vis[r] = 1;
        stack.push_back(r);
      }
    }
  }
  return false;
}

// Vertices lying on some cycle: v is on a cycle iff v is downstream of one of
// its successors.
inline std::vector<int> cycle_vertices(const DirectedGraph& g) {
  std::vector<int> out;
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    bool on = false;
    for (int e : g.out_edges[v])
      if (downstream(g, {g.edges[e].rng}, static_cast<int>(v))) on = true;
    if (on) out.push_back(static_cast<int>(v));
  }
  return out;
}

// One simple cycle through `start` (which must be a cycle vertex).
inline std::vector<int> extract_cycle(const DirectedGraph& g, int start) {
  std::vector<int> cyc{start};
  int cur = start;
  while (true) {
    bool advanced = false;
    for (int e : g.out_edges[cur]) {
      int r = g.edges[e].rng;
      if (r == start) return cyc;
      if (downstream(g, {r}, start) &&
          std::find(cyc.begin(), cyc.end(), r) == cyc.end()) {
        cyc.push_back(r);
        cur = r;
        advanced = true;
        break;
      }
    }
    if (!advanced) return cyc;  // should not happen on a cycle vertex
  }
}

struct StructuralReport {
  bool row_finite = true;    // finite graphs are trivially row-finite
  bool locally_finite = true;
  bool has_sources = false;
  bool has_sinks = false;
  bool every_loop_has_no_exit = true;
  std::vector<int> sources, sinks;
  std::vector<int> loop_exit_vertices;  // cycle vertices with out-degree >= 2
};

inline StructuralReport structural_report(const DirectedGraph& g) {
  StructuralReport r;
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (g.is_source(static_cast<int>(v))) r.sources.push_back(static_cast<int>(v));
    if (g.is_sink(static_cast<int>(v))) r.sinks.push_back(static_cast<int>(v));
  }
  r.has_sources = !r.sources.empty();
  r.has_sinks = !r.sinks.empty();
  for (int v : cycle_vertices(g))
    if (g.out_degree(v) >= 2) r.loop_exit_vertices.push_back(v);
  r.every_loop_has_no_exit = r.loop_exit_vertices.empty();
  return r;
}

inline json structural_report_json(const DirectedGraph& g) {
  StructuralReport r = structural_report(g);
  auto names = [&](const std::vector<int>& vs) {
    json a = json::array();
    for (int v : vs) a.push_back(g.vertices[v]);
    return a;
  };
  return json{{"row_finite", r.row_finite},
              {"locally_finite", r.locally_finite},
              {"has_sources", r.has_sources},
              {"has_sinks", r.has_sinks},
              {"every_loop_has_no_exit", r.every_loop_has_no_exit},
              {"sources", names(r.sources)},
              {"sinks", names(r.sinks)},
              {"loop_exit_vertices", names(r.loop_exit_vertices)}};
}

struct SingleEntryResult {
  bool single_entry = false;
  bool connected = false;
  int nloop = 0;  // N when the graph is a connected finite single-entry component
};

// Single entry: every vertex receives exactly one edge and emits at least
// one. A finite connected graph with this property is an N-loop: in-degrees
// force |E^1| = |E^0|, so out-degrees are all 1 and the graph is a
// permutation, i.e. a disjoint union of cycles.
inline SingleEntryResult single_entry_check(const DirectedGraph& g) {
  SingleEntryResult r;
  r.single_entry = !g.vertices.empty();
  for (size_t v = 0; v < g.vertices.size(); ++v)
    if (g.in_degree(static_cast<int>(v)) != 1 || g.out_degree(static_cast<int>(v)) < 1)
      r.single_entry = false;
  // weak connectivity
  if (!g.vertices.empty()) {
    std::vector<char> vis(g.vertices.size(), 0);
    std::vector<int> stack{0};
    vis[0] = 1;
    size_t count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      auto push = [&](int w) {
        if (!vis[w]) {
          vis[w] = 1;
          ++count;
          stack.push_back(w);
        }
      };
      for (int e : g.out_edges[v]) push(g.edges[e].rng);
      for (int e : g.in_edges[v]) push(g.edges[e].src);
    }
    r.connected = count == g.vertices.size();
  }
  if (r.single_entry && r.connected) r.nloop = static_cast<int>(g.vertices.size());
  return r;
}

inline std::vector<std::vector<long>> adjacency_matrix(const DirectedGraph& g) {
  std::vector<std::vector<long>> a(g.vertices.size(),
                                   std::vector<long>(g.vertices.size(), 0));
  for (const auto& e : g.edges) a[e.src][e.rng] += 1;
  return a;
}

struct KTheoryResult {
  int k0_free_rank = 0;
  std::vector<Integer> k0_torsion;  // invariant factors > 1, each dividing the next
  int k1_rank = 0;
  bool sink_restricted = false;
};

// Smith normal form over Z; returns the nonzero diagonal entries (positive,
// each dividing the next).
inline std::vector<Integer> smith_invariant_factors(std::vector<std::vector<Integer>> m) {
  size_t rows = m.size();
  size_t cols = rows ? m[0].size() : 0;
  std::vector<Integer> diag;
  size_t t = 0;
  while (t < rows && t < cols) {
    // locate a minimal-magnitude nonzero pivot in the trailing block
    size_t pi = rows, pj = cols;
    Integer best = 0;
    for (size_t i = t; i < rows; ++i)
      for (size_t j = t; j < cols; ++j)
        if (m[i][j] != 0 && (best == 0 || abs(m[i][j]) < abs(best))) {
          best = m[i][j];
          pi = i;
          pj = j;
        }
    if (pi == rows) break;
    std::swap(m[t], m[pi]);
    for (size_t i = 0; i < rows; ++i) std::swap(m[i][t], m[i][pj]);
    bool clean = true;
    for (size_t i = t + 1; i < rows; ++i) {
      Integer q = m[i][t] / m[t][t];
      if (q != 0)
        for (size_t j = t; j < cols; ++j) m[i][j] -= q * m[t][j];
      if (m[i][t] != 0) clean = false;
    }
    for (size_t j = t + 1; j < cols; ++j) {
      Integer q = m[t][j] / m[t][t];
      if (q != 0)
        for (size_t i = t; i < rows; ++i) m[i][j] -= q * m[i][t];
      if (m[t][j] != 0) clean = false;
    }
    if (!clean) continue;  // remainders left; rerun pivot selection on the block
    diag.push_back(abs(m[t][t]));
    ++t;
  }
  // enforce the divisibility chain
  for (size_t i = 0; i + 1 < diag.size(); ++i)
    for (size_t j = i + 1; j < diag.size(); ++j) {
      if (diag[i] == 0) std::swap(diag[i], diag[j]);
      if (diag[j] % diag[i] != 0) {
        Integer g = gcd(diag[i], diag[j]);
        Integer l = diag[i] / g * diag[j];
        diag[i] = g;
        diag[j] = l;
      }
    }
  std::sort(diag.begin(), diag.end());
  return diag;
}

// K-theory of C*(E) from the vertex matrix: K_0 = coker(1 - A^t), K_1 =
// ker(1 - A^t), with columns restricted to non-sink vertices when the graph
// has sinks.
inline KTheoryResult ktheory(const DirectedGraph& g) {
  size_t nv = g.vertices.size();
  auto a = adjacency_matrix(g);
  std::vector<int> regular;
  for (size_t v = 0; v < nv; ++v)
    if (!g.is_sink(static_cast<int>(v))) regular.push_back(static_cast<int>(v));
  KTheoryResult res;
  res.sink_restricted = regular.size() != nv;
  std::vector<std::vector<Integer>> m(nv, std::vector<Integer>(regular.size(), 0));
  for (size_t i = 0; i < nv; ++i)
    for (size_t jc = 0; jc < regular.size(); ++jc) {
      int j = regular[jc];
      Integer val = (static_cast<int>(i) == j ? 1 : 0);
      val -= a[j][i];  // transpose
      m[i][jc] = val;
    }
  auto factors = smith_invariant_factors(m);
  int rank = 0;
  for (const auto& d : factors)
    if (d != 0) ++rank;
  res.k0_free_rank = static_cast<int>(nv) - rank;
  for (const auto& d : factors)
    if (d > 1) res.k0_torsion.push_back(d);
  res.k1_rank = static_cast<int>(regular.size()) - rank;
  return res;
}

inline json ktheory_json(const KTheoryResult& r) {
  json t = json::array();
  for (const auto& d : r.k0_torsion) t.push_back(d.str());
  return json{{"k0_free_rank", r.k0_free_rank},
              {"k0_torsion", t},
              {"k1_rank", r.k1_rank},
              {"sink_restricted", r.sink_restricted}};
}

}  // namespace ckindex
