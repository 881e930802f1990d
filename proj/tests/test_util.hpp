#pragma once

#include <random>

#include "ckindex/algebra.hpp"
#include "ckindex/graph.hpp"

namespace ckindex::testutil {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(0x5eed5eedULL);
  return gen;
}

inline int rand_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng());
}

// Random path of the given length starting anywhere; empty when the walk
// dies at a sink.
inline std::optional<Path> random_path(const DirectedGraph& g, int len) {
  int v = rand_int(0, static_cast<int>(g.vertices.size()) - 1);
  Path p = Path::at_vertex(v);
  for (int i = 0; i < len; ++i) {
    int r = p.range(g);
    if (g.out_edges[r].empty()) return std::nullopt;
    int e = g.out_edges[r][rand_int(0, g.out_degree(r) - 1)];
    p = path_concat(g, p, Path::of_edge(g, e));
  }
  return p;
}

// Random monomial S_mu S_nu^* with matching ranges.
inline Monomial random_monomial(const DirectedGraph& g, int max_len) {
  while (true) {
    auto mu = random_path(g, rand_int(0, max_len));
    if (!mu) continue;
    int r = mu->range(g);
    int nu_len = rand_int(0, max_len);
    auto nus = paths_with_range(g, r, nu_len);
    if (nus.empty()) continue;
    return Monomial{*mu, nus[rand_int(0, static_cast<int>(nus.size()) - 1)]};
  }
}

inline Scalar random_scalar() {
  Rational re(rand_int(-3, 3), rand_int(1, 4));
  Rational im = rand_int(0, 3) == 0 ? Rational(rand_int(-2, 2)) : Rational(0);
  Scalar s(re, im);
  if (s.is_zero()) return Scalar(1);
  return s;
}

inline AlgebraElement random_element(GraphPtr g, int terms = 3, int max_len = 2) {
  AlgebraElement e(g);
  for (int i = 0; i < terms; ++i) e.add_term(random_monomial(*g, max_len), random_scalar());
  if (e.is_zero()) e.add_term(random_monomial(*g, max_len), Scalar(1));
  return normal_form(e);
}

inline GraphPtr tree5_graph() {
  return load_graph_text(R"({"vertices":["v0","v1","v2","v3","v4"],
    "edges":[{"id":"a","src":"v0","rng":"v1"},{"id":"b","src":"v0","rng":"v2"},
             {"id":"c","src":"v1","rng":"v3"},{"id":"d","src":"v1","rng":"v4"}]})");
}

}  // namespace ckindex::testutil
