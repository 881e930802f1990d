#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "ckindex/algebra.hpp"
#include "ckindex/graph.hpp"

namespace ckindex {

// Strictly positive vertex weights with g(v) = sum_{s(e)=v} g(r(e)) at every
// non-sink v; induces the gauge-invariant trace tau(S_mu S_nu^*) =
// delta_{mu,nu} g(r(mu)) on C*(E).
struct GraphTrace {
  GraphPtr graph;
  std::vector<Rational> weight;
  bool normalized = true;

  const Rational& at(int v) const { return weight[v]; }
};

struct NoFaithfulTrace {
  std::vector<int> loop;  // a cycle whose exit forces the weights to vanish
  int exit_vertex = -1;
};

inline bool graph_trace_balanced(const GraphTrace& t) {
  const auto& g = *t.graph;
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (g.is_sink(static_cast<int>(v))) continue;
    Rational s = 0;
    for (int e : g.out_edges[v]) s += t.weight[g.edges[e].rng];
    if (s != t.weight[v]) return false;
  }
  return true;
}

// Faithful graph traces exist iff no loop has an exit: a cycle vertex with a
// second outgoing edge forces g(v) > g(v) around the cycle. When they exist,
// assign unit mass to every terminal object (sink or cycle vertex), propagate
// through the remaining DAG, and normalize to total mass 1. Degenerate cones
// (several sinks/cycles) are resolved by this same uniform seeding, which is
// deterministic and keeps every weight positive.
inline std::variant<GraphTrace, NoFaithfulTrace> solve_graph_trace(GraphPtr g) {
  size_t nv = g->vertices.size();
  auto cyc = cycle_vertices(*g);
  std::vector<char> on_cycle(nv, 0);
  for (int v : cyc) on_cycle[v] = 1;
  for (int v : cyc)
    if (g->out_degree(v) >= 2) {
      NoFaithfulTrace no;
      no.loop = extract_cycle(*g, v);
      no.exit_vertex = v;
      return no;
    }
  std::vector<Rational> w(nv, Rational(0));
  std::vector<char> done(nv, 0);
  for (size_t v = 0; v < nv; ++v)
    if (on_cycle[v] || g->is_sink(static_cast<int>(v))) {
      w[v] = 1;
      done[v] = 1;
    }
  // remaining vertices form a DAG over `done` targets; resolve bottom-up
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t v = 0; v < nv; ++v) {
      if (done[v]) continue;
      bool ready = true;
      for (int e : g->out_edges[v])
        if (!done[g->edges[e].rng]) ready = false;
      if (!ready) continue;
      Rational s = 0;
      for (int e : g->out_edges[v]) s += w[g->edges[e].rng];
      w[v] = s;
      done[v] = 1;
      progress = true;
    }
  }
  Rational total = 0;
  for (const auto& x : w) total += x;
  for (auto& x : w) x /= total;
  GraphTrace t{g, std::move(w), true};
  if (!graph_trace_balanced(t)) throw precondition_error("graph trace balance failed");
  return t;
}

inline json graph_trace_json(const GraphTrace& t) {
  json m = json::object();
  for (size_t v = 0; v < t.graph->vertices.size(); ++v)
    m[t.graph->vertices[v]] = rational_str(t.weight[v]);
  return m;
}

// The two states the engine evaluates: the trace induced by a graph trace,
// and the Cuntz-algebra KMS state tau o Phi with tau(S_mu S_nu^*) =
// delta_{mu,nu} n^{-|mu|}.
struct StateFunctional {
  enum class Kind { InducedTrace, CuntzKMS };
  Kind kind;
  GraphPtr graph;
  std::optional<GraphTrace> trace;  // InducedTrace
  int n = 0;                        // CuntzKMS

  static StateFunctional induced(const GraphTrace& t) {
    return StateFunctional{Kind::InducedTrace, t.graph, t, 0};
  }
  static StateFunctional cuntz_kms(GraphPtr g) {
    if (g->vertices.size() != 1) throw precondition_error("CuntzKMS needs the O_n graph");
    for (const auto& e : g->edges)
      if (e.src != 0 || e.rng != 0) throw precondition_error("CuntzKMS needs the O_n graph");
    int n = static_cast<int>(g->edges.size());
    if (n < 2) throw precondition_error("CuntzKMS needs n >= 2");
    return StateFunctional{Kind::CuntzKMS, g, std::nullopt, n};
  }
};

inline Scalar evaluate(const StateFunctional& s, const AlgebraElement& a) {
  if (s.graph != a.graph()) throw precondition_error("state/element graph mismatch");
  Scalar total;
  for (const auto& [m, c] : a.terms()) {
    if (!path_eq(m.mu, m.nu)) continue;
    if (s.kind == StateFunctional::Kind::InducedTrace)
      total += c * Scalar(s.trace->at(m.mu.range(*s.graph)));
    else
      total += c * Scalar(rational_pow(Rational(1, s.n), m.mu.length()));
  }
  return total;
}

// sigma_i: the modular automorphism group continued to t = i, acting on a
// monomial of degree d as multiplication by n^d.
inline AlgebraElement sigma_i(int n, const AlgebraElement& a) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms())
    out.add_term(m, Scalar(rational_pow(Rational(n), m.degree())) * c);
  return out;
}

// KMS identity tau(ab) = tau(sigma_i(b) a), exact.
inline bool kms_check(const StateFunctional& s, const AlgebraElement& a,
                      const AlgebraElement& b) {
  if (s.kind != StateFunctional::Kind::CuntzKMS)
    throw precondition_error("kms_check runs against the Cuntz KMS state");
  Scalar lhs = evaluate(s, multiply(a, b));
  Scalar rhs = evaluate(s, multiply(sigma_i(s.n, b), a));
  return lhs == rhs;
}

// true iff tau(ab) = tau(ba). Holds on the fixed-point algebra; fails for
// degree-mixed pairs under the KMS state, which is the point of the modular
// machinery.
inline bool trace_property_check(const StateFunctional& s, const AlgebraElement& a,
                                 const AlgebraElement& b) {
  return evaluate(s, multiply(a, b)) == evaluate(s, multiply(b, a));
}

}  // namespace ckindex
