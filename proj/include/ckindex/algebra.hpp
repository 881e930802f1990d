#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckindex/graph.hpp"
#include "ckindex/rational.hpp"

namespace ckindex {

// S_mu S_nu^* with r(mu) = r(nu). Degree |mu| - |nu| is the gauge weight.
struct Monomial {
  Path mu;
  Path nu;

  int degree() const { return mu.length() - nu.length(); }
};

inline bool monomial_eq(const Monomial& a, const Monomial& b) {
  return path_eq(a.mu, b.mu) && path_eq(a.nu, b.nu);
}

// Total order used for canonical term listing: degree-major, then nu-depth,
// then edge sequences. Independent of the graph (edge indices are document
// order, which is fixed).
struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    if (a.degree() != b.degree()) return a.degree() < b.degree();
    if (a.nu.length() != b.nu.length()) return a.nu.length() < b.nu.length();
    if (a.mu.edges != b.mu.edges) return a.mu.edges < b.mu.edges;
    if (a.nu.edges != b.nu.edges) return a.nu.edges < b.nu.edges;
    int av = a.mu.empty() ? a.mu.src : -1;
    int bv = b.mu.empty() ? b.mu.src : -1;
    return av < bv;
  }
};

using TermMap = std::map<Monomial, Scalar, MonomialLess>;

class AlgebraElement {
 public:
  AlgebraElement() = default;
  explicit AlgebraElement(GraphPtr g) : graph_(std::move(g)) {}

  const GraphPtr& graph() const { return graph_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  size_t term_count() const { return terms_.size(); }

  void add_term(const Monomial& m, const Scalar& c) {
    if (c.is_zero()) return;
    if (m.mu.range(*graph_) != m.nu.range(*graph_))
      throw precondition_error("monomial ranges differ");
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_.emplace(m, c);
    } else {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  AlgebraElement& operator+=(const AlgebraElement& o) {
    check_same_graph(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  AlgebraElement& operator-=(const AlgebraElement& o) {
    check_same_graph(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
  friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
  friend AlgebraElement operator*(const Scalar& c, const AlgebraElement& a) {
    AlgebraElement r(a.graph_);
    for (const auto& [m, x] : a.terms_) r.add_term(m, c * x);
    return r;
  }

  void check_same_graph(const AlgebraElement& o) const {
    if (graph_ != o.graph_) throw precondition_error("mixed-graph operands");
  }

 private:
  GraphPtr graph_;
  TermMap terms_;
};

inline AlgebraElement zero_element(GraphPtr g) { return AlgebraElement(std::move(g)); }

inline AlgebraElement monomial_element(GraphPtr g, const Path& mu, const Path& nu,
                                       const Scalar& c = Scalar(1)) {
  AlgebraElement e(g);
  e.add_term(Monomial{mu, nu}, c);
  return e;
}

inline AlgebraElement vertex_projection(GraphPtr g, int v) {
  return monomial_element(g, Path::at_vertex(v), Path::at_vertex(v));
}

inline AlgebraElement edge_isometry(GraphPtr g, int e) {
  int r = g->edges[e].rng;
  return monomial_element(g, Path::of_edge(*g, e), Path::at_vertex(r));
}

inline AlgebraElement path_isometry(GraphPtr g, const Path& mu) {
  if (!mu.valid(*g)) throw precondition_error("invalid path");
  return monomial_element(g, mu, Path::at_vertex(mu.range(*g)));
}

// The unit of C*(E) for a finite graph: sum of all vertex projections.
inline AlgebraElement unit_element(GraphPtr g) {
  AlgebraElement e(g);
  for (size_t v = 0; v < g->vertices.size(); ++v)
    e.add_term(Monomial{Path::at_vertex(static_cast<int>(v)),
                        Path::at_vertex(static_cast<int>(v))},
               Scalar(1));
  return e;
}

// Monomial product. S_nu^* S_alpha collapses to S_kappa when alpha = nu kappa,
// to S_kappa'^* when nu = alpha kappa', and to 0 otherwise; the surviving
// product is reattached to the outer factors.
inline std::optional<Monomial> monomial_product(const DirectedGraph& g, const Monomial& a,
                                                const Monomial& b) {
  const Path& nu = a.nu;
  const Path& alpha = b.mu;
  if (nu.length() <= alpha.length()) {
    // nu must be an initial segment of alpha
    for (int i = 0; i < nu.length(); ++i)
      if (nu.edges[i] != alpha.edges[i]) return std::nullopt;
    Path kappa;
    if (nu.length() == 0) {
      if (alpha.source(g) != nu.src) return std::nullopt;
      kappa = alpha;
    } else {
      kappa.src = g.edges[nu.edges.back()].rng;
      kappa.edges.assign(alpha.edges.begin() + nu.length(), alpha.edges.end());
      if (!kappa.edges.empty()) kappa.src = g.edges[kappa.edges.front()].src;
    }
    Path new_mu = a.mu;
    if (kappa.length() > 0) new_mu = path_concat(g, a.mu, kappa);
    return Monomial{new_mu, b.nu};
  }
  // alpha must be an initial segment of nu
  for (int i = 0; i < alpha.length(); ++i)
    if (alpha.edges[i] != nu.edges[i]) return std::nullopt;
  Path kappa;
  if (alpha.length() == 0) {
    if (nu.source(g) != alpha.src) return std::nullopt;
    kappa = nu;
  } else {
    kappa.src = g.edges[alpha.edges.back()].rng;
    kappa.edges.assign(nu.edges.begin() + alpha.length(), nu.edges.end());
    if (!kappa.edges.empty()) kappa.src = g.edges[kappa.edges.front()].src;
  }
  Path new_nu = b.nu;
  if (kappa.length() > 0) new_nu = path_concat(g, b.nu, kappa);
  return Monomial{a.mu, new_nu};
}

// Uniform nu-depth canonical form. Within each degree sector every term is
// expanded through S_mu S_nu^* = sum_{s(e)=r(mu)} S_{mu e} S_{nu e}^* until
// its nu-length reaches the sector maximum or its range hits a sink. At a
// fixed refinement depth the surviving monomials are linearly independent,
// so map equality matches equality in A_c.
inline AlgebraElement normal_form(const AlgebraElement& a) {
  const auto& g = *a.graph();
  std::map<int, int> depth;  // degree -> max nu-length in that sector
  for (const auto& [m, c] : a.terms()) {
    auto [it, fresh] = depth.emplace(m.degree(), m.nu.length());
    if (!fresh && m.nu.length() > it->second) it->second = m.nu.length();
  }
  AlgebraElement out(a.graph());
  std::vector<std::pair<Monomial, Scalar>> work(a.terms().begin(), a.terms().end());
  while (!work.empty()) {
    auto [m, c] = work.back();
    work.pop_back();
    int want = depth[m.degree()];
    int r = m.mu.range(g);
    if (m.nu.length() >= want || g.is_sink(r)) {
      out.add_term(m, c);
      continue;
    }
    for (int e : g.out_edges[r]) {
      Monomial ref{path_concat(g, m.mu, Path::of_edge(g, e)),
                   path_concat(g, m.nu, Path::of_edge(g, e))};
      work.emplace_back(ref, c);
    }
  }
  return out;
}

// Refine every sector present in `a` to nu-length at least `d` (sinks stop).
inline AlgebraElement refine_to_depth(const AlgebraElement& a, int d) {
  const auto& g = *a.graph();
  AlgebraElement out(a.graph());
  std::vector<std::pair<Monomial, Scalar>> work(a.terms().begin(), a.terms().end());
  while (!work.empty()) {
    auto [m, c] = work.back();
    work.pop_back();
    int r = m.mu.range(g);
    if (m.nu.length() >= d || g.is_sink(r)) {
      out.add_term(m, c);
      continue;
    }
    for (int e : g.out_edges[r]) {
      Monomial ref{path_concat(g, m.mu, Path::of_edge(g, e)),
                   path_concat(g, m.nu, Path::of_edge(g, e))};
      work.emplace_back(ref, c);
    }
  }
  return normal_form(out);
}

inline AlgebraElement multiply(const AlgebraElement& a, const AlgebraElement& b) {
  a.check_same_graph(b);
  const auto& g = *a.graph();
  AlgebraElement out(a.graph());
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms())
      if (auto m = monomial_product(g, ma, mb)) out.add_term(*m, ca * cb);
  return normal_form(out);
}

inline AlgebraElement adjoint(const AlgebraElement& a) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms()) out.add_term(Monomial{m.nu, m.mu}, c.conj());
  return out;
}

// Phi_k: keep the degree-k terms.
inline AlgebraElement gauge_component(const AlgebraElement& a, int k) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms())
    if (m.degree() == k) out.add_term(m, c);
  return out;
}

// The expectation onto the fixed-point algebra F = degree-0 part.
inline AlgebraElement expectation(const AlgebraElement& a) { return gauge_component(a, 0); }

// gamma at rotation number q: degree-k terms pick up e^{2 pi i q k}. Only
// q in {0, 1/4, 1/2, 3/4} keeps the coefficients Gaussian rational.
inline AlgebraElement gauge_act(const AlgebraElement& a, const Rational& q) {
  Rational four_q = q * 4;
  if (q < 0 || q >= 1 || denominator(four_q) != 1)
    throw precondition_error("gauge_act: phase not exactly representable (need q in {0,1/4,1/2,3/4})");
  long j = four_q.convert_to<long>();
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms()) {
    long e = ((j * m.degree()) % 4 + 4) % 4;
    static const Scalar units[4] = {Scalar(1), Scalar::i(), Scalar(-1), -Scalar::i()};
    out.add_term(m, units[e] * c);
  }
  return out;
}

// [D, a]: each monomial scaled by its degree (D is the gauge generator).
inline AlgebraElement degree_derivation(const AlgebraElement& a) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms()) out.add_term(m, Scalar(Rational(m.degree())) * c);
  return out;
}

inline bool elements_equal(const AlgebraElement& a, const AlgebraElement& b) {
  a.check_same_graph(b);
  AlgebraElement d = a;
  d -= b;
  return normal_form(d).is_zero();
}

inline bool element_is_zero(const AlgebraElement& a) { return normal_form(a).is_zero(); }

inline int max_path_length(const AlgebraElement& a) {
  int m = 0;
  for (const auto& [mono, c] : a.terms())
    m = std::max({m, mono.mu.length(), mono.nu.length()});
  return m;
}

inline std::pair<int, int> degree_range(const AlgebraElement& a) {
  if (a.is_zero()) return {0, 0};
  int lo = a.terms().begin()->first.degree();
  int hi = lo;
  for (const auto& [m, c] : a.terms()) {
    lo = std::min(lo, m.degree());
    hi = std::max(hi, m.degree());
  }
  return {lo, hi};
}

// Canonical text form: "coeff * S[e1.e2] S*[f1.f2]" terms joined by " + ",
// vertex projections printed as p[v]. Parsing lives in expr.hpp.
inline std::string monomial_str(const DirectedGraph& g, const Monomial& m) {
  if (m.mu.empty() && m.nu.empty()) return "p[" + g.vertices[m.mu.src] + "]";
  std::string s;
  if (!m.mu.empty()) s += "S[" + m.mu.str(g) + "]";
  if (!m.nu.empty()) {
    if (!s.empty()) s += " ";
    s += "S*[" + m.nu.str(g) + "]";
  }
  return s;
}

inline std::string element_str(const AlgebraElement& a) {
  if (a.is_zero()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [m, c] : a.terms()) {
    bool flip = c.re < 0 || (c.re == 0 && c.im < 0);
    Scalar shown = flip ? -c : c;
    if (first) {
      if (flip) s += "-";
    } else {
      s += flip ? " - " : " + ";
    }
    first = false;
    s += scalar_str(shown) + " * " + monomial_str(*a.graph(), m);
  }
  return s;
}

// Square matrix over the algebra; carries the modular unitaries and the
// amplified pairings.
class AlgebraMatrix {
 public:
  AlgebraMatrix() = default;
  AlgebraMatrix(GraphPtr g, int k)
      : graph_(g), k_(k), m_(static_cast<size_t>(k) * k, AlgebraElement(g)) {}

  static AlgebraMatrix identity(GraphPtr g, int k) {
    AlgebraMatrix u(g, k);
    for (int i = 0; i < k; ++i) u.at(i, i) = unit_element(g);
    return u;
  }
  static AlgebraMatrix from_element(const AlgebraElement& a) {
    AlgebraMatrix u(a.graph(), 1);
    u.at(0, 0) = a;
    return u;
  }

  int size() const { return k_; }
  const GraphPtr& graph() const { return graph_; }
  AlgebraElement& at(int i, int j) { return m_[static_cast<size_t>(i) * k_ + j]; }
  const AlgebraElement& at(int i, int j) const { return m_[static_cast<size_t>(i) * k_ + j]; }

  friend AlgebraMatrix operator*(const AlgebraMatrix& a, const AlgebraMatrix& b) {
    if (a.k_ != b.k_) throw precondition_error("AlgebraMatrix: size mismatch");
    AlgebraMatrix r(a.graph_, a.k_);
    for (int i = 0; i < a.k_; ++i)
      for (int j = 0; j < a.k_; ++j) {
        AlgebraElement s(a.graph_);
        for (int l = 0; l < a.k_; ++l) s += multiply(a.at(i, l), b.at(l, j));
        r.at(i, j) = normal_form(s);
      }
    return r;
  }
  friend AlgebraMatrix operator+(const AlgebraMatrix& a, const AlgebraMatrix& b) {
    if (a.k_ != b.k_) throw precondition_error("AlgebraMatrix: size mismatch");
    AlgebraMatrix r = a;
    for (int i = 0; i < a.k_; ++i)
      for (int j = 0; j < a.k_; ++j) r.at(i, j) += b.at(i, j);
    return r;
  }
  friend AlgebraMatrix operator-(const AlgebraMatrix& a, const AlgebraMatrix& b) {
    if (a.k_ != b.k_) throw precondition_error("AlgebraMatrix: size mismatch");
    AlgebraMatrix r = a;
    for (int i = 0; i < a.k_; ++i)
      for (int j = 0; j < a.k_; ++j) r.at(i, j) -= b.at(i, j);
    return r;
  }

  AlgebraMatrix adjoint_matrix() const {
    AlgebraMatrix r(graph_, k_);
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j) r.at(i, j) = ckindex::adjoint(at(j, i));
    return r;
  }

  bool equals(const AlgebraMatrix& o) const {
    if (k_ != o.k_) return false;
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j)
        if (!elements_equal(at(i, j), o.at(i, j))) return false;
    return true;
  }

  bool is_unitary() const {
    AlgebraMatrix id = identity(graph_, k_);
    AlgebraMatrix ad = adjoint_matrix();
    return ((*this) * ad).equals(id) && (ad * (*this)).equals(id);
  }

 private:
  GraphPtr graph_;
  int k_ = 0;
  std::vector<AlgebraElement> m_;
};

inline AlgebraMatrix matrix_degree_derivation(const AlgebraMatrix& u) {
  AlgebraMatrix r(u.graph(), u.size());
  for (int i = 0; i < u.size(); ++i)
    for (int j = 0; j < u.size(); ++j) r.at(i, j) = degree_derivation(u.at(i, j));
  return r;
}

}  // namespace ckindex
