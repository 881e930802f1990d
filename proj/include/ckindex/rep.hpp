#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "ckindex/algebra.hpp"
#include "ckindex/state.hpp"

namespace ckindex {

struct RepConfig {
  int depth = 0;
  int k_min = 0;
  int k_max = 0;

  void validate() const {
    if (k_min > 0 || k_max < 0) throw precondition_error("RepConfig: need k_min <= 0 <= k_max");
    if (depth < std::max(-k_min, k_max))
      throw precondition_error("RepConfig: depth must cover the degree window");
  }
};

struct BasisVec {
  Monomial m;
  int degree;
  bool sink_terminated;
};

// Finite window of L^2(X, tau). Sector k holds the monomials S_mu S_nu^*
// with |nu| = depth and |mu| = depth + k, together with the sink-terminated
// monomials (|nu| < depth, range a sink) that cannot refine further. At this
// uniform nu-depth distinct basis monomials are orthogonal, so the Gram
// matrix is diagonal with entries tau(S_nu S_nu^*) > 0.
struct TruncatedRep {
  GraphPtr graph;
  StateFunctional state;
  RepConfig cfg;
  std::vector<BasisVec> basis;               // degree-major, lexicographic inside
  std::vector<Rational> gram;                // diagonal <b,b>
  std::map<int, std::pair<int, int>> sector;  // degree -> [begin, end)

  int size() const { return static_cast<int>(basis.size()); }
  bool has_sector(int k) const { return sector.count(k) > 0; }
};

inline TruncatedRep build_rep(GraphPtr g, const StateFunctional& s, const RepConfig& cfg) {
  cfg.validate();
  if (s.graph != g) throw precondition_error("state/graph mismatch");
  TruncatedRep rep{g, s, cfg, {}, {}, {}};
  for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
    int begin = rep.size();
    for (size_t v = 0; v < g->vertices.size(); ++v) {
      std::vector<int> nu_lengths;
      if (g->is_sink(static_cast<int>(v)))
        for (int l = 0; l < cfg.depth; ++l) nu_lengths.push_back(l);
      nu_lengths.push_back(cfg.depth);
      for (int l : nu_lengths) {
        if (l + k < 0) continue;
        auto mus = paths_with_range(*g, static_cast<int>(v), l + k);
        auto nus = paths_with_range(*g, static_cast<int>(v), l);
        for (const auto& mu : mus)
          for (const auto& nu : nus)
            rep.basis.push_back(BasisVec{Monomial{mu, nu}, k, l < cfg.depth});
      }
    }
    if (rep.size() > begin) rep.sector[k] = {begin, rep.size()};
  }
  for (const auto& b : rep.basis) {
    AlgebraElement e = monomial_element(g, b.m.mu, b.m.nu);
    Scalar norm2 = evaluate(s, multiply(adjoint(e), e));
    if (!norm2.is_real() || norm2.re <= 0)
      throw precondition_error("degenerate gram entry: state not faithful on the truncation");
    rep.gram.push_back(norm2.re);
  }
  return rep;
}

// Coordinates of an algebra element in the window, plus the exact mass it
// loses to the orthogonal complement (Parseval deficit). deficit == 0 means
// the compression kept everything.
struct WindowCoords {
  std::vector<Scalar> coords;
  Rational deficit;
};

inline WindowCoords expand_in_window(const TruncatedRep& rep, const AlgebraElement& x) {
  WindowCoords out;
  out.coords.assign(rep.basis.size(), Scalar());
  Scalar norm2 = evaluate(rep.state, multiply(adjoint(x), x));
  Rational kept = 0;
  std::set<int> degrees;
  for (const auto& [m, c] : x.terms()) degrees.insert(m.degree());
  for (int k : degrees) {
    auto it = rep.sector.find(k);
    if (it == rep.sector.end()) continue;
    AlgebraElement xk = gauge_component(x, k);
    for (int i = it->second.first; i < it->second.second; ++i) {
      AlgebraElement b = monomial_element(rep.graph, rep.basis[i].m.mu, rep.basis[i].m.nu);
      Scalar ip = evaluate(rep.state, multiply(adjoint(b), xk));
      if (ip.is_zero()) continue;
      out.coords[i] = Scalar(ip.re / rep.gram[i], ip.im / rep.gram[i]);
      kept += out.coords[i].abs2() * rep.gram[i];
    }
  }
  out.deficit = norm2.re - kept;
  return out;
}

// Endomorphism given by its exact action on A_c; matrices come from applying
// it to the basis and projecting once at the end, so interior columns stay
// exact.
struct SymbolicOperator {
  std::function<AlgebraElement(const AlgebraElement&)> apply;
};

inline SymbolicOperator op_left_mult(const AlgebraElement& a) {
  return SymbolicOperator{[a](const AlgebraElement& x) { return multiply(a, x); }};
}
inline SymbolicOperator op_phi(int k) {
  return SymbolicOperator{[k](const AlgebraElement& x) { return gauge_component(x, k); }};
}
inline SymbolicOperator op_identity() {
  return SymbolicOperator{[](const AlgebraElement& x) { return x; }};
}
// Delta^p on O_n: scales a degree-j monomial by n^{-jp}.
inline SymbolicOperator op_delta_pow(int n, int p) {
  return SymbolicOperator{[n, p](const AlgebraElement& x) {
    AlgebraElement out(x.graph());
    for (const auto& [m, c] : x.terms())
      out.add_term(m, Scalar(rational_pow(Rational(n), -static_cast<long>(m.degree()) * p)) * c);
    return out;
  }};
}
// Theta^R_{x,y} z = x (y|z)_R = x Phi(y^* z): rank one over the module, not
// over the Hilbert space.
inline SymbolicOperator op_rank_one(const AlgebraElement& x, const AlgebraElement& y) {
  return SymbolicOperator{[x, y](const AlgebraElement& z) {
    return multiply(x, expectation(multiply(adjoint(y), z)));
  }};
}
inline SymbolicOperator op_compose(const SymbolicOperator& a, const SymbolicOperator& b) {
  auto fa = a.apply, fb = b.apply;
  return SymbolicOperator{[fa, fb](const AlgebraElement& x) { return fa(fb(x)); }};
}
inline SymbolicOperator op_add(const SymbolicOperator& a, const SymbolicOperator& b) {
  auto fa = a.apply, fb = b.apply;
  return SymbolicOperator{[fa, fb](const AlgebraElement& x) { return fa(x) + fb(x); }};
}
inline SymbolicOperator op_scale(const Scalar& c, const SymbolicOperator& a) {
  auto fa = a.apply;
  return SymbolicOperator{[c, fa](const AlgebraElement& x) { return c * fa(x); }};
}

struct TruncatedOperator {
  int rows = 0, cols = 0;
  std::vector<Scalar> m;               // row-major
  std::vector<bool> contaminated_col;  // column lost mass to the window cutoff

  Scalar& at(int i, int j) { return m[static_cast<size_t>(i) * cols + j]; }
  const Scalar& at(int i, int j) const { return m[static_cast<size_t>(i) * cols + j]; }

  static TruncatedOperator zeros(int r, int c) {
    TruncatedOperator t;
    t.rows = r;
    t.cols = c;
    t.m.assign(static_cast<size_t>(r) * c, Scalar());
    t.contaminated_col.assign(c, false);
    return t;
  }
};

inline TruncatedOperator matrix_of(const TruncatedRep& rep, const SymbolicOperator& op) {
  int n = rep.size();
  TruncatedOperator t = TruncatedOperator::zeros(n, n);
  for (int j = 0; j < n; ++j) {
    AlgebraElement b = monomial_element(rep.graph, rep.basis[j].m.mu, rep.basis[j].m.nu);
    AlgebraElement y = op.apply(b);
    WindowCoords w = expand_in_window(rep, y);
    for (int i = 0; i < n; ++i) t.at(i, j) = w.coords[i];
    t.contaminated_col[j] = w.deficit != 0;
  }
  return t;
}

inline TruncatedOperator matrix_of_left_mult(const TruncatedRep& rep, const AlgebraElement& a) {
  return matrix_of(rep, op_left_mult(a));
}

// D is diagonal: each basis monomial is a degree eigenvector.
inline TruncatedOperator matrix_of_D(const TruncatedRep& rep) {
  int n = rep.size();
  TruncatedOperator t = TruncatedOperator::zeros(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = Scalar(Rational(rep.basis[i].degree));
  return t;
}

inline TruncatedOperator matrix_of_delta(const TruncatedRep& rep) {
  if (rep.state.kind != StateFunctional::Kind::CuntzKMS)
    throw precondition_error("Delta lives on the Cuntz-algebra representation");
  int n = rep.size();
  TruncatedOperator t = TruncatedOperator::zeros(n, n);
  for (int i = 0; i < n; ++i)
    t.at(i, i) = Scalar(rational_pow(Rational(rep.state.n), -rep.basis[i].degree));
  return t;
}

// Projection onto the degree-k block. For O_n and k < 0 the finite-rank
// expansion Phi_{-|k|} = n^{-|k|} sum_{|mu|=|k|} Theta_{S_mu^*, S_mu^*} is
// rebuilt and checked against the projection, entry by entry.
inline TruncatedOperator matrix_of_phi_k(const TruncatedRep& rep, int k) {
  int n = rep.size();
  TruncatedOperator t = TruncatedOperator::zeros(n, n);
  for (int i = 0; i < n; ++i)
    if (rep.basis[i].degree == k) t.at(i, i) = Scalar(1);
  if (rep.state.kind == StateFunctional::Kind::CuntzKMS && k < 0 && -k <= rep.cfg.depth) {
    int m = -k;
    SymbolicOperator sum{[](const AlgebraElement& x) { return AlgebraElement(x.graph()); }};
    bool first = true;
    for (const auto& mu : paths_with_range(*rep.graph, 0, m)) {
      AlgebraElement smu_star =
          monomial_element(rep.graph, Path::at_vertex(mu.range(*rep.graph)), mu);
      auto theta = op_rank_one(smu_star, smu_star);
      sum = first ? theta : op_add(sum, theta);
      first = false;
    }
    sum = op_scale(Scalar(rational_pow(Rational(rep.state.n), -m)), sum);
    TruncatedOperator expansion = matrix_of(rep, sum);
    for (size_t i = 0; i < t.m.size(); ++i)
      if (!(t.m[i] == expansion.m[i]))
        throw precondition_error("Phi_{-k} rank-one expansion disagrees with the projection");
  }
  return t;
}

inline TruncatedOperator matmul(const TruncatedOperator& a, const TruncatedOperator& b) {
  if (a.cols != b.rows) throw precondition_error("matmul: shape mismatch");
  TruncatedOperator t = TruncatedOperator::zeros(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int l = 0; l < a.cols; ++l) {
      if (a.at(i, l).is_zero()) continue;
      for (int j = 0; j < b.cols; ++j) {
        if (b.at(l, j).is_zero()) continue;
        t.at(i, j) += a.at(i, l) * b.at(l, j);
      }
    }
  for (int j = 0; j < b.cols; ++j)
    t.contaminated_col[j] = b.contaminated_col[j];
  return t;
}

// Adjoint with respect to the diagonal Gram form: (A~)_{ij} = conj(A_{ji}) G_j / G_i.
inline TruncatedOperator gram_adjoint(const TruncatedRep& rep, const TruncatedOperator& a) {
  TruncatedOperator t = TruncatedOperator::zeros(a.cols, a.rows);
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) {
      Scalar v = a.at(j, i).conj();
      t.at(i, j) = Scalar(v.re * rep.gram[j] / rep.gram[i], v.im * rep.gram[j] / rep.gram[i]);
    }
  return t;
}

// Probe sums behind tilde tau. omega_mu(T) = <S_mu, T S_mu> +
// (1/|r(mu)|_{|mu|}) <S_mu^*, T S_mu^*> for |mu| >= 1, and <p_v, T p_v> for
// vertices. tilde tau is the increasing limit of the partial sums.
struct ProbeSumReport {
  Scalar value;
  std::vector<Scalar> partial;  // partial[m] = sum over |mu| <= m
};

inline ProbeSumReport tilde_tau_symbolic(const StateFunctional& s, const SymbolicOperator& op,
                                         int cutoff) {
  const auto& g = *s.graph;
  ProbeSumReport rep;
  Scalar total;
  for (int m = 0; m <= cutoff; ++m) {
    if (m == 0) {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        AlgebraElement pv = vertex_projection(s.graph, static_cast<int>(v));
        total += evaluate(s, multiply(adjoint(pv), op.apply(pv)));
      }
    } else {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto mus = paths_with_range(g, static_cast<int>(v), m);
        if (mus.empty()) continue;
        Rational inv_count(1, static_cast<long>(mus.size()));
        for (const auto& mu : mus) {
          AlgebraElement smu = path_isometry(s.graph, mu);
          AlgebraElement smu_star = adjoint(smu);
          total += evaluate(s, multiply(adjoint(smu), op.apply(smu)));
          total += Scalar(inv_count) * evaluate(s, multiply(adjoint(smu_star), op.apply(smu_star)));
        }
      }
    }
    rep.partial.push_back(total);
  }
  rep.value = total;
  return rep;
}

inline ProbeSumReport tau_delta_symbolic(const StateFunctional& s, const SymbolicOperator& op,
                                         int cutoff) {
  if (s.kind != StateFunctional::Kind::CuntzKMS)
    throw precondition_error("tau_Delta lives on the Cuntz algebra");
  return tilde_tau_symbolic(s, op_compose(op_delta_pow(s.n, 1), op), cutoff);
}

namespace detail {
inline Scalar window_inner(const TruncatedRep& rep, const std::vector<Scalar>& x,
                           const std::vector<Scalar>& y) {
  Scalar t;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].is_zero() || y[i].is_zero()) continue;
    Scalar p = x[i].conj() * y[i];
    t += Scalar(p.re * rep.gram[i], p.im * rep.gram[i]);
  }
  return t;
}

inline std::vector<Scalar> matvec(const TruncatedOperator& a, const std::vector<Scalar>& x) {
  std::vector<Scalar> y(a.rows, Scalar());
  for (int j = 0; j < a.cols; ++j) {
    if (x[j].is_zero()) continue;
    for (int i = 0; i < a.rows; ++i) {
      const Scalar& v = a.at(i, j);
      if (!v.is_zero()) y[i] += v * x[j];
    }
  }
  return y;
}

inline std::vector<Scalar> probe_coords(const TruncatedRep& rep, const AlgebraElement& x,
                                        const char* what) {
  WindowCoords w = expand_in_window(rep, x);
  if (w.deficit != 0)
    throw precondition_error(std::string("probe vector ") + what + " not inside the window");
  return w.coords;
}
}  // namespace detail

inline ProbeSumReport tilde_tau_matrix(const TruncatedRep& rep, const TruncatedOperator& T,
                                       int cutoff) {
  if (cutoff > std::min(rep.cfg.k_max, -rep.cfg.k_min))
    throw precondition_error("cutoff exceeds representation window");
  const auto& g = *rep.graph;
  ProbeSumReport out;
  Scalar total;
  for (int m = 0; m <= cutoff; ++m) {
    if (m == 0) {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto x = detail::probe_coords(rep, vertex_projection(rep.graph, static_cast<int>(v)), "p_v");
        total += detail::window_inner(rep, x, detail::matvec(T, x));
      }
    } else {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto mus = paths_with_range(g, static_cast<int>(v), m);
        if (mus.empty()) continue;
        Rational inv_count(1, static_cast<long>(mus.size()));
        for (const auto& mu : mus) {
          AlgebraElement smu = path_isometry(rep.graph, mu);
          auto x = detail::probe_coords(rep, smu, "S_mu");
          total += detail::window_inner(rep, x, detail::matvec(T, x));
          auto y = detail::probe_coords(rep, adjoint(smu), "S_mu^*");
          Scalar second = detail::window_inner(rep, y, detail::matvec(T, y));
          total += Scalar(inv_count) * second;
        }
      }
    }
    out.partial.push_back(total);
  }
  out.value = total;
  return out;
}

inline ProbeSumReport tau_delta_matrix(const TruncatedRep& rep, const TruncatedOperator& T,
                                       int cutoff) {
  return tilde_tau_matrix(rep, matmul(matrix_of_delta(rep), T), cutoff);
}

// Orthonormalized float view: G^{1/2} M G^{-1/2}, entries complex double.
inline Eigen::MatrixXcd to_float(const TruncatedRep& rep, const TruncatedOperator& T) {
  int n = rep.size();
  Eigen::MatrixXcd M(n, n);
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) sq[i] = std::sqrt(rational_double(rep.gram[i]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Scalar& s = T.at(i, j);
      M(i, j) = std::complex<double>(rational_double(s.re), rational_double(s.im)) * sq[i] / sq[j];
    }
  return M;
}

// Largest singular value of the compression restricted to clean columns.
inline double operator_norm_interior(const TruncatedRep& rep, const TruncatedOperator& T) {
  Eigen::MatrixXcd M = to_float(rep, T);
  std::vector<int> keep;
  for (int j = 0; j < T.cols; ++j)
    if (!T.contaminated_col[j]) keep.push_back(j);
  if (keep.empty()) return 0.0;
  Eigen::MatrixXcd R(M.rows(), static_cast<int>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) R.col(static_cast<int>(j)) = M.col(keep[j]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

struct CommutatorNormReport {
  double interior_norm;
  double bound;  // | |mu| - |nu| |
  bool within_bound;
};

// ||[D, S_mu S_nu^*]|| = | |mu| - |nu| | on the full space. The compressed
// commutator on clean columns is bounded by it and attains it as the window
// grows.
inline CommutatorNormReport commutator_norm_check(const TruncatedRep& rep, const Monomial& mono,
                                                  double tol = 1e-9) {
  AlgebraElement a = monomial_element(rep.graph, mono.mu, mono.nu);
  TruncatedOperator A = matrix_of_left_mult(rep, a);
  TruncatedOperator D = matrix_of_D(rep);
  TruncatedOperator DA = matmul(D, A);
  TruncatedOperator AD = matmul(A, D);
  TruncatedOperator C = TruncatedOperator::zeros(A.rows, A.cols);
  for (size_t i = 0; i < C.m.size(); ++i) C.m[i] = DA.m[i] - AD.m[i];
  C.contaminated_col = A.contaminated_col;
  CommutatorNormReport r;
  r.bound = std::abs(mono.degree());
  r.interior_norm = operator_norm_interior(rep, C);
  r.within_bound = r.interior_norm <= r.bound + tol;
  return r;
}

inline json matrix_json(const TruncatedRep& rep, const TruncatedOperator& T) {
  json rows = json::array();
  for (int i = 0; i < T.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < T.cols; ++j) row.push_back(scalar_str(T.at(i, j)));
    rows.push_back(row);
  }
  json labels = json::array();
  for (const auto& b : rep.basis) labels.push_back(monomial_str(*rep.graph, b.m));
  json contaminated = json::array();
  for (int j = 0; j < T.cols; ++j) contaminated.push_back(static_cast<bool>(T.contaminated_col[j]));
  return json{{"basis", labels}, {"entries", rows}, {"boundary_columns", contaminated}};
}

}  // namespace ckindex
