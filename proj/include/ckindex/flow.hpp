#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "ckindex/rep.hpp"

namespace ckindex {

// ---------------------------------------------------------------------------
// exact linear algebra over Gaussian rationals

namespace linalg {

// Nullspace basis of a dense rows x cols matrix (columns of the result are
// the kernel vectors).
inline std::vector<std::vector<Scalar>> nullspace(std::vector<std::vector<Scalar>> a, int rows,
                                                  int cols) {
  std::vector<int> pivot_col_of_row;
  std::vector<bool> is_pivot(cols, false);
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int sel = -1;
    for (int i = r; i < rows; ++i)
      if (!a[i][c].is_zero()) {
        sel = i;
        break;
      }
    if (sel < 0) continue;
    std::swap(a[sel], a[r]);
    Scalar inv = a[r][c].inverse();
    for (int j = c; j < cols; ++j) a[r][j] = a[r][j] * inv;
    for (int i = 0; i < rows; ++i) {
      if (i == r || a[i][c].is_zero()) continue;
      Scalar f = a[i][c];
      for (int j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
    }
    pivot_col_of_row.push_back(c);
    is_pivot[c] = true;
    ++r;
  }
  std::vector<std::vector<Scalar>> basis;
  for (int c = 0; c < cols; ++c) {
    if (is_pivot[c]) continue;
    std::vector<Scalar> v(cols, Scalar());
    v[c] = Scalar(1);
    for (int i = 0; i < static_cast<int>(pivot_col_of_row.size()); ++i)
      v[pivot_col_of_row[i]] = -a[i][c];
    basis.push_back(std::move(v));
  }
  return basis;
}

// Solve the Hermitian positive-definite system M x = b exactly.
inline std::vector<Scalar> solve_hpd(std::vector<std::vector<Scalar>> m, std::vector<Scalar> b) {
  int n = static_cast<int>(b.size());
  for (int c = 0; c < n; ++c) {
    int sel = -1;
    for (int i = c; i < n; ++i)
      if (!m[i][c].is_zero()) {
        sel = i;
        break;
      }
    if (sel < 0) throw precondition_error("singular Gram block");
    std::swap(m[sel], m[c]);
    std::swap(b[sel], b[c]);
    Scalar inv = m[c][c].inverse();
    for (int j = 0; j < n; ++j) m[c][j] = m[c][j] * inv;
    b[c] = b[c] * inv;
    for (int i = 0; i < n; ++i) {
      if (i == c || m[i][c].is_zero()) continue;
      Scalar f = m[i][c];
      for (int j = 0; j < n; ++j) m[i][j] -= f * m[c][j];
      b[i] -= f * b[c];
    }
  }
  return b;
}

}  // namespace linalg

// ---------------------------------------------------------------------------
// block window over a representation (for matrices over the algebra)

// H^k as k copies of the rep window; index = block * rep.size() + i.
struct BlockWindow {
  const TruncatedRep* rep;
  int blocks;

  int size() const { return blocks * rep->size(); }
  int flat(int block, int i) const { return block * rep->size() + i; }
  const Rational& gram(int idx) const { return rep->gram[idx % rep->size()]; }
  int degree(int idx) const { return rep->basis[idx % rep->size()].degree; }
};

struct BlockOperator {
  int n = 0;
  std::vector<Scalar> m;  // row-major n x n
  std::vector<bool> contaminated_col;

  Scalar& at(int i, int j) { return m[static_cast<size_t>(i) * n + j]; }
  const Scalar& at(int i, int j) const { return m[static_cast<size_t>(i) * n + j]; }
};

inline BlockOperator block_matrix_of(const BlockWindow& w, const AlgebraMatrix& u) {
  BlockOperator out;
  out.n = w.size();
  out.m.assign(static_cast<size_t>(out.n) * out.n, Scalar());
  out.contaminated_col.assign(out.n, false);
  int ns = w.rep->size();
  for (int bi = 0; bi < w.blocks; ++bi)
    for (int bj = 0; bj < w.blocks; ++bj) {
      TruncatedOperator t = matrix_of_left_mult(*w.rep, u.at(bi, bj));
      for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j) out.at(w.flat(bi, i), w.flat(bj, j)) = t.at(i, j);
      for (int j = 0; j < ns; ++j)
        if (t.contaminated_col[j])
          out.contaminated_col[w.flat(bj, j)] = true;
    }
  return out;
}

// tilde tau (x) Tr_k of the Gram-orthogonal projection onto span(W), via the
// probe vectors placed in each block. Exact.
inline Rational block_projection_probe_mass(const BlockWindow& w,
                                            const std::vector<std::vector<Scalar>>& span,
                                            int cutoff) {
  if (span.empty()) return Rational(0);
  const TruncatedRep& rep = *w.rep;
  if (cutoff > std::min(rep.cfg.k_max, -rep.cfg.k_min))
    throw precondition_error("cutoff exceeds representation window");
  int nw = w.size();
  int ns = static_cast<int>(span.size());
  auto inner = [&](const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
    Scalar t;
    for (int i = 0; i < nw; ++i) {
      if (x[i].is_zero() || y[i].is_zero()) continue;
      Scalar p = x[i].conj() * y[i];
      t += Scalar(p.re * w.gram(i), p.im * w.gram(i));
    }
    return t;
  };
  // Gram matrix of the span
  std::vector<std::vector<Scalar>> gm(ns, std::vector<Scalar>(ns));
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) gm[i][j] = inner(span[i], span[j]);
  Scalar total;
  auto add_probe = [&](const std::vector<Scalar>& base, int block, const Rational& weight) {
    std::vector<Scalar> x(nw, Scalar());
    for (int i = 0; i < w.rep->size(); ++i) x[w.flat(block, i)] = base[i];
    // <x, P x> = b^H (W^H G W)^{-1} b with b = W^H G x
    std::vector<Scalar> b(ns);
    for (int i = 0; i < ns; ++i) b[i] = inner(span[i], x);
    bool all_zero = true;
    for (const auto& v : b)
      if (!v.is_zero()) all_zero = false;
    if (all_zero) return;
    auto sol = linalg::solve_hpd(gm, b);
    Scalar val;
    for (int i = 0; i < ns; ++i) val += b[i].conj() * sol[i];
    total += Scalar(weight) * val;
  };
  const auto& g = *rep.graph;
  for (int m = 0; m <= cutoff; ++m) {
    if (m == 0) {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto x = detail::probe_coords(rep, vertex_projection(rep.graph, static_cast<int>(v)), "p_v");
        for (int b = 0; b < w.blocks; ++b) add_probe(x, b, Rational(1));
      }
    } else {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto mus = paths_with_range(g, static_cast<int>(v), m);
        if (mus.empty()) continue;
        Rational inv_count(1, static_cast<long>(mus.size()));
        for (const auto& mu : mus) {
          AlgebraElement smu = path_isometry(rep.graph, mu);
          auto x = detail::probe_coords(rep, smu, "S_mu");
          auto y = detail::probe_coords(rep, adjoint(smu), "S_mu^*");
          for (int b = 0; b < w.blocks; ++b) {
            add_probe(x, b, Rational(1));
            add_probe(y, b, inv_count);
          }
        }
      }
    }
  }
  if (!total.is_real()) throw precondition_error("projection mass came out complex");
  return total.re;
}

// ---------------------------------------------------------------------------
// Toeplitz channel: tilde-tau-weighted index of P u P

inline TruncatedOperator positive_projection(const TruncatedRep& rep) {
  int n = rep.size();
  TruncatedOperator t = TruncatedOperator::zeros(n, n);
  for (int i = 0; i < n; ++i)
    if (rep.basis[i].degree >= 0) t.at(i, i) = Scalar(1);
  return t;
}

struct ToeplitzResult {
  Rational index;
  Rational kernel_mass;
  Rational cokernel_mass;
};

// Index of the compression P u P on the degree >= 0 part of the window:
// exact kernel/cokernel over the rationals, masses via the probe trace.
// Kernel vectors are sought only among columns whose u-image stayed inside
// the window; the honest-truncation gate is depth stability, checked by the
// caller.
inline ToeplitzResult toeplitz_index(const TruncatedRep& rep, const AlgebraMatrix& u) {
  if (!u.is_unitary()) throw precondition_error("toeplitz_index: input is not unitary");
  BlockWindow w{&rep, u.size()};
  BlockOperator U = block_matrix_of(w, u);
  BlockOperator Ustar = block_matrix_of(w, u.adjoint_matrix());
  std::vector<int> ppart;
  for (int i = 0; i < w.size(); ++i)
    if (w.degree(i) >= 0) ppart.push_back(i);
  int np = static_cast<int>(ppart.size());

  auto kernel_mass_of = [&](const BlockOperator& M) -> Rational {
    std::vector<int> cols;
    for (int j : ppart)
      if (!M.contaminated_col[j]) cols.push_back(j);
    std::vector<std::vector<Scalar>> a(np, std::vector<Scalar>(cols.size()));
    for (int i = 0; i < np; ++i)
      for (size_t j = 0; j < cols.size(); ++j) a[i][j] = M.at(ppart[i], cols[j]);
    auto null_basis = linalg::nullspace(a, np, static_cast<int>(cols.size()));
    if (null_basis.empty()) return Rational(0);
    std::vector<std::vector<Scalar>> span;
    for (const auto& v : null_basis) {
      std::vector<Scalar> full(w.size(), Scalar());
      for (size_t j = 0; j < cols.size(); ++j) full[cols[j]] = v[j];
      span.push_back(std::move(full));
    }
    return block_projection_probe_mass(w, span, std::min(rep.cfg.k_max, -rep.cfg.k_min));
  };

  ToeplitzResult r;
  r.kernel_mass = kernel_mass_of(U);
  r.cokernel_mass = kernel_mass_of(Ustar);  // coker(PuP) = ker(P u^* P)
  r.index = r.kernel_mass - r.cokernel_mass;
  return r;
}

inline TruncatedRep standard_rep(GraphPtr g, const StateFunctional& s, int depth) {
  return build_rep(g, s, RepConfig{depth, -depth, depth});
}

// Depth-stability gate: the same index must come out at depth d and d+1.
inline ToeplitzResult toeplitz_index_stable(GraphPtr g, const StateFunctional& s,
                                            const AlgebraMatrix& u, int depth) {
  int need = 0;
  for (int i = 0; i < u.size(); ++i)
    for (int j = 0; j < u.size(); ++j) need = std::max(need, max_path_length(u.at(i, j)));
  if (depth < need + 2)
    throw instability_error("window too small for the requested unitary");
  TruncatedRep r1 = standard_rep(g, s, depth);
  TruncatedRep r2 = standard_rep(g, s, depth + 1);
  ToeplitzResult a = toeplitz_index(r1, u);
  ToeplitzResult b = toeplitz_index(r2, u);
  if (a.index != b.index)
    throw instability_error("window too small: index differs between depth d and d+1");
  return b;
}

// ---------------------------------------------------------------------------
// spectral flow

struct SpectralFlowPath {
  const TruncatedRep* rep;
  TruncatedOperator D;
  TruncatedOperator X;  // u[D, u^*]; the path is D_t = D + tX
  bool x_diagonal = false;
};

inline SpectralFlowPath make_flow_path(const TruncatedRep& rep, const AlgebraElement& u) {
  AlgebraElement w = multiply(u, degree_derivation(adjoint(u)));
  SpectralFlowPath p{&rep, matrix_of_D(rep), matrix_of_left_mult(rep, w), false};
  // exact self-adjointness on clean columns
  TruncatedOperator adj = gram_adjoint(rep, p.X);
  for (int i = 0; i < p.X.rows; ++i)
    for (int j = 0; j < p.X.cols; ++j)
      if (!p.X.contaminated_col[i] && !p.X.contaminated_col[j] && !(p.X.at(i, j) == adj.at(i, j)))
        throw precondition_error("u[D,u*] is not self-adjoint on interior vectors");
  p.x_diagonal = true;
  for (int i = 0; i < p.X.rows && p.x_diagonal; ++i)
    for (int j = 0; j < p.X.cols; ++j)
      if (i != j && !p.X.at(i, j).is_zero()) {
        p.x_diagonal = false;
        break;
      }
  return p;
}

inline SpectralFlowPath make_scalar_flow_path(const TruncatedRep& rep, const Rational& c) {
  SpectralFlowPath p{&rep, matrix_of_D(rep), TruncatedOperator::zeros(rep.size(), rep.size()),
                     true};
  for (int i = 0; i < rep.size(); ++i) p.X.at(i, i) = Scalar(c);
  return p;
}

// tilde-tau mass of each basis direction, from one pass over the probes.
inline std::vector<Rational> basis_probe_masses(const TruncatedRep& rep) {
  int n = rep.size();
  std::vector<Rational> mass(n, Rational(0));
  int cutoff = std::min(rep.cfg.k_max, -rep.cfg.k_min);
  const auto& g = *rep.graph;
  auto account = [&](const std::vector<Scalar>& x, const Rational& weight) {
    for (int i = 0; i < n; ++i)
      if (!x[i].is_zero()) mass[i] += weight * x[i].abs2() * rep.gram[i];
  };
  for (int m = 0; m <= cutoff; ++m) {
    if (m == 0) {
      for (size_t v = 0; v < g.vertices.size(); ++v)
        account(detail::probe_coords(rep, vertex_projection(rep.graph, static_cast<int>(v)), "p_v"),
                Rational(1));
    } else {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto mus = paths_with_range(g, static_cast<int>(v), m);
        if (mus.empty()) continue;
        Rational inv_count(1, static_cast<long>(mus.size()));
        for (const auto& mu : mus) {
          AlgebraElement smu = path_isometry(rep.graph, mu);
          account(detail::probe_coords(rep, smu, "S_mu"), Rational(1));
          account(detail::probe_coords(rep, adjoint(smu), "S_mu^*"), inv_count);
        }
      }
    }
  }
  return mass;
}

struct CrossingsResult {
  bool exact;
  Rational exact_value;
  double float_value;

  double as_double() const { return exact ? rational_double(exact_value) : float_value; }
};

// Signed tilde-tau-weighted passage of eigenvalues through 0, with the 0^-
// convention: a branch counts +w when it moves from < 0 to >= 0 over [0,1]
// and -w for the reverse. Fixed so that sf(D, D - 1) = -tilde_tau(Phi_0).
inline CrossingsResult spectral_flow_crossings(const SpectralFlowPath& path,
                                               int max_grid = 4096) {
  const TruncatedRep& rep = *path.rep;
  int n = rep.size();
  if (path.x_diagonal) {
    auto mass = basis_probe_masses(rep);
    Rational sf = 0;
    for (int i = 0; i < n; ++i) {
      if (!path.X.at(i, i).is_real() || !path.D.at(i, i).is_real())
        throw precondition_error("diagonal path with non-real entries");
      Rational a = path.D.at(i, i).re;
      Rational b = a + path.X.at(i, i).re;
      if (a < 0 && b >= 0) sf += mass[i];
      if (a >= 0 && b < 0) sf -= mass[i];
    }
    return CrossingsResult{true, sf, rational_double(sf)};
  }
  // float branch tracking on a refining grid
  Eigen::MatrixXcd Df = to_float(rep, path.D);
  Eigen::MatrixXcd Xf = to_float(rep, path.X);
  auto mass = basis_probe_masses(rep);
  Eigen::VectorXd mass_f(n);
  for (int i = 0; i < n; ++i) mass_f(i) = rational_double(mass[i]);
  auto eig = [&](double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Df + t * Xf);
    return std::make_pair(es.eigenvalues(), es.eigenvectors());
  };
  // weight of an eigenvector v: sum_i mass_i |v_i|^2 in orthonormal coords
  auto weight_of = [&](const Eigen::VectorXcd& v) {
    double w = 0;
    for (int i = 0; i < n; ++i) w += mass_f(i) * std::norm(v(i));
    return w;
  };
  double sf = 0;
  std::function<void(double, double, int)> scan = [&](double t0, double t1, int depth_left) {
    auto [l0, v0] = eig(t0);
    auto [l1, v1] = eig(t1);
    int c0 = 0, c1 = 0;
    for (int i = 0; i < n; ++i) {
      if (l0(i) < 0) ++c0;
      if (l1(i) < 0) ++c1;
    }
    if (c0 == c1) {
      if (depth_left > 0 && t1 - t0 > 1.0 / max_grid) {
        double tm = 0.5 * (t0 + t1);
        scan(t0, tm, depth_left - 1);
        scan(tm, t1, depth_left - 1);
      }
      return;
    }
    if (t1 - t0 > 1.0 / max_grid) {
      double tm = 0.5 * (t0 + t1);
      scan(t0, tm, depth_left - 1);
      scan(tm, t1, depth_left - 1);
      return;
    }
    // net flux across this thin slab; weight taken from the eigenvectors
    // closest to zero at the midpoint
    int delta = c0 - c1;  // positive: branches moved up through 0
    auto [lm, vm] = eig(0.5 * (t0 + t1));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(lm(a)) < std::abs(lm(b)); });
    int count = std::abs(delta);
    double w = 0;
    for (int i = 0; i < count && i < n; ++i) w += weight_of(vm.col(order[i]));
    sf += (delta > 0 ? w : -w);
  };
  scan(0.0, 1.0, 24);
  return CrossingsResult{false, Rational(0), sf};
}

// ---------------------------------------------------------------------------
// spectral flow integral channel

inline double integration_constant(int m) {
  // C_{m/2} = int (1+x^2)^{-m/2} dx = sqrt(pi) Gamma((m-1)/2) / Gamma(m/2)
  double j = m / 2.0;
  return std::sqrt(M_PI) * std::tgamma(j - 0.5) / std::tgamma(j);
}

struct FloatProbes {
  std::vector<double> weight;
  Eigen::MatrixXcd vecs;  // columns, orthonormal coordinates
};

inline FloatProbes float_probes(const TruncatedRep& rep, int cutoff) {
  const auto& g = *rep.graph;
  int n = rep.size();
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) sq[i] = std::sqrt(rational_double(rep.gram[i]));
  std::vector<std::pair<std::vector<Scalar>, double>> raw;
  for (int m = 0; m <= cutoff; ++m) {
    if (m == 0) {
      for (size_t v = 0; v < g.vertices.size(); ++v)
        raw.emplace_back(
            detail::probe_coords(rep, vertex_projection(rep.graph, static_cast<int>(v)), "p_v"),
            1.0);
    } else {
      for (size_t v = 0; v < g.vertices.size(); ++v) {
        auto mus = paths_with_range(g, static_cast<int>(v), m);
        if (mus.empty()) continue;
        double inv_count = 1.0 / static_cast<double>(mus.size());
        for (const auto& mu : mus) {
          AlgebraElement smu = path_isometry(rep.graph, mu);
          raw.emplace_back(detail::probe_coords(rep, smu, "S_mu"), 1.0);
          raw.emplace_back(detail::probe_coords(rep, adjoint(smu), "S_mu^*"), inv_count);
        }
      }
    }
  }
  FloatProbes fp;
  fp.vecs.resize(n, static_cast<int>(raw.size()));
  for (size_t p = 0; p < raw.size(); ++p) {
    fp.weight.push_back(raw[p].second);
    for (int i = 0; i < n; ++i) {
      const Scalar& s = raw[p].first[i];
      fp.vecs(i, static_cast<int>(p)) =
          std::complex<double>(rational_double(s.re), rational_double(s.im)) * sq[i];
    }
  }
  return fp;
}

struct IntegralResult {
  double value;
  double abs_error;
};

// 1/C_{m/2} * int_0^1 tilde_tau(X (1 + D_t^2)^{-m/2}) dt by adaptive Simpson;
// the resolvent power is taken through an exact (float) Hermitian
// eigendecomposition at each node.
inline IntegralResult spectral_flow_integral(const SpectralFlowPath& path, int m = 2,
                                             double rel_tol = 1e-6) {
  if (m < 2 || m % 2 != 0) throw precondition_error("integral channel needs even m >= 2");
  const TruncatedRep& rep = *path.rep;
  FloatProbes fp = float_probes(rep, std::min(rep.cfg.k_max, -rep.cfg.k_min));
  Eigen::MatrixXcd Df = to_float(rep, path.D);
  Eigen::MatrixXcd Xf = to_float(rep, path.X);
  double c = integration_constant(m);
  auto integrand = [&](double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Df + t * Xf);
    Eigen::VectorXd lam = es.eigenvalues();
    Eigen::VectorXd w(lam.size());
    for (int i = 0; i < lam.size(); ++i) w(i) = std::pow(1.0 + lam(i) * lam(i), -m / 2.0);
    Eigen::MatrixXcd R = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
    Eigen::MatrixXcd F = Xf * R;
    double val = 0;
    for (int p = 0; p < fp.vecs.cols(); ++p) {
      std::complex<double> q = fp.vecs.col(p).adjoint() * F * fp.vecs.col(p);
      val += fp.weight[p] * q.real();
    }
    return val / c;
  };
  std::function<double(double, double, double, double, double, double, int)> simpson =
      [&](double a, double b, double fa, double fb, double fm, double whole, int depth) -> double {
    double lm = 0.5 * (a + 0.5 * (a + b));
    double rm = 0.5 * (0.5 * (a + b) + b);
    double fl = integrand(lm), fr = integrand(rm);
    double left = (0.25 * (b - a) / 6) * (fa + 4 * fl + fm) * 2;
    double right = (0.25 * (b - a) / 6) * (fm + 4 * fr + fb) * 2;
    if (depth <= 0 || std::abs(left + right - whole) < rel_tol * (std::abs(whole) + 1e-12))
      return left + right + (left + right - whole) / 15.0;
    return simpson(a, 0.5 * (a + b), fa, fm, fl, left, depth - 1) +
           simpson(0.5 * (a + b), b, fm, fb, fr, right, depth - 1);
  };
  double fa = integrand(0), fb = integrand(1), fm = integrand(0.5);
  double whole = ((1.0 - 0.0) / 6) * (fa + 4 * fm + fb);
  double val = simpson(0.0, 1.0, fa, fb, fm, whole, 20);
  return IntegralResult{val, rel_tol * (std::abs(val) + 1.0)};
}

// ---------------------------------------------------------------------------
// zeta residues

namespace zeta {

inline double hurwitz_zeta(double s, double a) {
  // Euler-Maclaurin, good to ~1e-14 for s in (1, 150), a >= 1
  static const double b2k[] = {1.0 / 6,  -1.0 / 30,     1.0 / 42,   -1.0 / 30,
                               5.0 / 66, -691.0 / 2730, 7.0 / 6};
  int N = 0;
  while (a + N < 18) ++N;
  double sum = 0;
  for (int j = 0; j < N; ++j) sum += std::pow(a + j, -s);
  double aN = a + N;
  sum += std::pow(aN, 1 - s) / (s - 1);
  sum += 0.5 * std::pow(aN, -s);
  for (int k = 1; k <= 7; ++k) {
    double f2k = 1;
    for (int i = 2; i <= 2 * k; ++i) f2k *= i;
    double rising = 1;  // s (s+1) ... (s + 2k - 2)
    for (int i = 0; i < 2 * k - 1; ++i) rising *= (s + i);
    sum += b2k[k - 1] / f2k * rising * std::pow(aN, -s - 2 * k + 1);
  }
  return sum;
}

// sum_{j > K} (1 + j^2)^{-s/2} via the binomial expansion around j^{-s}.
inline double tail_sum(double s, int K) {
  double a = K + 1;
  double total = 0;
  double coeff = 1;  // binom(-s/2, m)
  for (int m = 0; m < 60; ++m) {
    if (m > 0) coeff *= (-s / 2 - (m - 1)) / m;
    double term = coeff * hurwitz_zeta(s + 2 * m, a);
    total += term;
    if (std::abs(term) < 1e-17 * (std::abs(total) + 1)) break;
  }
  return total;
}

}  // namespace zeta

struct ResidueEstimate {
  double value;
  double spread;
  double c_plus;   // detected tail constant for k -> +infinity
  double c_minus;  // ... and k -> -infinity
};

namespace detail_zeta {
inline double detect_tail(const std::map<int, Rational>& c, int K, int dir) {
  auto get = [&](int k) { return rational_double(c.at(k)); };
  double v0 = get(dir * K), v1 = get(dir * (K - 1)), v2 = get(dir * (K - 2));
  if (c.at(dir * K) == c.at(dir * (K - 1)) && c.at(dir * (K - 1)) == c.at(dir * (K - 2)))
    return v0;
  double d1 = v1 - v2, d2 = v0 - v1;
  if (d1 != 0 && std::abs(d2) < 0.9 * std::abs(d1)) {
    double rho = d2 / d1;
    return v0 + d2 * rho / (1 - rho);
  }
  throw instability_error("coefficients not stabilizing: not measurable at this cutoff");
}
}  // namespace detail_zeta

// Residue at s = 1 of f(s) = sum_k c_k (1+k^2)^{-s/2}. The window values are
// exact; the two tails are replaced by their detected constants and summed
// analytically; (s-1) f(s) is Richardson-extrapolated from s = 1 + eps,
// eps in {1e-1, ..., 1e-4}.
inline ResidueEstimate zeta_residue(const std::map<int, Rational>& c) {
  if (c.empty()) return ResidueEstimate{0, 0, 0, 0};
  int K = 0;
  for (const auto& [k, v] : c) K = std::max(K, std::abs(k));
  for (int k = -K; k <= K; ++k)
    if (!c.count(k)) throw precondition_error("coefficient family must cover [-K, K]");
  if (K < 2) throw instability_error("coefficient window too small");
  bool all_zero = true;
  for (const auto& [k, v] : c)
    if (v != 0) all_zero = false;
  if (all_zero) return ResidueEstimate{0, 0, 0, 0};
  double cp = detail_zeta::detect_tail(c, K, +1);
  double cm = detail_zeta::detect_tail(c, K, -1);
  auto F = [&](double eps) {
    double s = 1 + eps;
    double f = 0;
    for (int k = -K; k <= K; ++k)
      f += rational_double(c.at(k)) * std::pow(1.0 + static_cast<double>(k) * k, -s / 2);
    double tail = zeta::tail_sum(s, K);
    f += cp * tail + cm * tail;
    return eps * f;
  };
  std::vector<double> eps = {1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> val;
  for (double e : eps) val.push_back(F(e));
  // Neville to eps -> 0
  std::vector<double> prev;
  double last = val.back(), second_last = val.back();
  std::vector<std::vector<double>> tab{val};
  for (size_t lvl = 1; lvl < eps.size(); ++lvl) {
    std::vector<double> row;
    for (size_t i = 0; i + lvl < eps.size(); ++i) {
      double x0 = eps[i], x1 = eps[i + lvl];
      double v = (x1 * tab[lvl - 1][i] - x0 * tab[lvl - 1][i + 1]) / (x1 - x0);
      row.push_back(v);
    }
    second_last = last;
    last = row.back();
    tab.push_back(row);
  }
  return ResidueEstimate{last, std::abs(last - second_last), cp, cm};
}

// c_k = tilde tau (T Phi_k) with T applied symbolically; the Phi_k filter
// kills every probe except |mu| = |k|, so the sum below is the exact value,
// not a truncation.
inline Scalar phi_filtered_probe(const StateFunctional& s, const SymbolicOperator& T, int k) {
  const auto& g = *s.graph;
  Scalar total;
  if (k == 0) {
    for (size_t v = 0; v < g.vertices.size(); ++v) {
      AlgebraElement pv = vertex_projection(s.graph, static_cast<int>(v));
      total += evaluate(s, multiply(adjoint(pv), T.apply(expectation(pv))));
    }
    return total;
  }
  int m = std::abs(k);
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    auto mus = paths_with_range(g, static_cast<int>(v), m);
    if (mus.empty()) continue;
    Rational inv_count(1, static_cast<long>(mus.size()));
    for (const auto& mu : mus) {
      AlgebraElement smu = path_isometry(s.graph, mu);
      if (k > 0) {
        total += evaluate(s, multiply(adjoint(smu), T.apply(smu)));
      } else {
        AlgebraElement smu_star = adjoint(smu);
        total += Scalar(inv_count) * evaluate(s, multiply(smu, T.apply(smu_star)));
      }
    }
  }
  return total;
}

// Coefficient family for the tracial residue channel: c_k = tilde_tau(a Phi_k).
inline std::map<int, Rational> residue_family_tracial(const StateFunctional& s,
                                                      const AlgebraElement& a, int K) {
  std::map<int, Rational> c;
  SymbolicOperator T = op_left_mult(a);
  for (int k = -K; k <= K; ++k) {
    Scalar v = phi_filtered_probe(s, T, k);
    if (!v.is_real()) throw precondition_error("residue coefficients must be real");
    c[k] = v.re;
  }
  return c;
}

// KMS weight version: c_k = tau_Delta(a Phi_k) = tilde_tau(Delta a Phi_k).
inline std::map<int, Rational> residue_family_kms(const StateFunctional& s,
                                                  const AlgebraElement& a, int K) {
  if (s.kind != StateFunctional::Kind::CuntzKMS)
    throw precondition_error("KMS residue family needs the Cuntz state");
  std::map<int, Rational> c;
  SymbolicOperator T = op_compose(op_delta_pow(s.n, 1), op_left_mult(a));
  for (int k = -K; k <= K; ++k) {
    Scalar v = phi_filtered_probe(s, T, k);
    if (!v.is_real()) throw precondition_error("residue coefficients must be real");
    c[k] = v.re;
  }
  return c;
}

// ---------------------------------------------------------------------------
// orientability (the Hochschild cycle c = sum_e S_e^* (x) S_e)

struct OrientabilityReport {
  bool boundary_zero;       // b(c) = sum_e (p_{r(e)} - S_e S_e^*) = 0
  bool volume_is_unit;      // pi_D(c) = sum_e p_{r(e)} equals 1
  bool oriented;
  bool matches_single_entry;
  AlgebraElement boundary_residual;
  AlgebraElement volume_form;
};

inline OrientabilityReport orientability_check(GraphPtr g) {
  AlgebraElement b(g), pi(g);
  for (size_t e = 0; e < g->edges.size(); ++e) {
    AlgebraElement se = edge_isometry(g, static_cast<int>(e));
    AlgebraElement pr = vertex_projection(g, g->edges[e].rng);
    b += pr - multiply(se, adjoint(se));
    pi += pr;
  }
  OrientabilityReport r{false, false, false, false, normal_form(b), normal_form(pi)};
  r.boundary_zero = r.boundary_residual.is_zero();
  r.volume_is_unit = elements_equal(pi, unit_element(g));
  r.oriented = r.boundary_zero && r.volume_is_unit;
  r.matches_single_entry = (r.volume_is_unit == single_entry_check(*g).single_entry);
  return r;
}

// ---------------------------------------------------------------------------
// combined report

struct IndexReport {
  std::optional<Rational> closed_form;
  std::optional<Rational> toeplitz;
  std::optional<CrossingsResult> crossings;
  std::optional<IntegralResult> integral;
  std::optional<ResidueEstimate> residue_sf;  // residue channel already halved to a spectral flow
  std::map<std::string, bool> agree;
  int depth = 0;

  bool all_agree() const {
    for (const auto& [k, v] : agree)
      if (!v) return false;
    return true;
  }
};

inline json index_report_json(const IndexReport& r) {
  json j;
  j["closed_form"] = r.closed_form ? json(rational_str(*r.closed_form)) : json(nullptr);
  j["toeplitz"] = r.toeplitz ? json(rational_str(*r.toeplitz)) : json(nullptr);
  if (r.crossings) {
    if (r.crossings->exact)
      j["crossings"] = rational_str(r.crossings->exact_value);
    else
      j["crossings"] = r.crossings->float_value;
  } else {
    j["crossings"] = nullptr;
  }
  if (r.integral)
    j["integral"] = json{{"value", r.integral->value}, {"abs_error", r.integral->abs_error}};
  else
    j["integral"] = nullptr;
  if (r.residue_sf)
    j["residue"] = json{{"value", r.residue_sf->value}, {"spread", r.residue_sf->spread}};
  else
    j["residue"] = nullptr;
  json agree = json::object();
  for (const auto& [k, v] : r.agree) agree[k] = v;
  j["agree"] = agree;
  j["depth"] = r.depth;
  return j;
}

}  // namespace ckindex
