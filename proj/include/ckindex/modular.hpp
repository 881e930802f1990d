#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ckindex/flow.hpp"

namespace ckindex {

// Modular data of the Cuntz algebra O_n under the KMS state tau o Phi:
// Delta S_mu S_nu^* = n^{|nu|-|mu|} S_mu S_nu^*, so Delta = n^{-D}.
struct ModularSpec {
  int n;
  GraphPtr graph;

  static ModularSpec cuntz(int n) { return ModularSpec{n, make_cuntz_graph(n)}; }
  static ModularSpec over(GraphPtr g) {
    StateFunctional s = StateFunctional::cuntz_kms(g);  // validates the O_n shape
    return ModularSpec{s.n, g};
  }
  StateFunctional state() const { return StateFunctional::cuntz_kms(graph); }
};

inline AlgebraElement apply_delta(const ModularSpec& spec, const AlgebraElement& a, int power = 1) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms())
    out.add_term(m, Scalar(rational_pow(Rational(spec.n),
                                        -static_cast<long>(m.degree()) * power)) *
                        c);
  return out;
}

// The regular automorphism sigma(a) = Delta^{-1} a Delta scales a degree-d
// monomial by n^d; it coincides with the KMS flow continued to t = i.
inline AlgebraElement sigma(const ModularSpec& spec, const AlgebraElement& a, int power = 1) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms())
    out.add_term(m,
                 Scalar(rational_pow(Rational(spec.n), static_cast<long>(m.degree()) * power)) * c);
  return out;
}

struct SigmaTimeI {};  // tag for analytic continuation to t = i

// sigma_t for real rational t only has exactly representable phases at t = 0;
// the continued value t = i gives the rational rescaling above.
inline AlgebraElement sigma_act(const ModularSpec& spec, const AlgebraElement& a,
                                const std::variant<Rational, SigmaTimeI>& t) {
  if (std::holds_alternative<SigmaTimeI>(t)) return sigma(spec, a);
  if (std::get<Rational>(t) != 0)
    throw precondition_error("sigma_act: phase n^{it} is not Gaussian rational for t != 0");
  return a;
}

inline AlgebraMatrix sigma(const ModularSpec& spec, const AlgebraMatrix& u, int power = 1) {
  AlgebraMatrix r(u.graph(), u.size());
  for (int i = 0; i < u.size(); ++i)
    for (int j = 0; j < u.size(); ++j) r.at(i, j) = sigma(spec, u.at(i, j), power);
  return r;
}

// --------------------------------------------------------------------------
// Tomita operators S, F, J

inline AlgebraElement tomita_S(const AlgebraElement& a) { return adjoint(a); }

// F = S^*: F(S_mu S_nu^*) = n^{|mu|-|nu|} S_nu S_mu^*, antilinear.
inline AlgebraElement tomita_F(const ModularSpec& spec, const AlgebraElement& a) {
  AlgebraElement out(a.graph());
  for (const auto& [m, c] : a.terms())
    out.add_term(Monomial{m.nu, m.mu},
                 Scalar(rational_pow(Rational(spec.n), m.degree())) * c.conj());
  return out;
}

// rat + sqrt(n) * irr: J produces half powers of n, carried exactly.
struct RootScaledElement {
  AlgebraElement rat;
  AlgebraElement irr;

  bool equals(const RootScaledElement& o) const {
    return elements_equal(rat, o.rat) && elements_equal(irr, o.irr);
  }
};

inline RootScaledElement root_scaled(const AlgebraElement& a) {
  return RootScaledElement{a, zero_element(a.graph())};
}

// J = S Delta^{-1/2}: J(S_mu S_nu^*) = n^{(|mu|-|nu|)/2} S_nu S_mu^*, antilinear.
inline RootScaledElement tomita_J(const ModularSpec& spec, const AlgebraElement& a) {
  RootScaledElement out{zero_element(a.graph()), zero_element(a.graph())};
  for (const auto& [m, c] : a.terms()) {
    int d = m.degree();
    Monomial swapped{m.nu, m.mu};
    if (d % 2 == 0) {
      out.rat.add_term(swapped, Scalar(rational_pow(Rational(spec.n), d / 2)) * c.conj());
    } else {
      long h = (d - 1) / 2;  // n^{d/2} = n^h sqrt(n); d-1 is even so this is exact
      out.irr.add_term(swapped, Scalar(rational_pow(Rational(spec.n), h)) * c.conj());
    }
  }
  return out;
}

inline RootScaledElement tomita_J(const ModularSpec& spec, const RootScaledElement& a) {
  RootScaledElement jr = tomita_J(spec, a.rat);
  RootScaledElement ji = tomita_J(spec, a.irr);  // sqrt(n) commutes with the antilinear J
  // sqrt(n) * (ji.rat + sqrt(n) ji.irr) = n * ji.irr + sqrt(n) * ji.rat
  RootScaledElement out;
  out.rat = jr.rat + Scalar(Rational(spec.n)) * ji.irr;
  out.irr = jr.irr + ji.rat;
  return out;
}

struct TomitaImages {
  AlgebraElement s_image;
  AlgebraElement f_image;
  RootScaledElement j_image;
};

// Images of an element under S, F, J. F o S = Delta is asserted on the spot.
inline TomitaImages tomita_operators(const ModularSpec& spec, const AlgebraElement& a) {
  TomitaImages out{tomita_S(a), tomita_F(spec, a), tomita_J(spec, a)};
  if (!elements_equal(tomita_F(spec, out.s_image), apply_delta(spec, a)))
    throw precondition_error("F o S != Delta");
  return out;
}

// --------------------------------------------------------------------------
// modular unitaries

struct ModularCertificate {
  bool unitary = false;
  bool modular = false;
  int bad_i = -1, bad_j = -1;
  std::string bad_entry;  // canonical form of the offending entry of u sigma(u*)
};

inline ModularCertificate is_modular_unitary(const ModularSpec& spec, const AlgebraMatrix& u) {
  ModularCertificate cert;
  cert.unitary = u.is_unitary();
  if (!cert.unitary) return cert;
  AlgebraMatrix ustar = u.adjoint_matrix();
  AlgebraMatrix lhs = u * sigma(spec, ustar);
  AlgebraMatrix rhs = ustar * sigma(spec, u);
  cert.modular = true;
  for (const AlgebraMatrix* m : {&lhs, &rhs}) {
    for (int i = 0; i < u.size(); ++i)
      for (int j = 0; j < u.size(); ++j) {
        AlgebraElement off = normal_form(m->at(i, j) - expectation(m->at(i, j)));
        if (!off.is_zero()) {
          cert.modular = false;
          cert.bad_i = i;
          cert.bad_j = j;
          cert.bad_entry = element_str(off);
          return cert;
        }
      }
  }
  return cert;
}

struct ModularUnitary {
  AlgebraMatrix u;
  bool verified = false;
  bool v_shaped = false;      // built from a partial isometry as in the u_v example
  AlgebraElement v;           // the partial isometry when v_shaped
  ModularCertificate cert;
};

inline json modular_unitary_json(const ModularUnitary& mu) {
  json rows = json::array();
  for (int i = 0; i < mu.u.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < mu.u.size(); ++j) row.push_back(element_str(mu.u.at(i, j)));
    rows.push_back(row);
  }
  return json{{"matrix", rows},
              {"verified", mu.verified},
              {"unitary", mu.cert.unitary},
              {"modular", mu.cert.modular}};
}

// u_v = [[1 - v^*v, v^*], [v, 1 - vv^*]] for a partial isometry v with range
// and source projections in F and v sigma(v^*), v^* sigma(v) in F.
inline ModularUnitary build_u_v(const ModularSpec& spec, const AlgebraElement& v) {
  AlgebraElement vstar = adjoint(v);
  AlgebraElement src = multiply(vstar, v);
  AlgebraElement rng = multiply(v, vstar);
  for (const AlgebraElement* p : {&src, &rng}) {
    if (!elements_equal(multiply(*p, *p), *p) || !elements_equal(adjoint(*p), *p))
      throw precondition_error("build_u_v: v is not a partial isometry");
    if (!element_is_zero(*p - expectation(*p)))
      throw precondition_error("build_u_v: source/range projection leaves F");
  }
  for (AlgebraElement w : {multiply(v, sigma(spec, vstar)), multiply(vstar, sigma(spec, v))})
    if (!element_is_zero(w - expectation(w)))
      throw precondition_error("build_u_v: modular condition fails for v");
  AlgebraElement one = unit_element(v.graph());
  ModularUnitary mu;
  mu.u = AlgebraMatrix(v.graph(), 2);
  mu.u.at(0, 0) = normal_form(one - src);
  mu.u.at(0, 1) = vstar;
  mu.u.at(1, 0) = v;
  mu.u.at(1, 1) = normal_form(one - rng);
  mu.cert = is_modular_unitary(spec, mu.u);
  mu.verified = mu.cert.unitary && mu.cert.modular;
  mu.v_shaped = true;
  mu.v = v;
  if (!mu.verified) throw precondition_error("build_u_v: modular condition fails");
  return mu;
}

// u_{mu,nu} = [[1 - P_mu, S_mu S_nu^*], [S_nu S_mu^*, 1 - P_nu]]; this is
// u_v for v = S_nu S_mu^*, self-adjoint by construction.
inline ModularUnitary build_u_mu_nu(const ModularSpec& spec, const Path& mu, const Path& nu) {
  if (mu.empty() || nu.empty()) throw precondition_error("build_u_mu_nu: paths must be nonempty");
  if (!mu.valid(*spec.graph) || !nu.valid(*spec.graph))
    throw precondition_error("build_u_mu_nu: invalid paths");
  AlgebraElement v = monomial_element(spec.graph, nu, mu);
  ModularUnitary out = build_u_v(spec, v);
  if (!out.u.equals(out.u.adjoint_matrix()))
    throw precondition_error("u_{mu,nu} should be self-adjoint");
  return out;
}

// --------------------------------------------------------------------------
// the modular index pairing

// sf_{phi_2}(D_2, u D_2 u^*) = (|mu|-|nu|) (n^{-|nu|} - n^{-|mu|}),
// nonnegative and in (n-1) Z[1/n].
inline Rational modular_index_closed_form(const ModularSpec& spec, const Path& mu,
                                          const Path& nu);
inline Rational modular_index_closed_form(const ModularSpec& spec, int mu_len, int nu_len) {
  Rational val = Rational(mu_len - nu_len) * (rational_pow(Rational(spec.n), -nu_len) -
                                              rational_pow(Rational(spec.n), -mu_len));
  if (val < 0) throw precondition_error("closed form should be nonnegative");
  // membership in (n-1) Z[1/n]: val / (n-1) must have an n-power denominator
  if (val != 0) {
    Rational q = val / Rational(spec.n - 1);
    Integer den = denominator(q);
    while (den % spec.n == 0) den /= spec.n;
    if (den != 1) throw precondition_error("closed form escapes (n-1) Z[1/n]");
  }
  return val;
}

inline Rational modular_index_closed_form(const ModularSpec& spec, const Path& mu,
                                          const Path& nu) {
  return modular_index_closed_form(spec, mu.length(), nu.length());
}

struct ModularIndexResult {
  double value;
  double spread;
  std::map<int, Rational> coefficients;
};

// Residue channel of the modular pairing for a u_v-shaped unitary: the
// coefficients c_j = (tau_Delta (x) Tr_k)(u[D_k,u] Phi_j) are exact probe
// sums, and the spectral flow is half the residue of sum_j c_j (1+j^2)^{-s/2}
// at s = 1. Only the u_v shape is accepted: the eta corrections cancel there.
inline ModularIndexResult modular_index_residue(const ModularSpec& spec, const ModularUnitary& mu,
                                                int K = 8) {
  if (!mu.v_shaped || !mu.verified)
    throw precondition_error("modular_index_residue: need a verified u_v-shaped unitary");
  StateFunctional s = spec.state();
  AlgebraMatrix dU = matrix_degree_derivation(mu.u);  // [D_k, u] entrywise
  AlgebraMatrix A = mu.u * dU;
  ModularIndexResult out;
  for (int j = -K; j <= K; ++j) out.coefficients[j] = 0;
  for (int b = 0; b < A.size(); ++b) {
    SymbolicOperator T = op_compose(op_delta_pow(spec.n, 1), op_left_mult(A.at(b, b)));
    for (int j = -K; j <= K; ++j) {
      Scalar c = phi_filtered_probe(s, T, j);
      if (!c.is_real()) throw precondition_error("modular residue coefficients must be real");
      out.coefficients[j] += c.re;
    }
  }
  ResidueEstimate est = zeta_residue(out.coefficients);
  out.value = est.value / 2;
  out.spread = est.spread / 2;
  return out;
}

// --------------------------------------------------------------------------
// twisted trace identity tau_Delta(T1 T2) = tau_Delta(Delta^{-1} T2 Delta T1)

inline bool twisted_trace_check(const ModularSpec& spec, const SymbolicOperator& t1,
                                const SymbolicOperator& t2, int cutoff) {
  StateFunctional s = spec.state();
  SymbolicOperator lhs = op_compose(t1, t2);
  SymbolicOperator rhs = op_compose(op_delta_pow(spec.n, -1),
                                    op_compose(t2, op_compose(op_delta_pow(spec.n, 1), t1)));
  ProbeSumReport l = tau_delta_symbolic(s, lhs, cutoff + 1);
  ProbeSumReport r = tau_delta_symbolic(s, rhs, cutoff + 1);
  if (!(l.partial[cutoff] == l.value) || !(r.partial[cutoff] == r.value))
    throw instability_error("twisted trace probe sums still moving at the cutoff");
  return l.value == r.value;
}

// --------------------------------------------------------------------------
// u Q u^* commutes with Delta for every spectral projection Q of
// D iff u is modular. Checked on the algebra: u Phi_j u^* applied to each
// window basis vector must stay in the degree sector it started from.

inline bool modular_conjugation_check(const ModularSpec& spec, const TruncatedRep& rep,
                                      const AlgebraMatrix& u) {
  if (rep.graph != spec.graph || u.graph() != spec.graph)
    throw precondition_error("modular_conjugation_check: graph mismatch");
  AlgebraMatrix ustar = u.adjoint_matrix();
  for (int j = rep.cfg.k_min; j <= rep.cfg.k_max; ++j) {
    if (!rep.has_sector(j)) continue;
    for (const auto& bv : rep.basis) {
      AlgebraElement b = monomial_element(rep.graph, bv.m.mu, bv.m.nu);
      for (int slot = 0; slot < u.size(); ++slot) {
        for (int l = 0; l < u.size(); ++l) {
          AlgebraElement y(rep.graph);
          for (int m = 0; m < u.size(); ++m)
            y += multiply(u.at(l, m), gauge_component(multiply(ustar.at(m, slot), b), j));
          if (!element_is_zero(y - gauge_component(y, bv.degree))) return false;
        }
      }
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// modular homotopy u_{mu,nu} ~ u_{nu,mu}

struct HomotopyCertificate {
  bool all_points_modular = true;
  bool endpoint_matches = false;
  bool closed_form_invariant = false;
  int samples = 0;
};

// Conjugation by the scalar unitaries V_r = [[c, is], [is, c]], (c, s) on the
// rational circle via c = (1-r^2)/(1+r^2), s = 2r/(1+r^2). Scalar entries
// leave the modular condition untouched, and at r = 1 the conjugation swaps
// the two corners, landing on u_{nu,mu}. Every sample point is checked
// exactly.
inline HomotopyCertificate modular_homotopy_mu_nu(const ModularSpec& spec, const Path& mu,
                                                  const Path& nu, int samples = 32) {
  if (samples < 2) throw precondition_error("homotopy needs at least the two endpoints");
  ModularUnitary start = build_u_mu_nu(spec, mu, nu);
  ModularUnitary finish = build_u_mu_nu(spec, nu, mu);
  HomotopyCertificate cert;
  cert.samples = samples;
  AlgebraElement one = unit_element(spec.graph);
  AlgebraMatrix last = start.u;
  for (int k = 0; k < samples; ++k) {
    Rational r(k, samples - 1);
    Rational denom = 1 + r * r;
    Scalar c(Rational(1 - r * r) / denom);
    Scalar is = Scalar::i() * Scalar(Rational(2) * r / denom);
    AlgebraMatrix V(spec.graph, 2);
    V.at(0, 0) = c * one;
    V.at(0, 1) = is * one;
    V.at(1, 0) = is * one;
    V.at(1, 1) = c * one;
    AlgebraMatrix ut = V * start.u * V.adjoint_matrix();
    ModularCertificate point = is_modular_unitary(spec, ut);
    if (!(point.unitary && point.modular)) cert.all_points_modular = false;
    last = ut;
  }
  cert.endpoint_matches = last.equals(finish.u);
  cert.closed_form_invariant =
      modular_index_closed_form(spec, mu.length(), nu.length()) ==
      modular_index_closed_form(spec, nu.length(), mu.length());
  return cert;
}

}  // namespace ckindex
