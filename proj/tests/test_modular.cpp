#include <catch2/catch_amalgamated.hpp>

#include "ckindex/expr.hpp"
#include "ckindex/modular.hpp"
#include "test_util.hpp"

using namespace ckindex;
namespace tu = ckindex::testutil;

namespace {
AlgebraElement S(GraphPtr g, const std::string& edge) {
  return edge_isometry(g, g->edge_index(edge));
}
AlgebraElement Sp(GraphPtr g, const ModularSpec& spec, const std::string& path) {
  return path_isometry(g, parse_path_spec(*g, path));
}

// A unitary in O_2 mixing degrees coherently; u u^* = 1 exactly but
// u sigma(u^*) has a degree -1 component, so the modular condition fails.
AlgebraElement modular_counterexample(GraphPtr o2) {
  auto P = [&](const std::string& a, const std::string& b) {
    return multiply(path_isometry(o2, parse_path_spec(*o2, a)),
                    adjoint(path_isometry(o2, parse_path_spec(*o2, b))));
  };
  AlgebraElement u = Scalar(Rational(3, 5)) * P("1", "2");
  u += Scalar(Rational(4, 5)) * P("2.1", "2");
  u -= Scalar(Rational(4, 5)) * P("1", "1.1");
  u += Scalar(Rational(3, 5)) * P("2.1", "1.1");
  u += P("2.2", "1.2");
  return u;
}
}  // namespace

TEST_CASE("sigma is the regular automorphism with rational factors") {
  ModularSpec spec = ModularSpec::cuntz(2);
  auto g = spec.graph;
  CHECK(elements_equal(sigma(spec, S(g, "1")), Scalar(Rational(2)) * S(g, "1")));
  CHECK(elements_equal(sigma(spec, vertex_projection(g, 0)), vertex_projection(g, 0)));
  for (int t = 0; t < 30; ++t) {
    AlgebraElement a = tu::random_element(g);
    CHECK(elements_equal(adjoint(sigma(spec, a)), sigma(spec, adjoint(a), -1)));
  }
  CHECK(elements_equal(sigma_act(spec, S(g, "1"), SigmaTimeI{}), sigma(spec, S(g, "1"))));
  CHECK(elements_equal(sigma_act(spec, S(g, "1"), Rational(0)), S(g, "1")));
  CHECK_THROWS_AS(sigma_act(spec, S(g, "1"), Rational(1, 4)), precondition_error);
}

TEST_CASE("Delta equals n^{-D} on every window") {
  ModularSpec spec = ModularSpec::cuntz(3);
  TruncatedRep rep = build_rep(spec.graph, spec.state(), RepConfig{2, -2, 2});
  TruncatedOperator delta = matrix_of_delta(rep);
  for (int i = 0; i < rep.size(); ++i) {
    CHECK(delta.at(i, i) == Scalar(rational_pow(Rational(3), -rep.basis[i].degree)));
    for (int j = 0; j < rep.size(); ++j)
      if (i != j) CHECK(delta.at(i, j).is_zero());
  }
  // Delta acts on monomials by n^{|nu|-|mu|}
  AlgebraElement s1 = S(spec.graph, "1");
  CHECK(elements_equal(apply_delta(spec, s1), Scalar(Rational(1, 3)) * s1));
}

TEST_CASE("Tomita operators S, F, J") {
  ModularSpec spec = ModularSpec::cuntz(2);
  auto g = spec.graph;
  AlgebraElement a = multiply(S(g, "1"), adjoint(Sp(g, spec, "1.2")));  // S_1 S_{12}^*
  // F(S_1 S_{12}^*) = 2^{-1} S_{12} S_1^*
  AlgebraElement expected = Scalar(Rational(1, 2)) * multiply(Sp(g, spec, "1.2"), adjoint(S(g, "1")));
  CHECK(elements_equal(tomita_F(spec, a), expected));

  for (int t = 0; t < 30; ++t) {
    AlgebraElement x = tu::random_element(g);
    CHECK(elements_equal(tomita_S(tomita_S(x)), x));
    // F o S = Delta
    CHECK(elements_equal(tomita_F(spec, tomita_S(x)), apply_delta(spec, x)));
    // J^2 = 1 with the half powers carried exactly
    RootScaledElement jj = tomita_J(spec, tomita_J(spec, x));
    CHECK(jj.equals(root_scaled(x)));
  }
  // J sends odd degrees into the sqrt(n) component
  RootScaledElement j1 = tomita_J(spec, S(g, "1"));
  CHECK(j1.rat.is_zero());
  CHECK_FALSE(j1.irr.is_zero());

  // the aggregate asserts F o S = Delta internally
  TomitaImages im = tomita_operators(spec, a);
  CHECK(elements_equal(im.s_image, adjoint(a)));
}

TEST_CASE("sigma fixes every gauge sector setwise") {
  ModularSpec spec = ModularSpec::cuntz(3);
  for (int t = 0; t < 30; ++t) {
    AlgebraElement a = tu::random_element(spec.graph);
    auto [lo, hi] = degree_range(a);
    for (int k = lo; k <= hi; ++k)
      CHECK(elements_equal(gauge_component(sigma(spec, a), k), sigma(spec, gauge_component(a, k))));
  }
}

TEST_CASE("u_{mu,nu} is a self-adjoint modular unitary") {
  ModularSpec spec = ModularSpec::cuntz(2);
  Path mu = parse_path_spec(*spec.graph, "1");
  Path nu = parse_path_spec(*spec.graph, "1.2");
  ModularUnitary u = build_u_mu_nu(spec, mu, nu);
  CHECK(u.verified);
  CHECK(u.u.equals(u.u.adjoint_matrix()));
  ModularCertificate cert = is_modular_unitary(spec, u.u);
  CHECK(cert.unitary);
  CHECK(cert.modular);
  CHECK_THROWS_AS(build_u_mu_nu(spec, Path::at_vertex(0), nu), precondition_error);
}

TEST_CASE("degree-0 unitaries are trivially modular") {
  ModularSpec spec = ModularSpec::cuntz(2);
  auto g = spec.graph;
  AlgebraElement w = multiply(S(g, "1"), adjoint(S(g, "2"))) +
                     multiply(S(g, "2"), adjoint(S(g, "1")));
  AlgebraMatrix wm = AlgebraMatrix::from_element(w);
  ModularCertificate cert = is_modular_unitary(spec, wm);
  CHECK(cert.unitary);
  CHECK(cert.modular);
}

TEST_CASE("a degree-mixing unitary that fails the modular condition") {
  ModularSpec spec = ModularSpec::cuntz(2);
  AlgebraElement u = modular_counterexample(spec.graph);
  AlgebraMatrix um = AlgebraMatrix::from_element(u);
  REQUIRE(um.is_unitary());
  ModularCertificate cert = is_modular_unitary(spec, um);
  CHECK(cert.unitary);
  CHECK_FALSE(cert.modular);
  CHECK(cert.bad_i == 0);
  CHECK_FALSE(cert.bad_entry.empty());
}

TEST_CASE("build_u_v variants") {
  ModularSpec spec = ModularSpec::cuntz(2);
  auto g = spec.graph;
  Path mu = parse_path_spec(*g, "1");
  Path nu = parse_path_spec(*g, "2");
  // v = S_nu S_mu^* reproduces u_{mu,nu}
  AlgebraElement v = multiply(path_isometry(g, nu), adjoint(path_isometry(g, mu)));
  ModularUnitary uv = build_u_v(spec, v);
  ModularUnitary umn = build_u_mu_nu(spec, mu, nu);
  CHECK(uv.u.equals(umn.u));

  // v = 0 gives the identity
  ModularUnitary uid = build_u_v(spec, zero_element(g));
  CHECK(uid.u.equals(AlgebraMatrix::identity(g, 2)));

  // v = p_v swaps the corners
  ModularUnitary up = build_u_v(spec, vertex_projection(g, 0));
  CHECK(up.verified);
  CHECK(up.u.at(0, 0).is_zero());
  CHECK(elements_equal(up.u.at(0, 1), vertex_projection(g, 0)));

  // a non-partial-isometry is rejected
  CHECK_THROWS_AS(build_u_v(spec, vertex_projection(g, 0) + S(g, "1")), precondition_error);
}

TEST_CASE("closed-form modular index values") {
  ModularSpec o2 = ModularSpec::cuntz(2);
  CHECK(modular_index_closed_form(o2, 2, 1) == Rational(1, 4));
  CHECK(modular_index_closed_form(o2, 1, 1) == 0);
  ModularSpec o3 = ModularSpec::cuntz(3);
  CHECK(modular_index_closed_form(o3, 1, 0) == Rational(2, 3));
  // symmetry under swapping mu and nu
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      CHECK(modular_index_closed_form(o2, a, b) == modular_index_closed_form(o2, b, a));
}

TEST_CASE("residue channel reproduces the closed form") {
  ModularSpec spec = ModularSpec::cuntz(2);
  Path mu = parse_path_spec(*spec.graph, "1.1");
  Path nu = parse_path_spec(*spec.graph, "1");
  ModularUnitary u = build_u_mu_nu(spec, mu, nu);
  ModularIndexResult r = modular_index_residue(spec, u, 6);
  CHECK(std::abs(r.value - 0.25) < 0.01);
  // the coefficient family is the constant q (n^{-|nu|} - n^{-|mu|})
  for (const auto& [j, c] : r.coefficients) CHECK(c == Rational(1, 4));

  // identity (v = 0) and F-shaped v pair to zero
  ModularUnitary uid = build_u_v(spec, zero_element(spec.graph));
  CHECK(modular_index_residue(spec, uid, 5).value == 0.0);
  ModularUnitary up = build_u_v(spec, vertex_projection(spec.graph, 0));
  CHECK(modular_index_residue(spec, up, 5).value == 0.0);

  // only the u_v shape is accepted
  ModularUnitary synthetic;
  synthetic.u = AlgebraMatrix::identity(spec.graph, 2);
  synthetic.verified = true;
  synthetic.v_shaped = false;
  CHECK_THROWS_AS(modular_index_residue(spec, synthetic, 5), precondition_error);
}

TEST_CASE("residue channel on O_3") {
  ModularSpec spec = ModularSpec::cuntz(3);
  Path mu = parse_path_spec(*spec.graph, "1.1");
  Path nu = parse_path_spec(*spec.graph, "3");
  ModularUnitary u = build_u_mu_nu(spec, mu, nu);
  Rational closed = modular_index_closed_form(spec, mu, nu);
  CHECK(closed == Rational(2, 9));  // (2-1)(1/3 - 1/9)
  ModularIndexResult r = modular_index_residue(spec, u, 6);
  CHECK(std::abs(r.value - rational_double(closed)) < 0.01);
}

TEST_CASE("twisted trace identity") {
  ModularSpec spec = ModularSpec::cuntz(2);
  auto g = spec.graph;
  StateFunctional s = spec.state();
  AlgebraElement s1 = S(g, "1"), s2 = S(g, "2");

  CHECK(twisted_trace_check(spec, op_rank_one(s1, s1), op_rank_one(s2, s2), 4));
  // T2 = identity: both sides reduce to tau_Delta(T1)
  CHECK(twisted_trace_check(spec, op_rank_one(s1, s1), op_identity(), 4));

  // random rank-one pairs satisfy the twisted identity...
  for (int t = 0; t < 30; ++t) {
    AlgebraElement x = tu::random_element(g, 2, 1), y = tu::random_element(g, 2, 1);
    AlgebraElement w = tu::random_element(g, 2, 1), z = tu::random_element(g, 2, 1);
    CHECK(twisted_trace_check(spec, op_rank_one(x, y), op_rank_one(w, z), 4));
  }

  // ...while the plain trace property fails: tau_Delta is a weight, not a trace
  AlgebraElement one = unit_element(g);
  SymbolicOperator t1 = op_rank_one(s1, one), t2 = op_rank_one(one, s1);
  Scalar ab = tau_delta_symbolic(s, op_compose(t1, t2), 4).value;
  Scalar ba = tau_delta_symbolic(s, op_compose(t2, t1), 4).value;
  CHECK(ab == Scalar(Rational(1, 2)));
  CHECK(ba == Scalar(1));
  CHECK(twisted_trace_check(spec, t1, t2, 4));
}

TEST_CASE("conjugated spectral projections commute with Delta iff modular") {
  ModularSpec spec = ModularSpec::cuntz(2);
  TruncatedRep rep = build_rep(spec.graph, spec.state(), RepConfig{2, -2, 2});

  ModularUnitary umn =
      build_u_mu_nu(spec, parse_path_spec(*spec.graph, "1"), parse_path_spec(*spec.graph, "2"));
  CHECK(modular_conjugation_check(spec, rep, umn.u));

  AlgebraElement w = multiply(S(spec.graph, "1"), adjoint(S(spec.graph, "2"))) +
                     multiply(S(spec.graph, "2"), adjoint(S(spec.graph, "1")));
  CHECK(modular_conjugation_check(spec, rep, AlgebraMatrix::from_element(w)));

  AlgebraMatrix bad = AlgebraMatrix::from_element(modular_counterexample(spec.graph));
  CHECK_FALSE(modular_conjugation_check(spec, rep, bad));
}

TEST_CASE("modular homotopy between u_{mu,nu} and u_{nu,mu}") {
  ModularSpec spec = ModularSpec::cuntz(2);
  Path mu = parse_path_spec(*spec.graph, "1");
  Path nu = parse_path_spec(*spec.graph, "1.2");
  HomotopyCertificate cert = modular_homotopy_mu_nu(spec, mu, nu);
  CHECK(cert.all_points_modular);
  CHECK(cert.endpoint_matches);
  CHECK(cert.closed_form_invariant);
  CHECK(cert.samples == 32);

  // mu = nu: endpoints coincide
  HomotopyCertificate same = modular_homotopy_mu_nu(spec, mu, mu, 8);
  CHECK(same.all_points_modular);
  CHECK(same.endpoint_matches);
}

TEST_CASE("modular unitary serialization") {
  ModularSpec spec = ModularSpec::cuntz(2);
  ModularUnitary u =
      build_u_mu_nu(spec, parse_path_spec(*spec.graph, "1"), parse_path_spec(*spec.graph, "2"));
  json j = modular_unitary_json(u);
  CHECK(j["verified"] == true);
  CHECK(j["matrix"].size() == 2);
  CHECK(j["matrix"][0][1] == element_str(u.u.at(0, 1)));
}
