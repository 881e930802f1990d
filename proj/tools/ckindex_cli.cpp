#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ckindex/expr.hpp"
#include "ckindex/flow.hpp"
#include "ckindex/modular.hpp"

namespace ck = ckindex;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ck::input_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int default_depth() {
  if (const char* env = std::getenv("CKINDEX_DEPTH_DEFAULT")) {
    int d = std::atoi(env);
    if (d > 0) return d;
  }
  return 12;
}

void emit(const ck::json& out, const std::string& summary) {
  std::cout << out.dump(2) << "\n";
  std::cerr << summary << "\n";
}

// Window size estimate before enumerating anything; branching graphs explode
// exponentially with depth.
long window_size_estimate(const ck::DirectedGraph& g, int depth) {
  long total = 0;
  for (int k = -depth; k <= depth; ++k) {
    long mu_len = depth + k;
    if (mu_len < 0) continue;
    for (size_t v = 0; v < g.vertices.size(); ++v)
      total += ck::path_count_with_range(g, static_cast<int>(v), static_cast<int>(mu_len)) *
               ck::path_count_with_range(g, static_cast<int>(v), depth);
  }
  return total;
}

void guard_window(const ck::DirectedGraph& g, int depth) {
  if (window_size_estimate(g, depth) > 20000)
    throw ck::input_error("window too large at this depth; lower --depth");
}

struct TraceOutcome {
  std::optional<ck::GraphTrace> trace;
  ck::json note;
};

TraceOutcome trace_outcome(ck::GraphPtr g) {
  auto r = ck::solve_graph_trace(g);
  TraceOutcome out;
  if (std::holds_alternative<ck::GraphTrace>(r)) {
    out.trace = std::get<ck::GraphTrace>(r);
    out.note = ck::json{{"faithful", true}, {"weights", ck::graph_trace_json(*out.trace)}};
  } else {
    const auto& no = std::get<ck::NoFaithfulTrace>(r);
    ck::json loop = ck::json::array();
    for (int v : no.loop) loop.push_back(g->vertices[v]);
    out.note = ck::json{{"faithful", false},
                        {"certificate",
                         {{"kind", "loop_with_exit"},
                          {"loop", loop},
                          {"exit_vertex", g->vertices[no.exit_vertex]}}}};
  }
  return out;
}

int cmd_analyze(const std::string& graph_file) {
  auto g = ck::load_graph_text(read_file(graph_file));
  ck::json out;
  out["structural"] = ck::structural_report_json(*g);
  auto se = ck::single_entry_check(*g);
  out["single_entry"] = ck::json{{"single_entry", se.single_entry},
                                 {"connected", se.connected},
                                 {"classification",
                                  se.nloop > 0 ? ck::json("NLoop(" + std::to_string(se.nloop) + ")")
                                               : ck::json(nullptr)}};
  auto orient = ck::orientability_check(g);
  out["orientability"] = ck::json{{"boundary_zero", orient.boundary_zero},
                                  {"volume_is_unit", orient.volume_is_unit},
                                  {"oriented", orient.oriented},
                                  {"volume_form", ck::element_str(orient.volume_form)}};
  out["graph_trace"] = trace_outcome(g).note;
  emit(out, "analyze: ok");
  return 0;
}

int cmd_trace(const std::string& graph_file) {
  auto g = ck::load_graph_text(read_file(graph_file));
  emit(trace_outcome(g).note, "trace: ok");
  return 0;
}

int cmd_ktheory(const std::string& graph_file) {
  auto g = ck::load_graph_text(read_file(graph_file));
  emit(ck::ktheory_json(ck::ktheory(*g)), "ktheory: ok");
  return 0;
}

ck::StateFunctional pick_state(ck::GraphPtr g, const std::string& kind) {
  if (kind == "kms") return ck::StateFunctional::cuntz_kms(g);
  if (kind == "trace" || kind == "auto") {
    auto r = ck::solve_graph_trace(g);
    if (std::holds_alternative<ck::GraphTrace>(r))
      return ck::StateFunctional::induced(std::get<ck::GraphTrace>(r));
    if (kind == "trace") throw ck::precondition_error("graph has no faithful trace");
    return ck::StateFunctional::cuntz_kms(g);
  }
  throw ck::input_error("unknown state kind '" + kind + "'");
}

int cmd_rep(const std::string& graph_file, int depth, const std::string& state_kind,
            std::vector<std::string> ops) {
  auto g = ck::load_graph_text(read_file(graph_file));
  guard_window(*g, depth);
  ck::StateFunctional s = pick_state(g, state_kind);
  ck::TruncatedRep rep = ck::standard_rep(g, s, depth);
  ck::json out;
  ck::json labels = ck::json::array();
  ck::json gram = ck::json::array();
  for (int i = 0; i < rep.size(); ++i) {
    labels.push_back(ck::monomial_str(*g, rep.basis[i].m));
    gram.push_back(ck::rational_str(rep.gram[i]));
  }
  out["basis"] = labels;
  out["gram_diagonal"] = gram;
  out["D"] = ck::matrix_json(rep, ck::matrix_of_D(rep));
  ck::json extra = ck::json::object();
  for (const auto& spec : ops) {
    if (spec.rfind("phi:", 0) == 0) {
      int k = std::stoi(spec.substr(4));
      extra[spec] = ck::matrix_json(rep, ck::matrix_of_phi_k(rep, k));
    } else if (spec.rfind("left:", 0) == 0) {
      auto a = ck::parse_element(g, spec.substr(5));
      extra[spec] = ck::matrix_json(rep, ck::matrix_of_left_mult(rep, a));
    } else {
      throw ck::input_error("unknown --op '" + spec + "' (use phi:K or left:EXPR)");
    }
  }
  out["operators"] = extra;
  emit(out, "rep: " + std::to_string(rep.size()) + " basis vectors");
  return 0;
}

int cmd_residue(const std::string& graph_file, const std::string& element, int depth) {
  auto g = ck::load_graph_text(read_file(graph_file));
  auto a = ck::parse_element(g, element);
  int K = std::min(8, depth);
  if (K < 4) throw ck::instability_error("depth too small for a residue window");
  ck::StateFunctional s = pick_state(g, "auto");
  std::map<int, ck::Rational> c;
  if (s.kind == ck::StateFunctional::Kind::CuntzKMS)
    c = ck::residue_family_kms(s, a, K);
  else
    c = ck::residue_family_tracial(s, a, K);
  ck::ResidueEstimate est = ck::zeta_residue(c);
  ck::Scalar tau = ck::evaluate(s, a);
  double expected = 2 * ck::scalar_double(tau);
  bool comparable = s.kind == ck::StateFunctional::Kind::CuntzKMS ||
                    !ck::structural_report(*g).has_sinks;
  ck::json coeffs = ck::json::object();
  for (const auto& [k, v] : c) coeffs[std::to_string(k)] = ck::rational_str(v);
  ck::json out{{"residue", {{"value", est.value}, {"spread", est.spread}}},
               {"coefficients", coeffs},
               {"two_tau", comparable ? ck::json(expected) : ck::json(nullptr)},
               {"pass", comparable ? ck::json(std::abs(est.value - expected) <= 1e-3)
                                   : ck::json(nullptr)}};
  emit(out, "residue: value " + std::to_string(est.value));
  if (comparable && std::abs(est.value - expected) > 1e-3) return 3;
  return 0;
}

int cmd_modular(int n, const std::string& mu_spec, const std::string& nu_spec, int depth,
                bool certify) {
  ck::ModularSpec spec = ck::ModularSpec::cuntz(n);
  ck::Path mu = ck::parse_path_spec(*spec.graph, mu_spec);
  ck::Path nu = ck::parse_path_spec(*spec.graph, nu_spec);
  ck::ModularUnitary u = ck::build_u_mu_nu(spec, mu, nu);
  ck::Rational closed = ck::modular_index_closed_form(spec, mu, nu);
  int K = std::min(8, depth - std::max(mu.length(), nu.length()));
  if (K < 4) throw ck::instability_error("depth too small for the residue window");
  ck::ModularIndexResult res = ck::modular_index_residue(spec, u, K);
  ck::json out;
  out["unitary"] = ck::modular_unitary_json(u);
  out["closed_form"] = ck::rational_str(closed);
  out["residue"] = ck::json{{"value", res.value}, {"spread", res.spread}};
  out["agree"] = std::abs(res.value - ck::rational_double(closed)) <= 0.01;
  if (certify) {
    ck::TruncatedRep rep = ck::standard_rep(spec.graph, spec.state(), 2);
    out["conjugation_check"] = ck::modular_conjugation_check(spec, rep, u.u);
    auto hom = ck::modular_homotopy_mu_nu(spec, mu, nu);
    out["homotopy"] = ck::json{{"all_points_modular", hom.all_points_modular},
                               {"endpoint_matches", hom.endpoint_matches},
                               {"closed_form_invariant", hom.closed_form_invariant}};
  }
  emit(out, "modular: closed form " + ck::rational_str(closed));
  return out["agree"].get<bool>() ? 0 : 3;
}

int cmd_pair(const std::string& graph_file, const std::string& unitary, int depth,
             std::vector<std::string> channels, int m) {
  auto g = ck::load_graph_text(read_file(graph_file));
  auto want = [&](const std::string& ch) {
    return channels.empty() || std::find(channels.begin(), channels.end(), ch) != channels.end();
  };
  ck::IndexReport report;
  report.depth = depth;

  if (unitary.rfind("umn:", 0) == 0) {
    // modular pairing on O_n
    ck::ModularSpec spec = ck::ModularSpec::over(g);
    size_t c1 = unitary.find(':', 4);
    if (c1 == std::string::npos) throw ck::input_error("umn spec is umn:MU:NU");
    ck::Path mu = ck::parse_path_spec(*g, unitary.substr(4, c1 - 4));
    ck::Path nu = ck::parse_path_spec(*g, unitary.substr(c1 + 1));
    ck::ModularUnitary u = ck::build_u_mu_nu(spec, mu, nu);
    report.closed_form = ck::modular_index_closed_form(spec, mu, nu);
    if (want("residue")) {
      int K = std::min(8, depth - std::max(mu.length(), nu.length()));
      if (K < 4) throw ck::instability_error("depth too small for the residue window");
      ck::ModularIndexResult res = ck::modular_index_residue(spec, u, K);
      report.residue_sf = ck::ResidueEstimate{res.value, res.spread, 0, 0};
      report.agree["residue_vs_closed"] =
          std::abs(res.value - ck::rational_double(*report.closed_form)) <= 0.01;
    }
  } else {
    auto r = ck::solve_graph_trace(g);
    if (!std::holds_alternative<ck::GraphTrace>(r))
      throw ck::precondition_error(
          "graph has no faithful trace; use a umn: modular unitary for Cuntz graphs");
    ck::StateFunctional s = ck::StateFunctional::induced(std::get<ck::GraphTrace>(r));
    ck::AlgebraElement u = ck::parse_element(g, unitary);
    ck::AlgebraMatrix um = ck::AlgebraMatrix::from_element(u);
    if (!um.is_unitary()) throw ck::precondition_error("input expression is not unitary");
    guard_window(*g, depth + 1);
    if (want("toeplitz")) {
      ck::ToeplitzResult t = ck::toeplitz_index_stable(g, s, um, depth);
      report.toeplitz = t.index;
    }
    ck::TruncatedRep rep = ck::standard_rep(g, s, depth);
    ck::SpectralFlowPath path = ck::make_flow_path(rep, u);
    if (want("crossings")) {
      report.crossings = ck::spectral_flow_crossings(path);
      if (report.toeplitz && report.crossings->exact)
        report.agree["toeplitz_vs_crossings"] = *report.toeplitz == report.crossings->exact_value;
    }
    if (want("integral")) {
      report.integral = ck::spectral_flow_integral(path, m);
      if (report.toeplitz)
        report.agree["integral_vs_toeplitz"] =
            std::abs(report.integral->value - ck::rational_double(*report.toeplitz)) <= 0.05;
    }
    if (want("residue")) {
      ck::AlgebraElement w = ck::multiply(u, ck::degree_derivation(ck::adjoint(u)));
      auto c = ck::residue_family_tracial(s, w, std::min(8, depth));
      ck::ResidueEstimate est = ck::zeta_residue(c);
      report.residue_sf = ck::ResidueEstimate{est.value / 2, est.spread / 2, est.c_plus, est.c_minus};
      if (report.toeplitz)
        report.agree["residue_vs_toeplitz"] =
            std::abs(report.residue_sf->value - ck::rational_double(*report.toeplitz)) <= 5e-2;
    }
  }
  emit(ck::index_report_json(report), report.all_agree() ? "pair: channels agree"
                                                         : "pair: channel disagreement");
  return report.all_agree() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ckindex: graph C*-algebra spectral triples and index pairings"};
  app.require_subcommand(1);

  std::string graph_file, unitary, element, mu_spec, nu_spec, state_kind = "auto";
  int depth = default_depth();
  int n = 2, m = 2;
  bool certify = false;
  std::vector<std::string> channels, ops;

  auto* analyze = app.add_subcommand("analyze", "structural and orientability report");
  analyze->add_option("--graph", graph_file)->required();

  auto* trace = app.add_subcommand("trace", "solve for a faithful graph trace");
  trace->add_option("--graph", graph_file)->required();

  auto* kth = app.add_subcommand("ktheory", "K-theory via Smith normal form");
  kth->add_option("--graph", graph_file)->required();

  auto* rep = app.add_subcommand("rep", "export a truncated representation");
  rep->add_option("--graph", graph_file)->required();
  rep->add_option("--depth", depth)->required();
  rep->add_option("--state", state_kind, "auto|trace|kms");
  rep->add_option("--op", ops, "phi:K or left:EXPR (repeatable)");

  auto* pair = app.add_subcommand("pair", "index pairing through all channels");
  pair->add_option("--graph", graph_file)->required();
  pair->add_option("--unitary", unitary, "expression or umn:MU:NU")->required();
  pair->add_option("--depth", depth);
  pair->add_option("--channels", channels)->delimiter(',');
  pair->add_option("--m", m, "even resolvent power for the integral channel");

  auto* modular = app.add_subcommand("modular", "modular unitary u_{mu,nu} report");
  modular->add_option("--n", n)->required();
  modular->add_option("--mu", mu_spec)->required();
  modular->add_option("--nu", nu_spec)->required();
  modular->add_option("--depth", depth);
  modular->add_flag("--certify", certify, "run conjugation and homotopy certificates");

  auto* residue = app.add_subcommand("residue", "zeta residue of an element");
  residue->add_option("--graph", graph_file)->required();
  residue->add_option("--element", element)->required();
  residue->add_option("--depth", depth);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return cmd_analyze(graph_file);
    if (trace->parsed()) return cmd_trace(graph_file);
    if (kth->parsed()) return cmd_ktheory(graph_file);
    if (rep->parsed()) return cmd_rep(graph_file, depth, state_kind, ops);
    if (pair->parsed()) return cmd_pair(graph_file, unitary, depth, channels, m);
    if (modular->parsed()) return cmd_modular(n, mu_spec, nu_spec, depth, certify);
    if (residue->parsed()) return cmd_residue(graph_file, element, depth);
  } catch (const ck::input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ck::instability_error& e) {
    std::cerr << "truncation instability: " << e.what() << "\n";
    return 3;
  } catch (const ck::precondition_error& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
