#pragma once

#include <cctype>
#include <string>

#include "ckindex/algebra.hpp"

namespace ckindex {

// Edge-id path spec: dot-separated ids ("e1.e2"); when the whole string is
// not itself an edge id and contains no dots, single characters are tried,
// so "12" reads as "1.2" on the Cuntz graphs.
inline Path parse_path_spec(const DirectedGraph& g, const std::string& spec) {
  std::vector<std::string> ids;
  if (spec.find('.') != std::string::npos) {
    size_t pos = 0;
    while (pos <= spec.size()) {
      size_t dot = spec.find('.', pos);
      if (dot == std::string::npos) dot = spec.size();
      ids.push_back(spec.substr(pos, dot - pos));
      pos = dot + 1;
    }
  } else {
    bool whole = false;
    for (const auto& e : g.edges)
      if (e.id == spec) whole = true;
    if (whole) {
      ids.push_back(spec);
    } else {
      for (char c : spec) ids.push_back(std::string(1, c));
    }
  }
  Path p;
  for (const auto& id : ids) p.edges.push_back(g.edge_index(id));
  if (p.edges.empty()) throw input_error("empty path spec");
  p.src = g.edges[p.edges.front()].src;
  if (!p.valid(g)) throw input_error("path '" + spec + "' is not composable");
  return p;
}

// Recursive-descent parser for the element micro-grammar:
//   expr    := ['-'] term (('+'|'-') term)*
//   term    := factor ('*'? factor)*
//   factor  := primary ("'")*                  (' = adjoint)
//   primary := scalar | i | 1 | S[path] | S*[path] | p[vertex] | (expr)
//   scalar  := int[/int] | (int[/int],int[/int])
// This is also the reader for the canonical serialization of elements.
class ExprParser {
 public:
  ExprParser(GraphPtr g, std::string text) : g_(std::move(g)), s_(std::move(text)) {}

  AlgebraElement parse() {
    AlgebraElement e = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) throw input_error("unexpected trailing input in expression");
    return normal_form(e);
  }

 private:
  GraphPtr g_;
  std::string s_;
  size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  AlgebraElement parse_expr() {
    bool neg = eat('-');
    AlgebraElement e = parse_term();
    if (neg) e = Scalar(-1) * e;
    while (true) {
      if (eat('+')) {
        e += parse_term();
      } else if (eat('-')) {
        e -= parse_term();
      } else {
        break;
      }
    }
    return e;
  }

  bool at_factor_start() {
    char c = peek();
    return c == 'S' || c == 'p' || c == 'i' || c == '1' || c == '(' ||
           std::isdigit(static_cast<unsigned char>(c));
  }

  AlgebraElement parse_term() {
    AlgebraElement e = parse_factor();
    while (true) {
      if (eat('*')) {
        e = multiply(e, parse_factor());
      } else if (at_factor_start()) {
        e = multiply(e, parse_factor());
      } else {
        break;
      }
    }
    return e;
  }

  AlgebraElement parse_factor() {
    AlgebraElement e = parse_primary();
    while (eat('\'')) e = adjoint(e);
    return e;
  }

  std::string parse_bracketed() {
    if (!eat('[')) throw input_error("expected '['");
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != ']') out += s_[pos_++];
    if (!eat(']')) throw input_error("expected ']'");
    return out;
  }

  Rational parse_rational() {
    skip_ws();
    bool neg = eat('-');
    std::string digits;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      digits += s_[pos_++];
    if (digits.empty()) throw input_error("expected a number");
    Integer num(digits);
    Integer den = 1;
    if (eat('/')) {
      std::string d;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
        d += s_[pos_++];
      if (d.empty()) throw input_error("expected a denominator");
      den = Integer(d);
    }
    Rational r(num, den);
    return neg ? -r : r;
  }

  AlgebraElement scalar_times_unit(const Scalar& c) { return c * unit_element(g_); }

  AlgebraElement parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) throw input_error("unexpected end of expression");
    char c = s_[pos_];
    if (c == 'S') {
      ++pos_;
      bool star = eat('*');
      Path p = parse_path_spec(*g_, parse_bracketed());
      AlgebraElement e = path_isometry(g_, p);
      return star ? adjoint(e) : e;
    }
    if (c == 'p') {
      ++pos_;
      std::string v = parse_bracketed();
      return vertex_projection(g_, g_->vertex_index(v));
    }
    if (c == 'i') {
      ++pos_;
      return scalar_times_unit(Scalar::i());
    }
    if (c == '(') {
      // try a complex scalar "(re,im)" first, else a parenthesized expression
      size_t save = pos_;
      ++pos_;
      try {
        Rational re = parse_rational();
        if (eat(',')) {
          Rational im = parse_rational();
          if (!eat(')')) throw input_error("expected ')'");
          return scalar_times_unit(Scalar(re, im));
        }
      } catch (const input_error&) {
      }
      pos_ = save;
      eat('(');
      AlgebraElement e = parse_expr();
      if (!eat(')')) throw input_error("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      return scalar_times_unit(Scalar(parse_rational()));
    }
    throw input_error(std::string("unexpected character '") + c + "' in expression");
  }
};

inline AlgebraElement parse_element(GraphPtr g, const std::string& text) {
  return ExprParser(g, text).parse();
}

}  // namespace ckindex
