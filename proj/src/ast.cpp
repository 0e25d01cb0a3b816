#include "coref/ast.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "coref/rng.hpp"

namespace coref {

bool primitive_kind_legal(PrimitiveKind k, Dim d) {
  switch (k) {
    case PrimitiveKind::Rectangle:
    case PrimitiveKind::Ellipse:
      return d == Dim::TwoD;
    case PrimitiveKind::Cuboid:
    case PrimitiveKind::Ellipsoid:
      return d == Dim::ThreeD;
  }
  return false;
}

int primitive_arity(Dim d) { return d == Dim::TwoD ? 5 : 6; }

const char* primitive_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Rectangle: return "rectangle";
    case PrimitiveKind::Ellipse: return "ellipse";
    case PrimitiveKind::Cuboid: return "cuboid";
    case PrimitiveKind::Ellipsoid: return "ellipsoid";
  }
  return "?";
}

const char* bool_op_name(BoolOp op) {
  switch (op) {
    case BoolOp::Union: return "union";
    case BoolOp::Intersect: return "intersect";
    case BoolOp::Subtract: return "subtract";
  }
  return "?";
}

const char* transform_name(TransformKind k) {
  switch (k) {
    case TransformKind::Translate: return "translate";
    case TransformKind::Scale: return "scale";
    case TransformKind::Rotate2d: return "rotate2d";
  }
  return "?";
}

ExprPtr make_primitive(Dim dim, PrimitiveKind kind, std::vector<double> raw) {
  if (!primitive_kind_legal(kind, dim))
    throw std::invalid_argument(std::string(primitive_name(kind)) + " not legal in this dim");
  if ((int)raw.size() != primitive_arity(dim))
    throw std::invalid_argument("primitive arity mismatch");
  for (double v : raw)
    if (!(v > -1.0 && v < 1.0))
      throw std::invalid_argument("raw parameter outside (-1, 1)");
  auto e = std::make_shared<Expr>();
  e->dim = dim;
  e->node = Primitive{kind, std::move(raw)};
  return e;
}

ExprPtr make_boolean(BoolOp op, ExprPtr left, ExprPtr right) {
  if (!left || !right) throw std::invalid_argument("boolean node needs two children");
  if (left->dim != right->dim) throw std::invalid_argument("mixed-dim boolean");
  auto e = std::make_shared<Expr>();
  e->dim = left->dim;
  e->node = Boolean{op, std::move(left), std::move(right)};
  return e;
}

ExprPtr make_transform(TransformKind kind, std::vector<double> params, ExprPtr child) {
  if (!child) throw std::invalid_argument("transform node needs a child");
  const Dim dim = child->dim;
  const size_t want = kind == TransformKind::Rotate2d ? 1 : (size_t)dim_count(dim);
  if (kind == TransformKind::Rotate2d && dim != Dim::TwoD)
    throw std::invalid_argument("rotate2d only exists in 2D");
  if (params.size() != want) throw std::invalid_argument("transform arity mismatch");
  for (double v : params)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite transform parameter");
  if (kind == TransformKind::Scale)
    for (double v : params)
      if (!(v > 0)) throw std::invalid_argument("scale factors must be positive");
  auto e = std::make_shared<Expr>();
  e->dim = dim;
  e->node = Transform{kind, std::move(params), std::move(child)};
  return e;
}

int program_length(const Expr& e) {
  int n = 0;
  visit_preorder(e, [&](const Expr&, int) { ++n; });
  return n;
}

bool structural_equal(const Expr& a, const Expr& b) {
  if (a.dim != b.dim || a.node.index() != b.node.index()) return false;
  if (a.is_primitive()) {
    const auto& pa = a.primitive();
    const auto& pb = b.primitive();
    return pa.kind == pb.kind && pa.raw == pb.raw;
  }
  if (a.is_boolean()) {
    const auto& ba = a.boolean();
    const auto& bb = b.boolean();
    return ba.op == bb.op && structural_equal(*ba.left, *bb.left) &&
           structural_equal(*ba.right, *bb.right);
  }
  const auto& ta = a.transform();
  const auto& tb = b.transform();
  return ta.kind == tb.kind && ta.params == tb.params && structural_equal(*ta.child, *tb.child);
}

namespace {

std::string fmt_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_rec(const Expr& e, std::string& out) {
  if (e.is_primitive()) {
    const auto& p = e.primitive();
    out += primitive_name(p.kind);
    out += '(';
    for (size_t i = 0; i < p.raw.size(); ++i) {
      if (i) out += ',';
      out += fmt_param(p.raw[i]);
    }
    out += ')';
  } else if (e.is_boolean()) {
    const auto& b = e.boolean();
    out += bool_op_name(b.op);
    out += '(';
    print_rec(*b.left, out);
    out += ',';
    print_rec(*b.right, out);
    out += ')';
  } else {
    const auto& t = e.transform();
    out += transform_name(t.kind);
    out += '(';
    for (double v : t.params) {
      out += fmt_param(v);
      out += ',';
    }
    print_rec(*t.child, out);
    out += ')';
  }
}

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col); }

  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '#') {
        while (pos < src.size() && src[pos] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  bool at_end() {
    skip_ws();
    return pos >= src.size();
  }

  char peek() {
    skip_ws();
    return pos < src.size() ? src[pos] : '\0';
  }

  void expect(char c) {
    skip_ws();
    if (pos >= src.size() || src[pos] != c)
      fail(std::string("expected '") + c + "'");
    advance();
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < src.size() && (std::isalnum((unsigned char)src[pos]) || src[pos] == '_'))
      advance();
    if (pos == start) fail("expected identifier");
    return src.substr(start, pos - start);
  }

  double number() {
    skip_ws();
    const char* begin = src.c_str() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected number");
    size_t n = size_t(end - begin);
    for (size_t i = 0; i < n; ++i) advance();
    if (!std::isfinite(v)) fail("non-finite literal");
    return v;
  }

  bool next_is_number() {
    skip_ws();
    if (pos >= src.size()) return false;
    char c = src[pos];
    return c == '-' || c == '+' || c == '.' || std::isdigit((unsigned char)c);
  }
};

struct Parser {
  Lexer lex;
  Dim dim;

  Parser(const std::string& s, Dim d) : lex(s), dim(d) {}

  ExprPtr parse() {
    ExprPtr e = expr();
    if (!lex.at_end()) lex.fail("trailing input after program");
    return e;
  }

  ExprPtr expr() {
    int line = lex.line, col = lex.col;
    lex.skip_ws();
    line = lex.line;
    col = lex.col;
    std::string name = lex.ident();
    try {
      if (name == "union") return boolean(BoolOp::Union);
      if (name == "intersect") return boolean(BoolOp::Intersect);
      if (name == "subtract") return boolean(BoolOp::Subtract);
      if (name == "rectangle") return primitive(PrimitiveKind::Rectangle);
      if (name == "ellipse") return primitive(PrimitiveKind::Ellipse);
      if (name == "cuboid") return primitive(PrimitiveKind::Cuboid);
      if (name == "ellipsoid") return primitive(PrimitiveKind::Ellipsoid);
      if (name == "translate") return transform(TransformKind::Translate, dim_count(dim));
      if (name == "scale") return transform(TransformKind::Scale, dim_count(dim));
      if (name == "rotate2d") return transform(TransformKind::Rotate2d, 1);
    } catch (const std::invalid_argument& ex) {
      throw ParseError(ex.what(), line, col);
    }
    throw ParseError("unknown operator '" + name + "'", line, col);
  }

  ExprPtr boolean(BoolOp op) {
    lex.expect('(');
    ExprPtr l = expr();
    lex.expect(',');
    ExprPtr r = expr();
    lex.expect(')');
    return make_boolean(op, std::move(l), std::move(r));
  }

  ExprPtr primitive(PrimitiveKind kind) {
    if (!primitive_kind_legal(kind, dim))
      lex.fail(std::string(primitive_name(kind)) + " not legal in " +
               (dim == Dim::TwoD ? "2D" : "3D") + " program");
    lex.expect('(');
    std::vector<double> raw;
    const int arity = primitive_arity(dim);
    for (int i = 0; i < arity; ++i) {
      if (i) lex.expect(',');
      lex.skip_ws();
      int line = lex.line, col = lex.col;
      double v = lex.number();
      if (!(v > -1.0 && v < 1.0))
        throw ParseError("literal " + fmt_param(v) + " outside (-1, 1)", line, col);
      raw.push_back(v);
    }
    lex.expect(')');
    return make_primitive(dim, kind, std::move(raw));
  }

  ExprPtr transform(TransformKind kind, int nparams) {
    lex.expect('(');
    std::vector<double> params;
    for (int i = 0; i < nparams; ++i) {
      if (i) lex.expect(',');
      lex.skip_ws();
      int line = lex.line, col = lex.col;
      double v = lex.number();
      if (kind == TransformKind::Scale && !(v > 0))
        throw ParseError("scale factor must be positive", line, col);
      params.push_back(v);
    }
    lex.expect(',');
    ExprPtr child = expr();
    lex.expect(')');
    return make_transform(kind, std::move(params), std::move(child));
  }
};

}  // namespace

std::string print_program(const Expr& e) {
  std::string out;
  print_rec(e, out);
  return out;
}

ExprPtr parse_program(const std::string& text, Dim dim) {
  Parser p(text, dim);
  return p.parse();
}

Dim infer_dim(const std::string& text) {
  // "ellipse" is not a substring of "ellipsoid", so plain search suffices.
  if (text.find("cuboid") != std::string::npos ||
      text.find("ellipsoid") != std::string::npos)
    return Dim::ThreeD;
  if (text.find("rectangle") != std::string::npos ||
      text.find("ellipse") != std::string::npos)
    return Dim::TwoD;
  throw std::invalid_argument("cannot infer dim: no primitive found");
}

uint64_t fingerprint(const Expr& e) {
  std::string s = print_program(e);
  return fnv1a64(s.data(), s.size());
}

// ---------------------------------------------------------------------------

double map_translate(double raw) { return raw; }
double map_scale(double raw) { return raw + 1.01; }
double map_rotate(double raw) { return raw * std::numbers::pi; }
double unmap_translate(double v) { return v; }
double unmap_scale(double v) { return v - 1.01; }
double unmap_rotate(double v) { return v / std::numbers::pi; }

PrimitiveGeom map_params(const Primitive& p, Dim dim) {
  PrimitiveGeom g;
  const int d = dim_count(dim);
  for (int i = 0; i < d; ++i) {
    g.center[i] = map_translate(p.raw[i]);
    g.half_extent[i] = map_scale(p.raw[d + i]) / 2.0;
  }
  if (dim == Dim::TwoD) g.rotation = map_rotate(p.raw[4]);
  return g;
}

std::vector<PrimitiveGeom> map_params(const Expr& e) {
  std::vector<PrimitiveGeom> out;
  visit_preorder(e, [&](const Expr& n, int) {
    if (n.is_primitive()) out.push_back(map_params(n.primitive(), n.dim));
  });
  return out;
}

Primitive unmap_params(const PrimitiveGeom& g, PrimitiveKind kind, Dim dim) {
  Primitive p;
  p.kind = kind;
  const int d = dim_count(dim);
  p.raw.resize(primitive_arity(dim));
  for (int i = 0; i < d; ++i) {
    p.raw[i] = unmap_translate(g.center[i]);
    p.raw[d + i] = unmap_scale(g.half_extent[i] * 2.0);
  }
  if (dim == Dim::TwoD) p.raw[4] = unmap_rotate(g.rotation);
  return p;
}

// ---------------------------------------------------------------------------

namespace {
void visit_rec(const Expr& e, const std::function<void(const Expr&, int)>& f, int& idx) {
  f(e, idx++);
  if (e.is_boolean()) {
    visit_rec(*e.boolean().left, f, idx);
    visit_rec(*e.boolean().right, f, idx);
  } else if (e.is_transform()) {
    visit_rec(*e.transform().child, f, idx);
  }
}

void collect_rec(const Expr& e, std::vector<int>& path, std::vector<SubexprRef>& out) {
  out.push_back({&e, path});
  if (e.is_boolean()) {
    path.push_back(0);
    collect_rec(*e.boolean().left, path, out);
    path.back() = 1;
    collect_rec(*e.boolean().right, path, out);
    path.pop_back();
  } else if (e.is_transform()) {
    path.push_back(0);
    collect_rec(*e.transform().child, path, out);
    path.pop_back();
  }
}
}  // namespace

void visit_preorder(const Expr& e, const std::function<void(const Expr&, int)>& f) {
  int idx = 0;
  visit_rec(e, f, idx);
}

std::vector<SubexprRef> subexpressions(const Expr& e) {
  std::vector<SubexprRef> out;
  std::vector<int> path;
  collect_rec(e, path, out);
  return out;
}

const Expr* node_at(const Expr& e, const std::vector<int>& path) {
  const Expr* cur = &e;
  for (int step : path) {
    if (cur->is_boolean()) {
      cur = step == 0 ? cur->boolean().left.get() : cur->boolean().right.get();
    } else if (cur->is_transform()) {
      if (step != 0) throw std::invalid_argument("bad path step at transform");
      cur = cur->transform().child.get();
    } else {
      throw std::invalid_argument("path descends into a primitive");
    }
  }
  return cur;
}

ExprPtr replace_at(const ExprPtr& root, const std::vector<int>& path, ExprPtr replacement) {
  if (path.empty()) return replacement;
  std::vector<int> rest(path.begin() + 1, path.end());
  if (root->is_boolean()) {
    const auto& b = root->boolean();
    if (path[0] == 0)
      return make_boolean(b.op, replace_at(b.left, rest, std::move(replacement)), b.right);
    return make_boolean(b.op, b.left, replace_at(b.right, rest, std::move(replacement)));
  }
  if (root->is_transform()) {
    const auto& t = root->transform();
    if (path[0] != 0) throw std::invalid_argument("bad path step at transform");
    return make_transform(t.kind, t.params, replace_at(t.child, rest, std::move(replacement)));
  }
  throw std::invalid_argument("path descends into a primitive");
}

}  // namespace coref
