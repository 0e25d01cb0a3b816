#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace coref {

enum class Dim { TwoD, ThreeD };

inline int dim_count(Dim d) { return d == Dim::TwoD ? 2 : 3; }

// 2D primitives take 5 raw parameters (tx, ty, sx, sy, rot),
// 3D primitives take 6 (tx, ty, tz, sx, sy, sz).
enum class PrimitiveKind { Rectangle, Ellipse, Cuboid, Ellipsoid };

enum class BoolOp { Union, Intersect, Subtract };

// Transform nodes are produced by canonicalization and grafting only; the
// base grammar has no transform production. Their parameters live in
// geometry space (arbitrary shifts, positive scale factors), unlike raw
// primitive parameters which are confined to (-1, 1).
enum class TransformKind { Translate, Scale, Rotate2d };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Primitive {
  PrimitiveKind kind;
  std::vector<double> raw;  // each strictly inside (-1, 1)
};

struct Boolean {
  BoolOp op;
  ExprPtr left;
  ExprPtr right;
};

struct Transform {
  TransformKind kind;
  std::vector<double> params;
  ExprPtr child;
};

// Immutable expression tree. Rewriters build new trees that share unchanged
// subtrees, so ExprPtr values are safe to pass between threads.
struct Expr {
  Dim dim;
  std::variant<Primitive, Boolean, Transform> node;

  bool is_primitive() const { return std::holds_alternative<Primitive>(node); }
  bool is_boolean() const { return std::holds_alternative<Boolean>(node); }
  bool is_transform() const { return std::holds_alternative<Transform>(node); }
  const Primitive& primitive() const { return std::get<Primitive>(node); }
  const Boolean& boolean() const { return std::get<Boolean>(node); }
  const Transform& transform() const { return std::get<Transform>(node); }
};

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg), line(line_), col(col_) {}
};

bool primitive_kind_legal(PrimitiveKind k, Dim d);
int primitive_arity(Dim d);  // 5 in 2D, 6 in 3D

const char* primitive_name(PrimitiveKind k);
const char* bool_op_name(BoolOp op);
const char* transform_name(TransformKind k);

// Node constructors. They validate invariants (parameter ranges, arity,
// matching dims) and throw std::invalid_argument on violation.
ExprPtr make_primitive(Dim dim, PrimitiveKind kind, std::vector<double> raw);
ExprPtr make_boolean(BoolOp op, ExprPtr left, ExprPtr right);
ExprPtr make_transform(TransformKind kind, std::vector<double> params, ExprPtr child);

// Number of commands: every Primitive, Boolean and Transform node counts as
// one, independent of its token count.
int program_length(const Expr& e);

bool structural_equal(const Expr& a, const Expr& b);

// Prefix-functional surface syntax. print() emits parameters with six
// decimals, escalating to full precision when six decimals would not parse
// back to the identical double, so parse(print(e)) == e exactly.
std::string print_program(const Expr& e);
ExprPtr parse_program(const std::string& text, Dim dim);

// Peeks at the first primitive name to decide 2D vs 3D.
Dim infer_dim(const std::string& text);

uint64_t fingerprint(const Expr& e);  // hash of canonical printed text

// ---------------------------------------------------------------------------
// Raw parameter range maps. Raw values live in (-1, 1); translation passes
// through, scale maps linearly onto (0.01, 2.01), rotation onto (-pi, pi).
double map_translate(double raw);
double map_scale(double raw);
double map_rotate(double raw);
double unmap_translate(double v);
double unmap_scale(double v);
double unmap_rotate(double v);

// Geometry-space parameters of one primitive: the mapped scale value is the
// primitive's full extent per axis, so half_extent = map_scale(raw) / 2.
struct PrimitiveGeom {
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> half_extent{0, 0, 0};
  double rotation = 0;  // radians, 2D only
};

PrimitiveGeom map_params(const Primitive& p, Dim dim);
std::vector<PrimitiveGeom> map_params(const Expr& e);  // preorder over primitives
Primitive unmap_params(const PrimitiveGeom& g, PrimitiveKind kind, Dim dim);

// Preorder visit of every node; f receives (expr, preorder_index).
void visit_preorder(const Expr& e, const std::function<void(const Expr&, int)>& f);

// All subexpressions in preorder, with the child-index path from the root.
struct SubexprRef {
  const Expr* expr;
  std::vector<int> path;  // 0 = left/only child, 1 = right child
};
std::vector<SubexprRef> subexpressions(const Expr& e);

const Expr* node_at(const Expr& e, const std::vector<int>& path);
ExprPtr replace_at(const ExprPtr& root, const std::vector<int>& path, ExprPtr replacement);

}  // namespace coref
