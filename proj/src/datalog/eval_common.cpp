#include "eval_common.hpp"

#include <limits>

#include "d3re/error.hpp"

namespace d3re::detail {
namespace {

std::int64_t need_int(const Value& v, const Expr& context) {
  if (!v.is_integer()) {
    throw EvalError("arithmetic on non-integer term " + to_source(v) + " in '" + to_source(context) + "'");
  }
  return v.as_integer();
}

}  // namespace

Value eval_expr(const Expr& e, const VarLookup& lookup) {
  switch (e.op) {
    case Expr::Op::Leaf:
      return e.leaf.is_variable() ? lookup(e.leaf.name) : e.leaf.value;
    case Expr::Op::Neg: {
      std::int64_t v = need_int(eval_expr(e.operands[0], lookup), e);
      if (v == std::numeric_limits<std::int64_t>::min()) {
        throw EvalError("integer overflow in '" + to_source(e) + "'");
      }
      return Value::integer(-v);
    }
    default: break;
  }
  std::int64_t a = need_int(eval_expr(e.operands[0], lookup), e);
  std::int64_t b = need_int(eval_expr(e.operands[1], lookup), e);
  std::int64_t r = 0;
  bool overflow = false;
  switch (e.op) {
    case Expr::Op::Add: overflow = __builtin_add_overflow(a, b, &r); break;
    case Expr::Op::Sub: overflow = __builtin_sub_overflow(a, b, &r); break;
    case Expr::Op::Mul: overflow = __builtin_mul_overflow(a, b, &r); break;
    case Expr::Op::Div:
      if (b == 0) throw EvalError("division by zero in '" + to_source(e) + "'");
      if (a == std::numeric_limits<std::int64_t>::min() && b == -1) {
        overflow = true;
      } else {
        r = a / b;
      }
      break;
    default: break;
  }
  if (overflow) {
    throw EvalError("integer overflow in '" + to_source(e) + "' (" + std::to_string(a) + ", " +
                    std::to_string(b) + ")");
  }
  return Value::integer(r);
}

bool compare(CompareOp op, const Value& lhs, const Value& rhs) {
  if (op == CompareOp::Eq) return lhs == rhs;
  if (op == CompareOp::Ne) return !(lhs == rhs);
  if (!lhs.is_integer() || !rhs.is_integer()) {
    throw EvalError(std::string("ordering comparison '") + to_string(op) + "' on non-integer terms " +
                    to_source(lhs) + ", " + to_source(rhs));
  }
  std::int64_t a = lhs.as_integer(), b = rhs.as_integer();
  switch (op) {
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
    default: return false;
  }
}

Schema evaluation_schema(const DatalogProgram& program, const FactDatabase& edb) {
  Schema schema;
  for (const auto& [name, decl] : program.declarations) schema.emplace(name, RelationSchema::from(decl));
  for (const auto& [name, rel] : edb.relations()) {
    auto it = schema.find(name);
    if (it == schema.end()) {
      schema.emplace(name, rel.schema);
    } else if (!it->second.same_signature(rel.schema)) {
      throw EvalError("edb relation '" + name + "' has arity " + std::to_string(rel.schema.arity()) +
                      " or column types that disagree with its declaration (arity " +
                      std::to_string(it->second.arity()) + ")");
    }
  }
  return schema;
}

}  // namespace d3re::detail
