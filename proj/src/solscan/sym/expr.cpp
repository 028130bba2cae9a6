#include "solscan/expr.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace solscan::sym {

namespace {

uint64_t hash_node(const Node& n) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  mix(static_cast<uint64_t>(n.op));
  mix(n.width);
  mix(n.a);
  mix(n.b);
  mix(n.c);
  mix(n.k);
  return h;
}

bool node_eq(const Node& x, const Node& y) {
  return x.op == y.op && x.width == y.width && x.a == y.a && x.b == y.b &&
         x.c == y.c && x.k == y.k;
}

}  // namespace

ExprArena::ExprArena() {
  table_.assign(1024, kNoExpr);
  table_mask_ = table_.size() - 1;
  true_ = constant(1, 1);
  false_ = constant(0, 1);
}

void ExprArena::rehash() {
  std::vector<uint32_t> old = std::move(table_);
  table_.assign(old.size() * 2, kNoExpr);
  table_mask_ = table_.size() - 1;
  for (uint32_t idx : old) {
    if (idx == kNoExpr) continue;
    uint64_t h = hash_node(nodes_[idx]);
    size_t slot = h & table_mask_;
    while (table_[slot] != kNoExpr) slot = (slot + 1) & table_mask_;
    table_[slot] = idx;
  }
}

ExprRef ExprArena::intern(Node n) {
  if (filled_ * 4 >= table_.size() * 3) rehash();
  uint64_t h = hash_node(n);
  size_t slot = h & table_mask_;
  while (table_[slot] != kNoExpr) {
    if (node_eq(nodes_[table_[slot]], n)) return table_[slot];
    slot = (slot + 1) & table_mask_;
  }
  nodes_.push_back(n);
  uint32_t idx = static_cast<uint32_t>(nodes_.size() - 1);
  table_[slot] = idx;
  ++filled_;
  return idx;
}

ExprRef ExprArena::constant(uint64_t value, uint8_t width) {
  assert(width >= 1 && width <= 64);
  Node n{Op::Const, width};
  n.k = mask_width(value, width);
  return intern(n);
}

ExprRef ExprArena::var(std::string name, uint8_t width, VarField field,
                       int32_t account, uint32_t byte) {
  VarInfo info{std::move(name), width, field, account, byte};
  vars_.push_back(std::move(info));
  Node n{Op::Var, width};
  n.a = static_cast<uint32_t>(vars_.size() - 1);
  // Vars are unique by id, never merged.
  nodes_.push_back(n);
  return static_cast<uint32_t>(nodes_.size() - 1);
}

std::optional<uint64_t> ExprArena::const_value(ExprRef e) const {
  const Node& n = nodes_[e];
  if (n.op == Op::Const) return n.k;
  return std::nullopt;
}

ExprRef ExprArena::binop(Op op, ExprRef a, ExprRef b) {
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  assert(na.width == nb.width);
  uint8_t w = na.width;
  if (na.op == Op::Const && nb.op == Op::Const) {
    uint64_t x = na.k, y = nb.k;
    switch (op) {
      case Op::Add: return constant(x + y, w);
      case Op::Sub: return constant(x - y, w);
      case Op::Mul: return constant(x * y, w);
      case Op::UDiv: return constant(y == 0 ? mask_width(~0ull, w) : x / y, w);
      case Op::URem: return constant(y == 0 ? x : x % y, w);
      case Op::SDiv: {
        int64_t sx = sign_extend(x, w), sy = sign_extend(y, w);
        if (sy == 0) return constant(mask_width(~0ull, w), w);
        if (sx == INT64_MIN && sy == -1) return constant(uint64_t(sx), w);
        return constant(uint64_t(sx / sy), w);
      }
      case Op::SRem: {
        int64_t sx = sign_extend(x, w), sy = sign_extend(y, w);
        if (sy == 0) return constant(x, w);
        if (sx == INT64_MIN && sy == -1) return constant(0, w);
        return constant(uint64_t(sx % sy), w);
      }
      case Op::And: return constant(x & y, w);
      case Op::Or: return constant(x | y, w);
      case Op::Xor: return constant(x ^ y, w);
      case Op::Shl: return constant(y >= w ? 0 : x << y, w);
      case Op::LShr: return constant(y >= w ? 0 : x >> y, w);
      case Op::AShr: {
        int64_t sx = sign_extend(x, w);
        uint64_t sh = y >= w ? w - 1 : y;
        return constant(uint64_t(sx >> sh), w);
      }
      case Op::Eq: return constant(x == y ? 1 : 0, 1);
      case Op::Ult: return constant(x < y ? 1 : 0, 1);
      case Op::Ule: return constant(x <= y ? 1 : 0, 1);
      case Op::Slt:
        return constant(sign_extend(x, w) < sign_extend(y, w) ? 1 : 0, 1);
      case Op::Sle:
        return constant(sign_extend(x, w) <= sign_extend(y, w) ? 1 : 0, 1);
      default: break;
    }
  }
  uint8_t rw = (op == Op::Eq || op == Op::Ult || op == Op::Ule ||
                op == Op::Slt || op == Op::Sle)
                   ? 1
                   : w;
  Node n{op, rw};
  n.a = a;
  n.b = b;
  return intern(n);
}

ExprRef ExprArena::add(ExprRef a, ExprRef b) {
  if (const_value(a) == std::optional<uint64_t>(0)) return b;
  if (const_value(b) == std::optional<uint64_t>(0)) return a;
  return binop(Op::Add, a, b);
}

ExprRef ExprArena::sub(ExprRef a, ExprRef b) {
  if (const_value(b) == std::optional<uint64_t>(0)) return a;
  if (a == b) return constant(0, width(a));
  return binop(Op::Sub, a, b);
}

ExprRef ExprArena::mul(ExprRef a, ExprRef b) {
  auto ca = const_value(a), cb = const_value(b);
  if (ca == std::optional<uint64_t>(0) || cb == std::optional<uint64_t>(0))
    return constant(0, width(a));
  if (ca == std::optional<uint64_t>(1)) return b;
  if (cb == std::optional<uint64_t>(1)) return a;
  return binop(Op::Mul, a, b);
}

ExprRef ExprArena::udiv(ExprRef a, ExprRef b) { return binop(Op::UDiv, a, b); }
ExprRef ExprArena::urem(ExprRef a, ExprRef b) { return binop(Op::URem, a, b); }
ExprRef ExprArena::sdiv(ExprRef a, ExprRef b) { return binop(Op::SDiv, a, b); }
ExprRef ExprArena::srem(ExprRef a, ExprRef b) { return binop(Op::SRem, a, b); }

ExprRef ExprArena::bit_and(ExprRef a, ExprRef b) {
  if (a == b) return a;
  auto ca = const_value(a), cb = const_value(b);
  uint8_t w = width(a);
  uint64_t all = mask_width(~0ull, w);
  if (ca == std::optional<uint64_t>(0) || cb == std::optional<uint64_t>(0))
    return constant(0, w);
  if (ca == std::optional<uint64_t>(all)) return b;
  if (cb == std::optional<uint64_t>(all)) return a;
  return binop(Op::And, a, b);
}

ExprRef ExprArena::bit_or(ExprRef a, ExprRef b) {
  if (a == b) return a;
  auto ca = const_value(a), cb = const_value(b);
  uint8_t w = width(a);
  uint64_t all = mask_width(~0ull, w);
  if (ca == std::optional<uint64_t>(0)) return b;
  if (cb == std::optional<uint64_t>(0)) return a;
  if (ca == std::optional<uint64_t>(all) || cb == std::optional<uint64_t>(all))
    return constant(all, w);
  return binop(Op::Or, a, b);
}

ExprRef ExprArena::bit_xor(ExprRef a, ExprRef b) {
  if (a == b) return constant(0, width(a));
  if (const_value(a) == std::optional<uint64_t>(0)) return b;
  if (const_value(b) == std::optional<uint64_t>(0)) return a;
  return binop(Op::Xor, a, b);
}

ExprRef ExprArena::bit_not(ExprRef a) {
  const Node& n = nodes_[a];
  if (n.op == Op::Const) return constant(~n.k, n.width);
  if (n.op == Op::Not) return n.a;
  Node m{Op::Not, n.width};
  m.a = a;
  return intern(m);
}

ExprRef ExprArena::neg(ExprRef a) {
  const Node& n = nodes_[a];
  if (n.op == Op::Const) return constant(~n.k + 1, n.width);
  Node m{Op::Neg, n.width};
  m.a = a;
  return intern(m);
}

ExprRef ExprArena::shl(ExprRef a, ExprRef b) { return binop(Op::Shl, a, b); }
ExprRef ExprArena::lshr(ExprRef a, ExprRef b) { return binop(Op::LShr, a, b); }
ExprRef ExprArena::ashr(ExprRef a, ExprRef b) { return binop(Op::AShr, a, b); }

ExprRef ExprArena::eq(ExprRef a, ExprRef b) {
  if (a == b) return true_;
  return binop(Op::Eq, a, b);
}

ExprRef ExprArena::ne(ExprRef a, ExprRef b) { return logical_not(eq(a, b)); }

ExprRef ExprArena::ult(ExprRef a, ExprRef b) {
  if (a == b) return false_;
  return binop(Op::Ult, a, b);
}

ExprRef ExprArena::ule(ExprRef a, ExprRef b) {
  if (a == b) return true_;
  return binop(Op::Ule, a, b);
}

ExprRef ExprArena::slt(ExprRef a, ExprRef b) {
  if (a == b) return false_;
  return binop(Op::Slt, a, b);
}

ExprRef ExprArena::sle(ExprRef a, ExprRef b) {
  if (a == b) return true_;
  return binop(Op::Sle, a, b);
}

ExprRef ExprArena::ite(ExprRef cond, ExprRef t, ExprRef f) {
  assert(width(cond) == 1);
  if (t == f) return t;
  auto c = const_value(cond);
  if (c) return *c ? t : f;
  Node n{Op::Ite, width(t)};
  n.a = cond;
  n.b = t;
  n.c = f;
  return intern(n);
}

ExprRef ExprArena::extract(ExprRef a, uint32_t hi, uint32_t lo) {
  const Node& n = nodes_[a];
  assert(hi >= lo && hi < n.width);
  uint8_t w = static_cast<uint8_t>(hi - lo + 1);
  if (w == n.width) return a;
  if (n.op == Op::Const) return constant(n.k >> lo, w);
  if (n.op == Op::Concat) {
    uint8_t low_w = width(n.c);
    if (hi < low_w) return extract(n.c, hi, lo);
    if (lo >= low_w) return extract(n.b, hi - low_w, lo - low_w);
  }
  if (n.op == Op::ZExt || n.op == Op::SExt) {
    uint8_t cw = width(n.a);
    if (hi < cw) return extract(n.a, hi, lo);
    if (n.op == Op::ZExt && lo >= cw) return constant(0, w);
  }
  if (n.op == Op::Extract) return extract(n.a, n.c + hi, n.c + lo);
  Node m{Op::Extract, w};
  m.a = a;
  m.b = hi;
  m.c = lo;
  return intern(m);
}

ExprRef ExprArena::concat(ExprRef hi, ExprRef lo) {
  const Node& nh = nodes_[hi];
  const Node& nl = nodes_[lo];
  uint8_t w = nh.width + nl.width;
  assert(w <= 64);
  if (nh.op == Op::Const && nl.op == Op::Const)
    return constant((nh.k << nl.width) | nl.k, w);
  if (nh.op == Op::Const && nh.k == 0) return zext(lo, w);
  // concat(extract(x, h, m+1), extract(x, m, l)) == extract(x, h, l)
  if (nh.op == Op::Extract && nl.op == Op::Extract && nh.a == nl.a &&
      nh.c == nl.b + 1)
    return extract(nh.a, nh.b, nl.c);
  Node n{Op::Concat, w};
  n.a = kNoExpr;
  n.b = hi;
  n.c = lo;
  return intern(n);
}

ExprRef ExprArena::zext(ExprRef a, uint8_t w) {
  const Node& n = nodes_[a];
  assert(w >= n.width);
  if (w == n.width) return a;
  if (n.op == Op::Const) return constant(n.k, w);
  if (n.op == Op::ZExt) return zext(n.a, w);
  Node m{Op::ZExt, w};
  m.a = a;
  return intern(m);
}

ExprRef ExprArena::sext(ExprRef a, uint8_t w) {
  const Node& n = nodes_[a];
  assert(w >= n.width);
  if (w == n.width) return a;
  if (n.op == Op::Const)
    return constant(uint64_t(sign_extend(n.k, n.width)), w);
  Node m{Op::SExt, w};
  m.a = a;
  return intern(m);
}

uint64_t ExprArena::eval(ExprRef e, const std::vector<uint64_t>& asg) const {
  const Node& n = nodes_[e];
  switch (n.op) {
    case Op::Const: return n.k;
    case Op::Var: return mask_width(asg.at(n.a), n.width);
    case Op::Not: return mask_width(~eval(n.a, asg), n.width);
    case Op::Neg: return mask_width(~eval(n.a, asg) + 1, n.width);
    case Op::Extract:
      return mask_width(eval(n.a, asg) >> n.c, n.width);
    case Op::ZExt: return eval(n.a, asg);
    case Op::SExt:
      return mask_width(uint64_t(sign_extend(eval(n.a, asg), width(n.a))),
                        n.width);
    case Op::Concat:
      return mask_width((eval(n.b, asg) << width(n.c)) | eval(n.c, asg),
                        n.width);
    case Op::Ite: return eval(n.a, asg) ? eval(n.b, asg) : eval(n.c, asg);
    default: break;
  }
  uint64_t x = eval(n.a, asg);
  uint64_t y = eval(n.b, asg);
  uint8_t w = width(n.a);
  switch (n.op) {
    case Op::Add: return mask_width(x + y, w);
    case Op::Sub: return mask_width(x - y, w);
    case Op::Mul: return mask_width(x * y, w);
    case Op::UDiv: return y == 0 ? mask_width(~0ull, w) : x / y;
    case Op::URem: return y == 0 ? x : x % y;
    case Op::SDiv: {
      int64_t sx = sign_extend(x, w), sy = sign_extend(y, w);
      if (sy == 0) return mask_width(~0ull, w);
      if (sx == INT64_MIN && sy == -1) return mask_width(uint64_t(sx), w);
      return mask_width(uint64_t(sx / sy), w);
    }
    case Op::SRem: {
      int64_t sx = sign_extend(x, w), sy = sign_extend(y, w);
      if (sy == 0) return x;
      if (sx == INT64_MIN && sy == -1) return 0;
      return mask_width(uint64_t(sx % sy), w);
    }
    case Op::And: return x & y;
    case Op::Or: return x | y;
    case Op::Xor: return x ^ y;
    case Op::Shl: return y >= w ? 0 : mask_width(x << y, w);
    case Op::LShr: return y >= w ? 0 : x >> y;
    case Op::AShr: {
      int64_t sx = sign_extend(x, w);
      uint64_t sh = y >= w ? w - 1 : y;
      return mask_width(uint64_t(sx >> sh), w);
    }
    case Op::Eq: return x == y;
    case Op::Ult: return x < y;
    case Op::Ule: return x <= y;
    case Op::Slt: return sign_extend(x, w) < sign_extend(y, w);
    case Op::Sle: return sign_extend(x, w) <= sign_extend(y, w);
    default: throw std::logic_error("eval: bad op");
  }
}

void ExprArena::collect_vars(ExprRef e, std::vector<uint32_t>& out) const {
  std::vector<ExprRef> stack{e};
  std::unordered_set<ExprRef> seen;
  while (!stack.empty()) {
    ExprRef cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    const Node& n = nodes_[cur];
    if (n.op == Op::Var) {
      out.push_back(n.a);
      continue;
    }
    if (n.op == Op::Const) continue;
    if (n.op == Op::Extract) {
      stack.push_back(n.a);
      continue;
    }
    if (n.a != kNoExpr && n.op != Op::Concat) stack.push_back(n.a);
    if (n.op == Op::Ite || n.op == Op::Concat) {
      stack.push_back(n.b);
      stack.push_back(n.c);
    } else if (n.b != kNoExpr &&
               !(n.op == Op::Not || n.op == Op::Neg || n.op == Op::ZExt ||
                 n.op == Op::SExt)) {
      stack.push_back(n.b);
    }
    if (n.op == Op::Ite) stack.push_back(n.a);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

namespace {
const char* op_name(Op op) {
  switch (op) {
    case Op::Add: return "bvadd";
    case Op::Sub: return "bvsub";
    case Op::Mul: return "bvmul";
    case Op::UDiv: return "bvudiv";
    case Op::URem: return "bvurem";
    case Op::SDiv: return "bvsdiv";
    case Op::SRem: return "bvsrem";
    case Op::And: return "bvand";
    case Op::Or: return "bvor";
    case Op::Xor: return "bvxor";
    case Op::Shl: return "bvshl";
    case Op::LShr: return "bvlshr";
    case Op::AShr: return "bvashr";
    case Op::Eq: return "=";
    case Op::Ult: return "bvult";
    case Op::Ule: return "bvule";
    case Op::Slt: return "bvslt";
    case Op::Sle: return "bvsle";
    default: return "?";
  }
}
}  // namespace

std::string ExprArena::to_smtlib(ExprRef e) const {
  const Node& n = nodes_[e];
  switch (n.op) {
    case Op::Const:
      return "(_ bv" + std::to_string(n.k) + " " + std::to_string(n.width) +
             ")";
    case Op::Var: return vars_[n.a].name;
    case Op::Not: return "(bvnot " + to_smtlib(n.a) + ")";
    case Op::Neg: return "(bvneg " + to_smtlib(n.a) + ")";
    case Op::Extract:
      return "((_ extract " + std::to_string(n.b) + " " + std::to_string(n.c) +
             ") " + to_smtlib(n.a) + ")";
    case Op::ZExt:
      return "((_ zero_extend " + std::to_string(n.width - width(n.a)) + ") " +
             to_smtlib(n.a) + ")";
    case Op::SExt:
      return "((_ sign_extend " + std::to_string(n.width - width(n.a)) + ") " +
             to_smtlib(n.a) + ")";
    case Op::Concat:
      return "(concat " + to_smtlib(n.b) + " " + to_smtlib(n.c) + ")";
    case Op::Ite: {
      // width-1 terms double as booleans; compare against bv1 for smtlib
      return "(ite (= " + to_smtlib(n.a) + " (_ bv1 1)) " + to_smtlib(n.b) +
             " " + to_smtlib(n.c) + ")";
    }
    case Op::Eq:
    case Op::Ult:
    case Op::Ule:
    case Op::Slt:
    case Op::Sle:
      // comparisons are width-1 bitvectors here, Bool in smtlib
      return std::string("(ite (") + op_name(n.op) + " " + to_smtlib(n.a) +
             " " + to_smtlib(n.b) + ") (_ bv1 1) (_ bv0 1))";
    default:
      return std::string("(") + op_name(n.op) + " " + to_smtlib(n.a) + " " +
             to_smtlib(n.b) + ")";
  }
}

std::string ExprArena::to_string(ExprRef e) const { return to_smtlib(e); }

}  // namespace solscan::sym
