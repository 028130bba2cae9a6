#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace solscan::sym {

// Quantifier-free bitvector terms, hash-consed into a global arena.
// Widths are 1..64; booleans are width-1 vectors.
enum class Op : uint8_t {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  UDiv,
  URem,
  SDiv,
  SRem,
  And,
  Or,
  Xor,
  Not,   // bitwise
  Neg,
  Shl,
  LShr,
  AShr,
  Eq,    // width-1 result
  Ult,
  Ule,
  Slt,
  Sle,
  Ite,
  Extract,  // bits [hi..lo] of the child
  Concat,   // a is high bits, b is low bits
  ZExt,
  SExt,
};

using ExprRef = uint32_t;
inline constexpr ExprRef kNoExpr = 0xffffffffu;

// Where an input free variable came from; the oracles key off this.
enum class VarField : uint8_t {
  None,
  Key,
  Owner,
  Signer,
  Writable,
  Executable,
  Lamports,
  Data,
  DataLen,
  InstrData,
  InstrDataLen,
  Pda,      // result of PDA derivation
  Havoc,    // CPI callee effect / skipped-format output
};

struct VarInfo {
  std::string name;
  uint8_t width = 0;
  VarField field = VarField::None;
  int32_t account = -1;  // account index for account-sourced fields
  uint32_t byte = 0;     // byte offset within the field
};

struct Node {
  Op op;
  uint8_t width;
  uint32_t a = kNoExpr;  // child / var id
  uint32_t b = kNoExpr;  // child / extract hi
  uint32_t c = kNoExpr;  // child / extract lo
  uint64_t k = 0;        // constant value (masked to width)
};

// Arena of hash-consed nodes. One per analysis run; not thread-shared.
class ExprArena {
 public:
  ExprArena();

  ExprRef constant(uint64_t value, uint8_t width);
  ExprRef var(std::string name, uint8_t width, VarField field = VarField::None,
              int32_t account = -1, uint32_t byte = 0);

  ExprRef add(ExprRef a, ExprRef b);
  ExprRef sub(ExprRef a, ExprRef b);
  ExprRef mul(ExprRef a, ExprRef b);
  ExprRef udiv(ExprRef a, ExprRef b);
  ExprRef urem(ExprRef a, ExprRef b);
  ExprRef sdiv(ExprRef a, ExprRef b);
  ExprRef srem(ExprRef a, ExprRef b);
  ExprRef bit_and(ExprRef a, ExprRef b);
  ExprRef bit_or(ExprRef a, ExprRef b);
  ExprRef bit_xor(ExprRef a, ExprRef b);
  ExprRef bit_not(ExprRef a);
  ExprRef neg(ExprRef a);
  ExprRef shl(ExprRef a, ExprRef b);
  ExprRef lshr(ExprRef a, ExprRef b);
  ExprRef ashr(ExprRef a, ExprRef b);
  ExprRef eq(ExprRef a, ExprRef b);
  ExprRef ne(ExprRef a, ExprRef b);
  ExprRef ult(ExprRef a, ExprRef b);
  ExprRef ule(ExprRef a, ExprRef b);
  ExprRef ugt(ExprRef a, ExprRef b) { return ult(b, a); }
  ExprRef uge(ExprRef a, ExprRef b) { return ule(b, a); }
  ExprRef slt(ExprRef a, ExprRef b);
  ExprRef sle(ExprRef a, ExprRef b);
  ExprRef sgt(ExprRef a, ExprRef b) { return slt(b, a); }
  ExprRef sge(ExprRef a, ExprRef b) { return sle(b, a); }
  ExprRef ite(ExprRef cond, ExprRef t, ExprRef f);
  ExprRef extract(ExprRef a, uint32_t hi, uint32_t lo);
  ExprRef concat(ExprRef hi, ExprRef lo);
  ExprRef zext(ExprRef a, uint8_t width);
  ExprRef sext(ExprRef a, uint8_t width);

  // Boolean helpers over width-1 terms.
  ExprRef bool_true() { return true_; }
  ExprRef bool_false() { return false_; }
  ExprRef logical_not(ExprRef a) { return bit_xor(a, true_); }

  const Node& node(ExprRef e) const { return nodes_[e]; }
  uint8_t width(ExprRef e) const { return nodes_[e].width; }
  bool is_const(ExprRef e) const { return nodes_[e].op == Op::Const; }
  std::optional<uint64_t> const_value(ExprRef e) const;

  const VarInfo& var_info(uint32_t var_id) const { return vars_[var_id]; }
  size_t var_count() const { return vars_.size(); }
  size_t node_count() const { return nodes_.size(); }

  // Concrete evaluation under a full assignment (var id -> value).
  uint64_t eval(ExprRef e, const std::vector<uint64_t>& assignment) const;

  // Collects ids of all free variables in e, deduplicated.
  void collect_vars(ExprRef e, std::vector<uint32_t>& out) const;

  std::string to_string(ExprRef e) const;
  // SMT-LIB2 rendering of a term (for constraint dumps).
  std::string to_smtlib(ExprRef e) const;

 private:
  ExprRef intern(Node n);
  ExprRef binop(Op op, ExprRef a, ExprRef b);

  std::vector<Node> nodes_;
  std::vector<VarInfo> vars_;
  // open-addressed map from node hash to index
  std::vector<uint32_t> table_;
  size_t table_mask_ = 0;
  size_t filled_ = 0;
  ExprRef true_ = kNoExpr;
  ExprRef false_ = kNoExpr;

  void rehash();
};

inline uint64_t mask_width(uint64_t v, uint8_t w) {
  return w >= 64 ? v : (v & ((uint64_t(1) << w) - 1));
}

inline int64_t sign_extend(uint64_t v, uint8_t w) {
  if (w >= 64) return static_cast<int64_t>(v);
  uint64_t sign = uint64_t(1) << (w - 1);
  return static_cast<int64_t>((v ^ sign) - sign);
}

}  // namespace solscan::sym
