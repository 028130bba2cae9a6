#include "solscan/solver.hpp"

#include <cassert>

namespace solscan::sym {

using sat::Lit;
using sat::mk_lit;
using sat::neg_lit;

Lit Solver::fresh() { return mk_lit(sat_->new_var()); }

Lit Solver::lit_const(bool v) { return v ? true_lit_ : neg_lit(true_lit_); }

Lit Solver::lit_and(Lit a, Lit b) {
  if (a == lit_const(false) || b == lit_const(false)) return lit_const(false);
  if (a == lit_const(true)) return b;
  if (b == lit_const(true)) return a;
  if (a == b) return a;
  if (a == neg_lit(b)) return lit_const(false);
  Lit o = fresh();
  sat_->add_clause({neg_lit(o), a});
  sat_->add_clause({neg_lit(o), b});
  sat_->add_clause({o, neg_lit(a), neg_lit(b)});
  return o;
}

Lit Solver::lit_or(Lit a, Lit b) {
  return neg_lit(lit_and(neg_lit(a), neg_lit(b)));
}

Lit Solver::lit_xor(Lit a, Lit b) {
  if (a == lit_const(false)) return b;
  if (b == lit_const(false)) return a;
  if (a == lit_const(true)) return neg_lit(b);
  if (b == lit_const(true)) return neg_lit(a);
  if (a == b) return lit_const(false);
  if (a == neg_lit(b)) return lit_const(true);
  Lit o = fresh();
  sat_->add_clause({neg_lit(o), a, b});
  sat_->add_clause({neg_lit(o), neg_lit(a), neg_lit(b)});
  sat_->add_clause({o, neg_lit(a), b});
  sat_->add_clause({o, a, neg_lit(b)});
  return o;
}

Lit Solver::lit_mux(Lit sel, Lit t, Lit f) {
  if (sel == lit_const(true)) return t;
  if (sel == lit_const(false)) return f;
  if (t == f) return t;
  Lit o = fresh();
  sat_->add_clause({neg_lit(sel), neg_lit(t), o});
  sat_->add_clause({neg_lit(sel), t, neg_lit(o)});
  sat_->add_clause({sel, neg_lit(f), o});
  sat_->add_clause({sel, f, neg_lit(o)});
  return o;
}

std::vector<Lit> Solver::add_bits(const std::vector<Lit>& a,
                                  const std::vector<Lit>& b, Lit carry_in) {
  std::vector<Lit> out(a.size());
  Lit carry = carry_in;
  for (size_t i = 0; i < a.size(); ++i) {
    Lit s = lit_xor(a[i], b[i]);
    out[i] = lit_xor(s, carry);
    // carry = (a & b) | (s & carry)
    carry = lit_or(lit_and(a[i], b[i]), lit_and(s, carry));
  }
  return out;
}

std::vector<Lit> Solver::mul_bits(const std::vector<Lit>& a,
                                  const std::vector<Lit>& b) {
  size_t w = a.size();
  std::vector<Lit> acc(w, lit_const(false));
  for (size_t i = 0; i < w; ++i) {
    if (b[i] == lit_const(false)) continue;
    std::vector<Lit> row(w, lit_const(false));
    for (size_t j = 0; i + j < w; ++j) row[i + j] = lit_and(a[j], b[i]);
    acc = add_bits(acc, row, lit_const(false));
  }
  return acc;
}

// Restoring division; smtlib semantics for zero divisor (q = ~0, r = a).
void Solver::divmod_bits(const std::vector<Lit>& a, const std::vector<Lit>& b,
                         std::vector<Lit>& quot, std::vector<Lit>& rem) {
  size_t w = a.size();
  std::vector<Lit> r(w, lit_const(false));
  std::vector<Lit> q(w, lit_const(false));
  for (size_t i = w; i-- > 0;) {
    // r = (r << 1) | a[i]
    for (size_t j = w; j-- > 1;) r[j] = r[j - 1];
    r[0] = a[i];
    Lit ge = neg_lit(ult_bits(r, b, false));  // r >= b
    q[i] = ge;
    // r = ge ? r - b : r
    std::vector<Lit> nb(w);
    for (size_t j = 0; j < w; ++j) nb[j] = neg_lit(b[j]);
    std::vector<Lit> diff = add_bits(r, nb, lit_const(true));
    for (size_t j = 0; j < w; ++j) r[j] = lit_mux(ge, diff[j], r[j]);
  }
  std::vector<Lit> zero(w, lit_const(false));
  Lit div_zero = eq_bits(b, zero);
  quot.resize(w);
  rem.resize(w);
  for (size_t j = 0; j < w; ++j) {
    quot[j] = lit_mux(div_zero, lit_const(true), q[j]);
    rem[j] = lit_mux(div_zero, a[j], r[j]);
  }
}

std::vector<Lit> Solver::shift_bits(const std::vector<Lit>& a,
                                    const std::vector<Lit>& amount,
                                    int dir_right, bool arith) {
  size_t w = a.size();
  std::vector<Lit> cur = a;
  Lit fill = arith ? a[w - 1] : lit_const(false);
  size_t stages = 0;
  while ((size_t(1) << stages) < w) ++stages;
  for (size_t s = 0; s < stages; ++s) {
    size_t k = size_t(1) << s;
    Lit sel = amount[s];
    std::vector<Lit> shifted(w);
    for (size_t i = 0; i < w; ++i) {
      if (dir_right)
        shifted[i] = (i + k < w) ? cur[i + k] : fill;
      else
        shifted[i] = (i >= k) ? cur[i - k] : lit_const(false);
    }
    for (size_t i = 0; i < w; ++i) cur[i] = lit_mux(sel, shifted[i], cur[i]);
  }
  // amount bits above the stage count force zero (or sign fill); sBPF masks
  // shift amounts, and step() applies that mask before building the term.
  Lit overflow = lit_const(false);
  for (size_t i = stages; i < amount.size(); ++i)
    overflow = lit_or(overflow, amount[i]);
  for (size_t i = 0; i < w; ++i)
    cur[i] = lit_mux(overflow, dir_right && arith ? fill : lit_const(false),
                     cur[i]);
  return cur;
}

Lit Solver::ult_bits(const std::vector<Lit>& a, const std::vector<Lit>& b,
                     bool or_equal) {
  // Compare MSB-down: lt accumulates.
  Lit lt = lit_const(or_equal);
  for (size_t i = 0; i < a.size(); ++i) {
    Lit ai = a[i], bi = b[i];
    Lit eq = neg_lit(lit_xor(ai, bi));
    Lit less = lit_and(neg_lit(ai), bi);
    lt = lit_or(less, lit_and(eq, lt));
  }
  return lt;
}

Lit Solver::eq_bits(const std::vector<Lit>& a, const std::vector<Lit>& b) {
  Lit acc = lit_const(true);
  for (size_t i = 0; i < a.size(); ++i)
    acc = lit_and(acc, neg_lit(lit_xor(a[i], b[i])));
  return acc;
}

std::vector<Lit> Solver::blast(ExprRef e) {
  auto it = cache_.find(e);
  if (it != cache_.end()) return it->second.bits;

  const Node& n = arena_.node(e);
  std::vector<Lit> out;
  switch (n.op) {
    case Op::Const: {
      out.resize(n.width);
      for (uint8_t i = 0; i < n.width; ++i)
        out[i] = lit_const((n.k >> i) & 1);
      break;
    }
    case Op::Var: {
      auto vit = var_bits_.find(n.a);
      if (vit == var_bits_.end()) {
        Blast b;
        b.bits.resize(n.width);
        for (uint8_t i = 0; i < n.width; ++i) b.bits[i] = fresh();
        vit = var_bits_.emplace(n.a, std::move(b)).first;
      }
      out = vit->second.bits;
      break;
    }
    case Op::Not: {
      out = blast(n.a);
      for (Lit& l : out) l = neg_lit(l);
      break;
    }
    case Op::Neg: {
      std::vector<Lit> a = blast(n.a);
      std::vector<Lit> na(a.size());
      for (size_t i = 0; i < a.size(); ++i) na[i] = neg_lit(a[i]);
      std::vector<Lit> zero(a.size(), lit_const(false));
      out = add_bits(zero, na, lit_const(true));
      break;
    }
    case Op::Extract: {
      std::vector<Lit> a = blast(n.a);
      out.assign(a.begin() + n.c, a.begin() + n.b + 1);
      break;
    }
    case Op::ZExt: {
      out = blast(n.a);
      out.resize(n.width, lit_const(false));
      break;
    }
    case Op::SExt: {
      out = blast(n.a);
      Lit sign = out.back();
      out.resize(n.width, sign);
      break;
    }
    case Op::Concat: {
      std::vector<Lit> hi = blast(n.b);
      out = blast(n.c);
      out.insert(out.end(), hi.begin(), hi.end());
      break;
    }
    case Op::Ite: {
      Lit sel = blast(n.a)[0];
      std::vector<Lit> t = blast(n.b);
      std::vector<Lit> f = blast(n.c);
      out.resize(t.size());
      for (size_t i = 0; i < t.size(); ++i) out[i] = lit_mux(sel, t[i], f[i]);
      break;
    }
    default: {
      std::vector<Lit> a = blast(n.a);
      std::vector<Lit> b = blast(n.b);
      switch (n.op) {
        case Op::Add: out = add_bits(a, b, lit_const(false)); break;
        case Op::Sub: {
          std::vector<Lit> nb(b.size());
          for (size_t i = 0; i < b.size(); ++i) nb[i] = neg_lit(b[i]);
          out = add_bits(a, nb, lit_const(true));
          break;
        }
        case Op::Mul: out = mul_bits(a, b); break;
        case Op::And: {
          out.resize(a.size());
          for (size_t i = 0; i < a.size(); ++i) out[i] = lit_and(a[i], b[i]);
          break;
        }
        case Op::Or: {
          out.resize(a.size());
          for (size_t i = 0; i < a.size(); ++i) out[i] = lit_or(a[i], b[i]);
          break;
        }
        case Op::Xor: {
          out.resize(a.size());
          for (size_t i = 0; i < a.size(); ++i) out[i] = lit_xor(a[i], b[i]);
          break;
        }
        case Op::UDiv: {
          std::vector<Lit> q, r;
          divmod_bits(a, b, q, r);
          out = q;
          break;
        }
        case Op::URem: {
          std::vector<Lit> q, r;
          divmod_bits(a, b, q, r);
          out = r;
          break;
        }
        case Op::SDiv:
        case Op::SRem: {
          // |a| / |b| with sign fixups
          size_t w = a.size();
          Lit sa = a[w - 1], sb = b[w - 1];
          auto abs_of = [&](const std::vector<Lit>& x, Lit s) {
            std::vector<Lit> nx(w);
            for (size_t i = 0; i < w; ++i) nx[i] = neg_lit(x[i]);
            std::vector<Lit> zero(w, lit_const(false));
            std::vector<Lit> negx = add_bits(zero, nx, lit_const(true));
            std::vector<Lit> r(w);
            for (size_t i = 0; i < w; ++i) r[i] = lit_mux(s, negx[i], x[i]);
            return r;
          };
          std::vector<Lit> ua = abs_of(a, sa), ub = abs_of(b, sb);
          std::vector<Lit> q, r;
          divmod_bits(ua, ub, q, r);
          Lit qneg = lit_xor(sa, sb);
          auto negate_if = [&](const std::vector<Lit>& x, Lit s) {
            std::vector<Lit> nx(w);
            for (size_t i = 0; i < w; ++i) nx[i] = neg_lit(x[i]);
            std::vector<Lit> zero(w, lit_const(false));
            std::vector<Lit> negx = add_bits(zero, nx, lit_const(true));
            std::vector<Lit> rr(w);
            for (size_t i = 0; i < w; ++i) rr[i] = lit_mux(s, negx[i], x[i]);
            return rr;
          };
          out = n.op == Op::SDiv ? negate_if(q, qneg) : negate_if(r, sa);
          break;
        }
        case Op::Shl: out = shift_bits(a, b, 0, false); break;
        case Op::LShr: out = shift_bits(a, b, 1, false); break;
        case Op::AShr: out = shift_bits(a, b, 1, true); break;
        case Op::Eq: out = {eq_bits(a, b)}; break;
        case Op::Ult: out = {ult_bits(a, b, false)}; break;
        case Op::Ule: out = {ult_bits(a, b, true)}; break;
        case Op::Slt:
        case Op::Sle: {
          // flip sign bits to reduce to unsigned compare
          std::vector<Lit> fa = a, fb = b;
          fa.back() = neg_lit(fa.back());
          fb.back() = neg_lit(fb.back());
          out = {ult_bits(fa, fb, n.op == Op::Sle)};
          break;
        }
        default: assert(false && "unhandled op in blast");
      }
    }
  }
  cache_.emplace(e, Blast{out});
  return out;
}

SatVerdict Solver::check(const std::vector<ExprRef>& assertions) {
  ++queries;
  have_model_ = false;
  // quick syntactic pass: all-constant assertions
  bool all_const = true;
  for (ExprRef a : assertions) {
    auto c = arena_.const_value(a);
    if (!c) {
      all_const = false;
      break;
    }
    if (*c == 0) return SatVerdict::No;
  }
  if (all_const) {
    model_asg_.assign(arena_.var_count(), 0);
    have_model_ = true;
    return SatVerdict::Yes;
  }

  sat_instance_ = sat::SatSolver();
  sat_ = &sat_instance_;
  cache_.clear();
  var_bits_.clear();
  true_lit_ = mk_lit(sat_->new_var());
  sat_->add_clause({true_lit_});

  for (ExprRef a : assertions) {
    auto c = arena_.const_value(a);
    if (c) {
      if (*c == 0) return SatVerdict::No;
      continue;
    }
    std::vector<Lit> bits = blast(a);
    if (!sat_->add_clause({bits[0]})) return SatVerdict::No;
  }

  auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  auto should_stop = [deadline]() {
    return std::chrono::steady_clock::now() > deadline;
  };
  sat::SatResult r = sat_->solve(-1, should_stop);
  if (r == sat::SatResult::Unknown) {
    ++timeouts;
    return SatVerdict::Timeout;
  }
  if (r == sat::SatResult::Unsat) return SatVerdict::No;

  model_asg_.assign(arena_.var_count(), 0);
  for (const auto& [var_id, bl] : var_bits_) {
    uint64_t v = 0;
    for (size_t i = 0; i < bl.bits.size(); ++i) {
      Lit l = bl.bits[i];
      bool bit = sat_->model_value(sat::lit_var(l)) ^ sat::lit_sign(l);
      if (bit) v |= uint64_t(1) << i;
    }
    model_asg_[var_id] = v;
  }
  have_model_ = true;
  return SatVerdict::Yes;
}

uint64_t Solver::model_value(ExprRef e) {
  assert(have_model_);
  if (model_asg_.size() < arena_.var_count())
    model_asg_.resize(arena_.var_count(), 0);
  return arena_.eval(e, model_asg_);
}

}  // namespace solscan::sym
