#include <algorithm>
#include <set>

#include "solscan/machine.hpp"

namespace solscan::sym {

namespace {

// conjunction of a constraint-vector suffix; bool_true when empty
ExprRef conjoin(ExprArena& a, const std::vector<ExprRef>& v, size_t from) {
  ExprRef out = a.bool_true();
  for (size_t i = from; i < v.size(); ++i) out = a.bit_and(out, v[i]);
  return out;
}

bool same_stack(const SymState& a, const SymState& b) {
  if (a.call_stack.size() != b.call_stack.size()) return false;
  for (size_t i = 0; i < a.call_stack.size(); ++i)
    if (a.call_stack[i].return_address != b.call_stack[i].return_address)
      return false;
  return true;
}

bool same_regions(const SymState& a, const SymState& b) {
  if (a.mem.size() != b.mem.size()) return false;
  for (size_t i = 0; i < a.mem.size(); ++i)
    if (a.mem[i].kind != b.mem[i].kind || a.mem[i].base != b.mem[i].base ||
        a.mem[i].size != b.mem[i].size)
      return false;
  return true;
}

bool same_actions(const SymState& a, const SymState& b) {
  if (a.actions.size() != b.actions.size()) return false;
  for (size_t i = 0; i < a.actions.size(); ++i)
    if (a.actions[i].kind != b.actions[i].kind ||
        a.actions[i].site != b.actions[i].site ||
        a.actions[i].account != b.actions[i].account)
      return false;
  return true;
}

}  // namespace

std::optional<SymState> merge_states(ExprArena& arena,
                                     const std::vector<SymState>& states) {
  if (states.empty()) return std::nullopt;
  if (states.size() == 1) return states.front();
  const SymState& head = states.front();
  for (const SymState& s : states) {
    if (!s.active() || s.pc != head.pc || s.heap_top != head.heap_top)
      return std::nullopt;
    if (!same_stack(s, head) || !same_regions(s, head) ||
        !same_actions(s, head) || s.pda_trace != head.pda_trace)
      return std::nullopt;
  }

  // longest constraint prefix common to all inputs
  size_t prefix = head.constraints.size();
  for (const SymState& s : states) {
    size_t i = 0;
    size_t lim = std::min(prefix, s.constraints.size());
    while (i < lim && s.constraints[i] == head.constraints[i]) ++i;
    prefix = i;
  }
  std::vector<ExprRef> guards;
  guards.reserve(states.size());
  for (const SymState& s : states)
    guards.push_back(conjoin(arena, s.constraints, prefix));

  SymState out = head;
  out.constraints.resize(prefix);
  ExprRef disjunction = guards[0];
  for (size_t i = 1; i < guards.size(); ++i)
    disjunction = arena.bit_or(disjunction, guards[i]);
  if (!arena.const_value(disjunction).has_value() ||
      *arena.const_value(disjunction) != 1)
    out.constraints.push_back(disjunction);

  // registers: fold differing values into guard-chained ite terms; the
  // last input serves as the unguarded default
  auto fold = [&](auto value_of) -> ExprRef {
    ExprRef v = value_of(states.back());
    bool all_equal = true;
    for (const SymState& s : states)
      if (value_of(s) != v) all_equal = false;
    if (all_equal) return v;
    for (size_t i = states.size() - 1; i-- > 0;)
      v = arena.ite(guards[i], value_of(states[i]), v);
    return v;
  };
  for (int r = 0; r < 11; ++r)
    out.regs[r] = fold([r](const SymState& s) { return s.regs[r]; });

  // memory: only overlaid offsets can differ between inputs
  for (size_t ri = 0; ri < out.mem.size(); ++ri) {
    std::set<uint64_t> touched;
    for (const SymState& s : states)
      for (const auto& [off, v] : s.mem[ri].overlay) touched.insert(off);
    for (uint64_t off : touched) {
      ExprRef merged = fold([&, off](const SymState& s) {
        return s.mem[ri].load_byte(arena, off);
      });
      out.mem[ri].overlay[off] = merged;
    }
  }

  // ledger: reads union (any path may have read), trust marks and writes
  // intersect (only checks every path performed survive)
  for (const SymState& s : states) {
    if (&s == &head) continue;
    for (uint32_t i = 0; i < out.ledger.n_accounts; ++i) {
      out.ledger.read_flags[i] |= s.ledger.read_flags[i];
      out.ledger.signer_seen[i] |= s.ledger.signer_seen[i];
    }
    std::erase_if(out.ledger.checks, [&](const vm::CheckMark& m) {
      return !s.ledger.has_check(m.account, m.kind);
    });
    std::erase_if(out.ledger.writes, [&](const vm::WriteRecord& w) {
      return std::none_of(s.ledger.writes.begin(), s.ledger.writes.end(),
                          [&](const vm::WriteRecord& o) {
                            return o.account == w.account &&
                                   o.field == w.field && o.site == w.site;
                          });
    });
    for (const std::string& n : s.ledger.notes) {
      if (std::find(out.ledger.notes.begin(), out.ledger.notes.end(), n) ==
          out.ledger.notes.end())
        out.ledger.notes.push_back(n);
    }
    out.ledger.seq = std::max(out.ledger.seq, s.ledger.seq);
  }

  for (const SymState& s : states) {
    out.coverage.insert(s.coverage.begin(), s.coverage.end());
    out.fork_ordinal = std::max(out.fork_ordinal, s.fork_ordinal);
    out.solver_degraded |= s.solver_degraded;
  }

  // traces diverge past their common prefix; keep the prefix and flag the
  // gap so re-execution falls back to feasibility-guided choices
  size_t tp = head.trace.size();
  for (const SymState& s : states) {
    size_t i = 0;
    size_t lim = std::min(tp, s.trace.size());
    while (i < lim && s.trace[i].address == head.trace[i].address &&
           s.trace[i].taken == head.trace[i].taken)
      ++i;
    tp = i;
  }
  if (tp != head.trace.size()) out.merged = true;
  for (const SymState& s : states)
    if (tp != s.trace.size()) out.merged = true;
  out.trace.resize(tp);

  return out;
}

}  // namespace solscan::sym
