#include "solscan/syscalls.hpp"

#include <set>

namespace solscan::vm {

using sym::ExprArena;
using sym::ExprRef;
using sym::Machine;
using sym::MemRegion;
using sym::Region;
using sym::Status;
using sym::SymState;
using sym::VarField;

namespace {

const std::set<std::string>& modeled_set() {
  static const std::set<std::string> names = {
      "sol_log_",
      "sol_log_64_",
      "sol_log_compute_units_",
      "sol_log_pubkey",
      "sol_log_data",
      "abort",
      "sol_panic_",
      "sol_memcpy_",
      "sol_memmove_",
      "sol_memset_",
      "sol_memcmp_",
      "sol_alloc_free_",
      "sol_create_program_address",
      "sol_try_find_program_address",
      "sol_invoke_signed_c",
      "sol_invoke_signed_rust",
  };
  return names;
}

SymState fail(SymState state, std::string reason) {
  state.status = Status::Aborted;
  state.abort_reason = std::move(reason);
  return state;
}

SymState ok(ExprArena& arena, SymState state, uint64_t r0 = 0) {
  state.regs[0] = arena.constant(r0, 64);
  return state;
}

bool range_ok(const SymState& state, uint64_t addr, uint64_t len,
              bool for_write) {
  const MemRegion* r = state.region_at(addr);
  return r && (!for_write || r->writable) && addr - r->base + len <= r->size;
}

// writes `count` fresh tagged byte variables at addr
void write_fresh(Machine& m, SymState& state, uint64_t addr, uint64_t count,
                 const std::string& stem, VarField field, int32_t account) {
  ExprArena& a = m.arena();
  for (uint64_t b = 0; b < count; ++b) {
    ExprRef v = a.var(stem + "_" + std::to_string(b), 8, field, account,
                      uint32_t(b));
    state.store(a, addr + b, 1, v);
  }
}

std::vector<SymState> do_memcmp(Machine& m, SymState state) {
  ExprArena& a = m.arena();
  auto p1 = m.resolve_value(state, state.regs[1]);
  auto p2 = m.resolve_value(state, state.regs[2]);
  auto n = m.resolve_value(state, state.regs[3]);
  auto out = m.resolve_value(state, state.regs[4]);
  if (!p1 || !p2 || !n || !out)
    return {fail(std::move(state), "unresolvable memcmp arguments")};
  if (!range_ok(state, *p1, *n, false) || !range_ok(state, *p2, *n, false) ||
      !range_ok(state, *out, 4, true))
    return {fail(std::move(state), "memcmp outside mapped memory")};
  // first differing byte decides, scanned back-to-front as an ite chain
  ExprRef result = a.constant(0, 32);
  for (uint64_t i = *n; i-- > 0;) {
    ExprRef b1 = state.load(a, *p1 + i, 1);
    ExprRef b2 = state.load(a, *p2 + i, 1);
    ExprRef differ = a.ne(b1, b2);
    ExprRef sign = a.ite(a.ult(b1, b2), a.constant(uint64_t(int64_t(-1)), 32),
                         a.constant(1, 32));
    result = a.ite(differ, sign, result);
  }
  state.store(a, *out, 4, result);
  return {ok(a, std::move(state))};
}

std::vector<SymState> do_memops(Machine& m, SymState state,
                                const std::string& name) {
  ExprArena& a = m.arena();
  auto dst = m.resolve_value(state, state.regs[1]);
  auto n = m.resolve_value(state, state.regs[3]);
  if (!dst || !n)
    return {fail(std::move(state), "unresolvable memory-helper arguments")};
  if (!range_ok(state, *dst, *n, true))
    return {fail(std::move(state), "memory helper outside writable memory")};
  if (name == "sol_memset_") {
    ExprRef byte = a.extract(state.regs[2], 7, 0);
    for (uint64_t i = 0; i < *n; ++i) state.store(a, *dst + i, 1, byte);
    return {ok(a, std::move(state))};
  }
  auto src = m.resolve_value(state, state.regs[2]);
  if (!src || !range_ok(state, *src, *n, false))
    return {fail(std::move(state), "memory helper outside mapped memory")};
  std::vector<ExprRef> bytes;  // read first: memmove overlap safety
  bytes.reserve(*n);
  for (uint64_t i = 0; i < *n; ++i) bytes.push_back(state.load(a, *src + i, 1));
  for (uint64_t i = 0; i < *n; ++i) state.store(a, *dst + i, 1, bytes[i]);
  return {ok(a, std::move(state))};
}

std::vector<SymState> do_alloc(Machine& m, SymState state) {
  ExprArena& a = m.arena();
  auto size = m.resolve_value(state, state.regs[1]);
  auto free_addr = m.resolve_value(state, state.regs[2]);
  if (!size || !free_addr)
    return {fail(std::move(state), "unresolvable allocator arguments")};
  if (*free_addr != 0) return {ok(a, std::move(state))};  // free is a no-op
  uint64_t want = (*size + 7) & ~7ull;
  if (state.heap_top + want > sbpf::kHeapSize)
    return {ok(a, std::move(state), 0)};  // out of memory -> null
  uint64_t addr = sbpf::kHeapBase + state.heap_top;
  state.heap_top += want;
  return {ok(a, std::move(state), addr)};
}

std::vector<SymState> do_pda(Machine& m, SymState state, bool with_bump) {
  ExprArena& a = m.arena();
  uint64_t out_reg = 4;
  auto out = m.resolve_value(state, state.regs[out_reg]);
  if (!out || !range_ok(state, *out, 32, true))
    return {fail(std::move(state), "pda output outside writable memory")};
  std::string stem = "pda" + std::to_string(a.var_count());
  write_fresh(m, state, *out, 32, stem, VarField::Pda, -1);
  for (uint64_t b = 0; b < 32; ++b)
    state.pda_trace.push_back(state.load(a, *out + b, 1));
  ExprRef bump_var = sym::kNoExpr;
  if (with_bump) {
    auto bump = m.resolve_value(state, state.regs[5]);
    if (!bump || !range_ok(state, *bump, 1, true))
      return {fail(std::move(state), "pda bump outside writable memory")};
    bump_var = a.var(stem + "_bump", 8, VarField::Pda, -1, 32);
    state.store(a, *bump, 1, bump_var);
  }
  state.pda_trace.push_back(bump_var);
  return {ok(a, std::move(state))};
}

// Maps an input-region address to the account whose key field starts there.
int32_t account_of_key_ptr(const Machine& m, uint64_t addr) {
  const InputLayout& ly = m.layout();
  if (addr < sbpf::kInputBase) return -1;
  FieldRef ref = ly.locate(addr - sbpf::kInputBase);
  if (ref.field == AccountField::Key && ref.byte == 0) return ref.account;
  return -1;
}

std::vector<SymState> do_invoke(Machine& m, SymState state, bool rust_abi) {
  ExprArena& a = m.arena();
  CriticalAction action;
  action.kind = CriticalAction::Kind::Cpi;
  action.site = state.pc - 8;  // the call instruction
  action.seq = ++state.ledger.seq;

  auto instr = m.resolve_value(state, state.regs[1]);
  if (!instr)
    return {fail(std::move(state), "unresolvable invoke instruction")};

  uint64_t key_addr = 0, metas_addr = 0, metas_len = 0, meta_stride = 0;
  if (rust_abi) {
    // StableInstruction: accounts vec (ptr, cap, len), data vec, program id
    // inline at +48; AccountMeta = 32-byte key, is_signer, is_writable
    if (!range_ok(state, *instr, 80, false))
      return {fail(std::move(state), "invoke instruction outside memory")};
    key_addr = *instr + 48;
    auto mp = m.resolve_value(state, state.load(a, *instr, 8));
    auto ml = m.resolve_value(state, state.load(a, *instr + 16, 8));
    if (!mp || !ml)
      return {fail(std::move(state), "unresolvable invoke account list")};
    metas_addr = *mp;
    metas_len = *ml;
    meta_stride = 34;
  } else {
    // SolInstruction: program id ptr, metas ptr, metas len, data ptr, len
    if (!range_ok(state, *instr, 40, false))
      return {fail(std::move(state), "invoke instruction outside memory")};
    auto kp = m.resolve_value(state, state.load(a, *instr, 8));
    auto mp = m.resolve_value(state, state.load(a, *instr + 8, 8));
    auto ml = m.resolve_value(state, state.load(a, *instr + 16, 8));
    if (!kp || !mp || !ml)
      return {fail(std::move(state), "unresolvable invoke fields")};
    key_addr = *kp;
    metas_addr = *mp;
    metas_len = *ml;
    meta_stride = 16;
  }
  if (!range_ok(state, key_addr, 32, false))
    return {fail(std::move(state), "invoke target key outside memory")};
  for (uint32_t b = 0; b < 32; ++b)
    action.target_key.push_back(state.load(a, key_addr + b, 1));
  // reading the target key counts as using that account's key
  if (const MemRegion* r = state.region_at(key_addr);
      r && r->kind == Region::Input)
    on_memory_event(m.layout(), state, key_addr - r->base, 32, false,
                    action.site);

  if (metas_len > 64)
    return {fail(std::move(state), "invoke account list too long")};
  struct Handed {
    int32_t account;
    bool writable;
  };
  std::vector<Handed> handed;
  for (uint64_t i = 0; i < metas_len; ++i) {
    uint64_t meta = metas_addr + i * meta_stride;
    if (!range_ok(state, meta, meta_stride, false))
      return {fail(std::move(state), "invoke account meta outside memory")};
    int32_t account = -1;
    uint64_t writable_off;
    if (rust_abi) {
      account = account_of_key_ptr(m, meta);  // key inline; match by address
      writable_off = 33;
    } else {
      auto kp = m.resolve_value(state, state.load(a, meta, 8));
      if (!kp)
        return {fail(std::move(state), "unresolvable invoke meta key")};
      account = account_of_key_ptr(m, *kp);
      writable_off = 8;
    }
    auto w = m.resolve_value(state, state.load(a, meta + writable_off, 1));
    if (account >= 0) {
      handed.push_back({account, w.value_or(0) != 0});
      action.handed_accounts.push_back(uint32_t(account));
    }
  }
  action.trace_len = state.trace.size();

  // callee effects: clobber data and lamports of handed writable accounts
  const InputLayout& ly = m.layout();
  for (const Handed& h : handed) {
    if (!h.writable) continue;
    uint64_t base = sbpf::kInputBase + ly.account_base(uint32_t(h.account));
    std::string stem = "havoc" + std::to_string(a.var_count()) + "_a" +
                       std::to_string(h.account);
    write_fresh(m, state, base + InputLayout::kDataOff, ly.max_data,
                stem + "_data", VarField::Havoc, h.account);
    write_fresh(m, state, base + InputLayout::kLamportsOff, 8,
                stem + "_lamports", VarField::Havoc, h.account);
    for (uint64_t b = 0; b < ly.max_data; ++b) {
      uint64_t addr = base + InputLayout::kDataOff + b;
      action.havoc_bytes.emplace_back(addr, state.load(a, addr, 1));
    }
    for (uint64_t b = 0; b < 8; ++b) {
      uint64_t addr = base + InputLayout::kLamportsOff + b;
      action.havoc_bytes.emplace_back(addr, state.load(a, addr, 1));
    }
  }
  state.actions.push_back(std::move(action));
  return {ok(a, std::move(state))};
}

}  // namespace

bool syscall_modeled(const std::string& name) {
  return modeled_set().count(name) != 0;
}

std::vector<SymState> handle_syscall(Machine& machine, SymState state,
                                     const std::string& name) {
  ExprArena& a = machine.arena();
  if (name == "abort" || name == "sol_panic_")
    return {fail(std::move(state), name)};
  if (name.rfind("sol_log", 0) == 0) return {ok(a, std::move(state))};
  if (name == "sol_memcmp_") return do_memcmp(machine, std::move(state));
  if (name == "sol_memcpy_" || name == "sol_memmove_" ||
      name == "sol_memset_")
    return do_memops(machine, std::move(state), name);
  if (name == "sol_alloc_free_") return do_alloc(machine, std::move(state));
  if (name == "sol_create_program_address")
    return do_pda(machine, std::move(state), false);
  if (name == "sol_try_find_program_address")
    return do_pda(machine, std::move(state), true);
  if (name == "sol_invoke_signed_c")
    return do_invoke(machine, std::move(state), false);
  if (name == "sol_invoke_signed_rust")
    return do_invoke(machine, std::move(state), true);
  throw sym::ConfigError("unmodeled syscall: " + name);
}

}  // namespace solscan::vm
