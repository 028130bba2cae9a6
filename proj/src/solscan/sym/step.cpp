#include <cassert>

#include "solscan/machine.hpp"
#include "solscan/syscalls.hpp"

namespace solscan::sym {

using sbpf::Instruction;

namespace {

SymState aborted(SymState state, std::string reason) {
  state.status = Status::Aborted;
  state.abort_reason = std::move(reason);
  return state;
}

ExprRef byteswap(ExprArena& a, ExprRef v, uint32_t bytes) {
  ExprRef out = a.extract(v, 7, 0);
  for (uint32_t i = 1; i < bytes; ++i)
    out = a.concat(out, a.extract(v, 8 * i + 7, 8 * i));
  return out;
}

}  // namespace

SatVerdict Machine::is_sat(const SymState& state, ExprRef extra) {
  std::vector<ExprRef> assertions = state.constraints;
  if (extra != kNoExpr) {
    if (auto c = arena_.const_value(extra))
      return *c ? (assertions.empty() ? SatVerdict::Yes
                                      : solver_.check(assertions))
                : SatVerdict::No;
    assertions.push_back(extra);
  }
  if (assertions.empty()) return SatVerdict::Yes;
  return solver_.check(assertions);
}

std::optional<std::vector<uint64_t>> Machine::concretize(
    const SymState& state, const std::vector<ExprRef>& exprs) {
  if (solver_.check(state.constraints) != SatVerdict::Yes) return std::nullopt;
  std::vector<uint64_t> out;
  out.reserve(exprs.size());
  for (ExprRef e : exprs) out.push_back(solver_.model_value(e));
  return out;
}

std::optional<std::vector<uint64_t>> Machine::model(const SymState& state) {
  if (solver_.check(state.constraints) != SatVerdict::Yes) return std::nullopt;
  std::vector<uint64_t> asg = solver_.model_assignment();
  asg.resize(arena_.var_count(), 0);
  return asg;
}

std::optional<uint64_t> Machine::resolve_value(SymState& state, ExprRef expr) {
  if (auto c = arena_.const_value(expr)) return *c;
  std::vector<ExprRef> assertions = state.constraints;
  if (solver_.check(assertions) != SatVerdict::Yes) return std::nullopt;
  uint64_t value = solver_.model_value(expr);
  ExprRef pin = arena_.eq(expr, arena_.constant(value, arena_.width(expr)));
  assertions.push_back(arena_.logical_not(pin));
  SatVerdict other = solver_.check(assertions);
  if (other != SatVerdict::No) {
    // several models: commit this path to the sampled value
    state.constraints.push_back(pin);
    if (other == SatVerdict::Timeout) state.solver_degraded = true;
  }
  return value;
}

ExprRef Machine::reg_operand(const SymState& state, const Instruction& insn,
                             uint8_t width) const {
  // arena is mutated through the const state only for expression building
  ExprArena& a = arena_;
  if (insn.opcode & sbpf::kSrcX) {
    ExprRef r = state.regs[insn.src];
    return width == 64 ? r : a.extract(r, width - 1, 0);
  }
  if (width == 64) return a.constant(uint64_t(insn.imm), 64);
  return a.constant(uint32_t(insn.imm), width);
}

std::vector<SymState> Machine::exec_alu(SymState state,
                                        const Instruction& insn,
                                        uint8_t w) {
  ExprArena& a = arena_;
  uint8_t op = insn.opcode & 0xf0;
  ExprRef dst = w == 64 ? state.regs[insn.dst]
                        : a.extract(state.regs[insn.dst], w - 1, 0);
  ExprRef src = op == sbpf::kAluNeg ? kNoExpr : reg_operand(state, insn, w);
  ExprRef res = kNoExpr;
  switch (op) {
    case sbpf::kAluAdd: res = a.add(dst, src); break;
    case sbpf::kAluSub: res = a.sub(dst, src); break;
    case sbpf::kAluMul: res = a.mul(dst, src); break;
    case sbpf::kAluOr: res = a.bit_or(dst, src); break;
    case sbpf::kAluAnd: res = a.bit_and(dst, src); break;
    case sbpf::kAluXor: res = a.bit_xor(dst, src); break;
    case sbpf::kAluMov: res = src; break;
    case sbpf::kAluNeg: res = a.neg(dst); break;
    case sbpf::kAluLsh:
    case sbpf::kAluRsh:
    case sbpf::kAluArsh: {
      ExprRef amt = a.bit_and(src, a.constant(w - 1, w));
      res = op == sbpf::kAluLsh   ? a.shl(dst, amt)
            : op == sbpf::kAluRsh ? a.lshr(dst, amt)
                                  : a.ashr(dst, amt);
      break;
    }
    case sbpf::kAluEnd: {
      uint32_t bytes = uint32_t(insn.imm) / 8;
      if (bytes != 2 && bytes != 4 && bytes != 8)
        return {aborted(std::move(state), "bad byte-swap width")};
      ExprRef low = a.extract(state.regs[insn.dst], 8 * bytes - 1, 0);
      ExprRef v = (insn.opcode & sbpf::kSrcX) ? byteswap(a, low, bytes) : low;
      state.regs[insn.dst] = a.zext(v, 64);
      state.pc = insn.next_address();
      return {std::move(state)};
    }
    case sbpf::kAluDiv:
    case sbpf::kAluMod: {
      auto result = [&](ExprRef divisor_ctx_dst, ExprRef divisor) {
        ExprRef r = op == sbpf::kAluDiv ? a.udiv(divisor_ctx_dst, divisor)
                                        : a.urem(divisor_ctx_dst, divisor);
        return w == 64 ? r : a.zext(r, 64);
      };
      if (auto c = a.const_value(src)) {
        if (*c == 0)
          return {aborted(std::move(state), "division by zero")};
        state.regs[insn.dst] = result(dst, src);
        state.pc = insn.next_address();
        return {std::move(state)};
      }
      // symbolic divisor: fork the zero case into an aborted state
      ExprRef is_zero = a.eq(src, a.constant(0, w));
      std::vector<SymState> out;
      if (is_sat(state, is_zero) == SatVerdict::Yes) {
        SymState z = state;
        z.id = fresh_state_id();
        z.fork_parent = state.id;
        z.constraints.push_back(is_zero);
        out.push_back(aborted(std::move(z), "division by zero"));
      }
      if (is_sat(state, a.logical_not(is_zero)) != SatVerdict::No) {
        state.constraints.push_back(a.logical_not(is_zero));
        state.regs[insn.dst] = result(dst, src);
        state.pc = insn.next_address();
        out.push_back(std::move(state));
      }
      if (out.empty())
        out.push_back(aborted(std::move(state), "unsat at division"));
      if (out.size() == 2) {
        uint64_t ord = next_fork_ordinal();
        for (SymState& s : out) s.fork_ordinal = ord;
      }
      return out;
    }
    default:
      return {aborted(std::move(state), "unsupported alu op")};
  }
  state.regs[insn.dst] = w == 64 ? res : a.zext(res, 64);
  state.pc = insn.next_address();
  return {std::move(state)};
}

ExprRef Machine::build_condition(const SymState& state,
                                 const Instruction& insn, uint8_t w) {
  ExprArena& a = arena_;
  ExprRef dst = w == 64 ? state.regs[insn.dst]
                        : a.extract(state.regs[insn.dst], w - 1, 0);
  ExprRef src = reg_operand(state, insn, w);
  switch (insn.opcode & 0xf0) {
    case sbpf::kJmpJeq: return a.eq(dst, src);
    case sbpf::kJmpJne: return a.ne(dst, src);
    case sbpf::kJmpJgt: return a.ugt(dst, src);
    case sbpf::kJmpJge: return a.uge(dst, src);
    case sbpf::kJmpJlt: return a.ult(dst, src);
    case sbpf::kJmpJle: return a.ule(dst, src);
    case sbpf::kJmpJsgt: return a.sgt(dst, src);
    case sbpf::kJmpJsge: return a.sge(dst, src);
    case sbpf::kJmpJslt: return a.slt(dst, src);
    case sbpf::kJmpJsle: return a.sle(dst, src);
    case sbpf::kJmpJset:
      return a.ne(a.bit_and(dst, src), a.constant(0, w));
    default:
      return kNoExpr;
  }
}

std::vector<SymState> Machine::exec_jump(SymState state,
                                         const Instruction& insn, uint8_t w) {
  ExprArena& a = arena_;
  ExprRef cond = build_condition(state, insn, w);
  if (cond == kNoExpr)
    return {aborted(std::move(state), "unsupported jump op")};
  if (config_.record_ledger)
    vm::on_branch_event(a, state, cond, insn.address);

  uint64_t taken_pc = insn.jump_target();
  uint64_t fall_pc = insn.next_address();
  if (auto c = a.const_value(cond)) {
    state.trace.push_back({insn.address, *c == 1});
    state.pc = *c ? taken_pc : fall_pc;
    return {std::move(state)};
  }

  SatVerdict v_taken = is_sat(state, cond);
  SatVerdict v_fall = is_sat(state, a.logical_not(cond));
  bool keep_taken = v_taken != SatVerdict::No;
  bool keep_fall = v_fall != SatVerdict::No;
  if (!keep_taken && !keep_fall) {
    state.status = Status::UnsatPruned;
    return {std::move(state)};
  }
  bool degraded =
      v_taken == SatVerdict::Timeout || v_fall == SatVerdict::Timeout;

  std::vector<SymState> out;
  if (keep_taken && keep_fall) {
    SymState other = state;
    other.id = fresh_state_id();
    other.fork_parent = state.id;
    uint64_t ord = next_fork_ordinal();
    state.fork_ordinal = ord;
    other.fork_ordinal = ord;

    state.constraints.push_back(cond);
    state.trace.push_back({insn.address, true});
    state.pc = taken_pc;
    state.solver_degraded |= degraded;
    other.constraints.push_back(a.logical_not(cond));
    other.trace.push_back({insn.address, false});
    other.pc = fall_pc;
    other.solver_degraded |= degraded;
    out.push_back(std::move(state));
    out.push_back(std::move(other));
  } else {
    bool taken = keep_taken;
    state.constraints.push_back(taken ? cond : a.logical_not(cond));
    state.trace.push_back({insn.address, taken});
    state.pc = taken ? taken_pc : fall_pc;
    state.solver_degraded |= degraded;
    out.push_back(std::move(state));
  }
  return out;
}

void Machine::enter_function(SymState& state, uint64_t target,
                             uint64_t return_to) {
  ExprArena& a = arena_;
  Frame frame;
  frame.return_address = return_to;
  for (int i = 0; i < 4; ++i) frame.saved[i] = state.regs[6 + i];
  frame.saved_r10 = state.regs[10];
  state.call_stack.push_back(frame);
  state.regs[10] =
      a.add(state.regs[10], a.constant(sbpf::kStackFrameSize, 64));
  state.pc = target;
}

std::vector<SymState> Machine::exec_call(SymState state,
                                         const Instruction& insn) {
  if (state.call_stack.size() + 1 >= sbpf::kStackFrameCount)
    return {aborted(std::move(state), "call depth exceeded")};

  if (insn.opcode == sbpf::kOpCallx) {
    // v1 dialect: the register index rides in the immediate
    if (insn.imm < 0 || insn.imm > 9)
      return {aborted(std::move(state), "callx register out of range")};
    auto value = resolve_value(state, state.regs[insn.imm]);
    if (!value) return {aborted(std::move(state), "unresolvable call target")};
    uint64_t off = *value - image_.text_vm_base();
    if (!image_.function_starts.count(off))
      return {aborted(std::move(state), "callx into unknown function")};
    enter_function(state, off, insn.next_address());
    return {std::move(state)};
  }

  if (auto name = image_.syscall_name(insn.address)) {
    if (!vm::syscall_modeled(*name))
      throw ConfigError("unmodeled syscall: " + *name);
    state.pc = insn.next_address();
    return vm::handle_syscall(*this, std::move(state), *name);
  }
  if (config_.skip_sites.count(insn.address)) {
    // skipped format routine: result is an unconstrained length
    state.regs[0] = arena_.var("skip_" + std::to_string(insn.address), 64,
                               VarField::Havoc);
    state.pc = insn.next_address();
    return {std::move(state)};
  }
  enter_function(state, image_.call_target(insn), insn.next_address());
  return {std::move(state)};
}

SymState Machine::do_exit(SymState state) {
  if (state.call_stack.empty()) {
    state.status = Status::Exited;
    return state;
  }
  Frame frame = state.call_stack.back();
  state.call_stack.pop_back();
  for (int i = 0; i < 4; ++i) state.regs[6 + i] = frame.saved[i];
  state.regs[10] = frame.saved_r10;
  state.pc = frame.return_address;
  return state;
}

SymState Machine::exec_load(SymState state, const Instruction& insn) {
  ExprArena& a = arena_;
  uint32_t width = insn.mem_width();
  ExprRef addr_expr =
      a.add(state.regs[insn.src], a.constant(uint64_t(insn.offset), 64));
  auto addr = resolve_value(state, addr_expr);
  if (!addr) return aborted(std::move(state), "unresolvable load address");
  const MemRegion* r = state.region_at(*addr);
  if (!r || *addr - r->base + width > r->size)
    return aborted(std::move(state), "load outside mapped memory");
  if (config_.record_ledger && r->kind == Region::Input)
    vm::on_memory_event(layout_, state, *addr - r->base, width, false,
                        insn.address);
  ExprRef value = state.load(a, *addr, width);
  state.regs[insn.dst] = width == 8 ? value : a.zext(value, 64);
  state.pc = insn.next_address();
  return state;
}

SymState Machine::exec_store(SymState state, const Instruction& insn) {
  ExprArena& a = arena_;
  uint32_t width = insn.mem_width();
  ExprRef addr_expr =
      a.add(state.regs[insn.dst], a.constant(uint64_t(insn.offset), 64));
  auto addr = resolve_value(state, addr_expr);
  if (!addr) return aborted(std::move(state), "unresolvable store address");
  MemRegion* r = state.region_at(*addr);
  if (!r || !r->writable || *addr - r->base + width > r->size)
    return aborted(std::move(state), "store outside writable memory");
  ExprRef value = insn.cls() == sbpf::kClassStx
                      ? state.regs[insn.src]
                      : a.constant(uint64_t(insn.imm), 64);
  if (width != 8) value = a.extract(value, 8 * width - 1, 0);
  state.store(a, *addr, width, value);
  if (config_.record_ledger && r->kind == Region::Input)
    vm::on_memory_event(layout_, state, *addr - r->base, width, true,
                        insn.address);
  state.pc = insn.next_address();
  return state;
}

std::vector<SymState> Machine::step(SymState state) {
  if (!state.active()) return {std::move(state)};
  const Instruction* insn = image_.at(state.pc);
  if (!insn)
    return {aborted(std::move(state), "program counter outside text")};
  state.coverage.insert(state.pc);
  ++steps;

  switch (insn->cls()) {
    case sbpf::kClassLd:  // lddw
      state.regs[insn->dst] = arena_.constant(uint64_t(insn->imm), 64);
      state.pc = insn->next_address();
      return {std::move(state)};
    case sbpf::kClassLdx:
      return {exec_load(std::move(state), *insn)};
    case sbpf::kClassSt:
    case sbpf::kClassStx:
      return {exec_store(std::move(state), *insn)};
    case sbpf::kClassAlu32:
      return exec_alu(std::move(state), *insn, 32);
    case sbpf::kClassAlu64:
      return exec_alu(std::move(state), *insn, 64);
    case sbpf::kClassJmp:
    case sbpf::kClassJmp32: {
      uint8_t w = insn->cls() == sbpf::kClassJmp32 ? 32 : 64;
      if (insn->opcode == sbpf::kOpJa) {
        state.pc = insn->jump_target();
        return {std::move(state)};
      }
      if (insn->is_exit()) return {do_exit(std::move(state))};
      if (insn->is_call()) return exec_call(std::move(state), *insn);
      return exec_jump(std::move(state), *insn, w);
    }
    default:
      return {aborted(std::move(state), "unsupported instruction class")};
  }
}

}  // namespace solscan::sym
