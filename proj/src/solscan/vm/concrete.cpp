#include "solscan/concrete.hpp"

#include <cstring>

namespace solscan::vm {

using sbpf::Instruction;

namespace {

struct Interp {
  const sbpf::ProgramImage& image;
  const SyscallScript& script;
  ConcreteResult res;

  std::array<uint64_t, 11> regs{};
  uint64_t pc = 0;
  std::vector<uint8_t> stack, heap, input, rodata;
  uint64_t rodata_base = 0;
  uint64_t heap_top = 0;

  struct Frame {
    uint64_t return_address;
    std::array<uint64_t, 4> saved;
    uint64_t saved_r10;
  };
  std::vector<Frame> frames;
  size_t pda_cursor = 0;
  size_t cpi_cursor = 0;

  Interp(const sbpf::ProgramImage& img, const std::vector<uint8_t>& in,
         const SyscallScript& sc)
      : image(img), script(sc) {
    stack.assign(sbpf::kStackFrameSize * sbpf::kStackFrameCount, 0);
    heap.assign(sbpf::kHeapSize, 0);
    input = in;
    rodata = img.rodata;
    rodata_base = img.rodata_base;
    pc = img.entry;
    regs[1] = sbpf::kInputBase;
    regs[10] = sbpf::kStackBase + sbpf::kStackFrameSize;
  }

  uint8_t* resolve(uint64_t addr, uint64_t len, bool write) {
    auto in_range = [&](uint64_t base, std::vector<uint8_t>& v) -> uint8_t* {
      if (addr >= base && addr - base + len <= v.size())
        return v.data() + (addr - base);
      return nullptr;
    };
    if (uint8_t* p = in_range(sbpf::kStackBase, stack)) return p;
    if (uint8_t* p = in_range(sbpf::kHeapBase, heap)) return p;
    if (uint8_t* p = in_range(sbpf::kInputBase, input)) return p;
    if (!write && rodata_base)
      if (uint8_t* p = in_range(rodata_base, rodata)) return p;
    return nullptr;
  }

  bool load(uint64_t addr, uint32_t width, uint64_t& out) {
    uint8_t* p = resolve(addr, width, false);
    if (!p) return false;
    out = 0;
    std::memcpy(&out, p, width);
    return true;
  }
  bool store(uint64_t addr, uint32_t width, uint64_t v) {
    uint8_t* p = resolve(addr, width, true);
    if (!p) return false;
    std::memcpy(p, &v, width);
    return true;
  }

  void abort_with(const char* why) {
    res.end = ConcreteResult::End::Aborted;
    res.abort_reason = why;
  }

  bool syscall(const std::string& name) {
    if (name == "abort" || name == "sol_panic_") {
      abort_with("abort");
      return false;
    }
    if (name.rfind("sol_log", 0) == 0) {
      regs[0] = 0;
      return true;
    }
    if (name == "sol_memcpy_" || name == "sol_memmove_") {
      uint8_t* d = resolve(regs[1], regs[3], true);
      uint8_t* s = resolve(regs[2], regs[3], false);
      if (!d || !s) return (abort_with("memcpy fault"), false);
      std::memmove(d, s, regs[3]);
      regs[0] = 0;
      return true;
    }
    if (name == "sol_memset_") {
      uint8_t* d = resolve(regs[1], regs[3], true);
      if (!d) return (abort_with("memset fault"), false);
      std::memset(d, int(regs[2] & 0xff), regs[3]);
      regs[0] = 0;
      return true;
    }
    if (name == "sol_memcmp_") {
      uint8_t* a = resolve(regs[1], regs[3], false);
      uint8_t* b = resolve(regs[2], regs[3], false);
      uint8_t* out = resolve(regs[4], 4, true);
      if (!a || !b || !out) return (abort_with("memcmp fault"), false);
      int32_t r = 0;
      for (uint64_t i = 0; i < regs[3]; ++i) {
        if (a[i] != b[i]) {
          r = a[i] < b[i] ? -1 : 1;
          break;
        }
      }
      std::memcpy(out, &r, 4);
      regs[0] = 0;
      return true;
    }
    if (name == "sol_alloc_free_") {
      if (regs[2] != 0) {
        regs[0] = 0;
        return true;
      }
      uint64_t want = (regs[1] + 7) & ~7ull;
      if (heap_top + want > sbpf::kHeapSize) {
        regs[0] = 0;
        return true;
      }
      regs[0] = sbpf::kHeapBase + heap_top;
      heap_top += want;
      return true;
    }
    if (name == "sol_create_program_address" ||
        name == "sol_try_find_program_address") {
      bool with_bump = name == "sol_try_find_program_address";
      std::array<uint8_t, 33> pda{};
      if (pda_cursor < script.pda_results.size())
        pda = script.pda_results[pda_cursor];
      ++pda_cursor;
      uint8_t* out = resolve(regs[4], 32, true);
      if (!out) return (abort_with("pda fault"), false);
      std::memcpy(out, pda.data(), 32);
      if (with_bump) {
        uint8_t* bump = resolve(regs[5], 1, true);
        if (!bump) return (abort_with("pda bump fault"), false);
        *bump = pda[32];
      }
      regs[0] = 0;
      return true;
    }
    if (name == "sol_invoke_signed_c" || name == "sol_invoke_signed_rust") {
      if (cpi_cursor < script.cpi_effects.size())
        for (const SyscallScript::CpiWrite& w :
             script.cpi_effects[cpi_cursor]) {
          uint8_t* p = resolve(w.address, w.bytes.size(), true);
          if (!p) return (abort_with("cpi writeback fault"), false);
          std::memcpy(p, w.bytes.data(), w.bytes.size());
        }
      ++cpi_cursor;
      regs[0] = 0;
      return true;
    }
    abort_with("unmodeled syscall");
    return false;
  }

  void run(uint64_t step_limit) {
    for (uint64_t steps = 0; steps < step_limit; ++steps) {
      const Instruction* insn = image.at(pc);
      if (!insn) return abort_with("pc outside text");
      res.pc_trace.push_back(pc);
      if (!exec(*insn)) return;
      if (res.end == ConcreteResult::End::Exited) return;
    }
    res.end = ConcreteResult::End::StepLimit;
  }

  bool exec(const Instruction& insn) {
    uint64_t next = insn.next_address();
    uint8_t cls = insn.cls();
    switch (cls) {
      case sbpf::kClassLd:
        regs[insn.dst] = uint64_t(insn.imm);
        pc = next;
        return true;
      case sbpf::kClassLdx: {
        uint64_t v;
        if (!load(regs[insn.src] + uint64_t(int64_t(insn.offset)),
                  insn.mem_width(), v))
          return (abort_with("load fault"), false);
        regs[insn.dst] = v;
        pc = next;
        return true;
      }
      case sbpf::kClassSt:
      case sbpf::kClassStx: {
        uint64_t v = cls == sbpf::kClassStx ? regs[insn.src]
                                            : uint64_t(insn.imm);
        if (!store(regs[insn.dst] + uint64_t(int64_t(insn.offset)),
                   insn.mem_width(), v))
          return (abort_with("store fault"), false);
        pc = next;
        return true;
      }
      case sbpf::kClassAlu32:
      case sbpf::kClassAlu64:
        return alu(insn, cls == sbpf::kClassAlu64 ? 64 : 32);
      case sbpf::kClassJmp:
      case sbpf::kClassJmp32:
        return jump(insn, cls == sbpf::kClassJmp32 ? 32 : 64);
    }
    abort_with("bad instruction class");
    return false;
  }

  bool alu(const Instruction& insn, int w) {
    uint64_t mask = w == 64 ? ~0ull : 0xffffffffull;
    uint64_t a = regs[insn.dst] & mask;
    uint64_t b = (insn.opcode & sbpf::kSrcX) ? regs[insn.src] & mask
                                             : uint64_t(insn.imm) & mask;
    uint8_t op = insn.opcode & 0xf0;
    uint64_t r = 0;
    switch (op) {
      case sbpf::kAluAdd: r = a + b; break;
      case sbpf::kAluSub: r = a - b; break;
      case sbpf::kAluMul: r = a * b; break;
      case sbpf::kAluOr: r = a | b; break;
      case sbpf::kAluAnd: r = a & b; break;
      case sbpf::kAluXor: r = a ^ b; break;
      case sbpf::kAluMov: r = b; break;
      case sbpf::kAluNeg: r = ~a + 1; break;
      case sbpf::kAluLsh: r = a << (b & (w - 1)); break;
      case sbpf::kAluRsh: r = a >> (b & (w - 1)); break;
      case sbpf::kAluArsh: {
        int shift = int(b & (w - 1));
        if (w == 64)
          r = uint64_t(int64_t(a) >> shift);
        else
          r = uint64_t(uint32_t(int32_t(uint32_t(a)) >> shift));
        break;
      }
      case sbpf::kAluDiv:
      case sbpf::kAluMod:
        if (b == 0) return (abort_with("division by zero"), false);
        r = op == sbpf::kAluDiv ? a / b : a % b;
        break;
      case sbpf::kAluEnd: {
        uint32_t bytes = uint32_t(insn.imm) / 8;
        uint64_t low = regs[insn.dst] &
                       (bytes >= 8 ? ~0ull : ((1ull << (8 * bytes)) - 1));
        if (insn.opcode & sbpf::kSrcX) {  // be
          uint64_t sw = 0;
          for (uint32_t i = 0; i < bytes; ++i)
            sw = (sw << 8) | ((low >> (8 * i)) & 0xff);
          low = sw;
        }
        regs[insn.dst] = low;
        pc = insn.next_address();
        return true;
      }
      default:
        abort_with("bad alu op");
        return false;
    }
    regs[insn.dst] = r & mask;
    pc = insn.next_address();
    return true;
  }

  bool jump(const Instruction& insn, int w) {
    if (insn.opcode == sbpf::kOpJa) {
      pc = insn.jump_target();
      return true;
    }
    if (insn.is_exit()) {
      if (frames.empty()) {
        res.end = ConcreteResult::End::Exited;
        res.r0 = regs[0];
        return true;
      }
      Frame f = frames.back();
      frames.pop_back();
      for (int i = 0; i < 4; ++i) regs[6 + i] = f.saved[i];
      regs[10] = f.saved_r10;
      pc = f.return_address;
      return true;
    }
    if (insn.is_call()) {
      if (insn.opcode == sbpf::kOpCall) {
        if (auto name = image.syscall_name(insn.address)) {
          bool keep = syscall(*name);
          pc = insn.next_address();
          return keep;
        }
        return enter(image.call_target(insn), insn.next_address());
      }
      // callx: v1 keeps the register index in the immediate
      if (insn.imm < 0 || insn.imm > 9)
        return (abort_with("callx register out of range"), false);
      uint64_t off = regs[insn.imm] - image.text_vm_base();
      if (!image.function_starts.count(off))
        return (abort_with("callx into unknown function"), false);
      return enter(off, insn.next_address());
    }
    uint64_t mask = w == 64 ? ~0ull : 0xffffffffull;
    uint64_t a = regs[insn.dst] & mask;
    uint64_t b = (insn.opcode & sbpf::kSrcX) ? regs[insn.src] & mask
                                             : uint64_t(insn.imm) & mask;
    int64_t sa = w == 64 ? int64_t(a) : int64_t(int32_t(uint32_t(a)));
    int64_t sb = w == 64 ? int64_t(b) : int64_t(int32_t(uint32_t(b)));
    bool taken = false;
    switch (insn.opcode & 0xf0) {
      case sbpf::kJmpJeq: taken = a == b; break;
      case sbpf::kJmpJne: taken = a != b; break;
      case sbpf::kJmpJgt: taken = a > b; break;
      case sbpf::kJmpJge: taken = a >= b; break;
      case sbpf::kJmpJlt: taken = a < b; break;
      case sbpf::kJmpJle: taken = a <= b; break;
      case sbpf::kJmpJsgt: taken = sa > sb; break;
      case sbpf::kJmpJsge: taken = sa >= sb; break;
      case sbpf::kJmpJslt: taken = sa < sb; break;
      case sbpf::kJmpJsle: taken = sa <= sb; break;
      case sbpf::kJmpJset: taken = (a & b) != 0; break;
      default:
        abort_with("bad jump op");
        return false;
    }
    pc = taken ? insn.jump_target() : insn.next_address();
    return true;
  }

  bool enter(uint64_t target, uint64_t return_to) {
    if (frames.size() + 1 >= sbpf::kStackFrameCount)
      return (abort_with("call depth exceeded"), false);
    Frame f;
    f.return_address = return_to;
    for (int i = 0; i < 4; ++i) f.saved[i] = regs[6 + i];
    f.saved_r10 = regs[10];
    frames.push_back(f);
    regs[10] += sbpf::kStackFrameSize;
    pc = target;
    return true;
  }
};

}  // namespace

ConcreteResult run_concrete(const sbpf::ProgramImage& image,
                            const std::vector<uint8_t>& input_bytes,
                            const SyscallScript& script,
                            uint64_t step_limit) {
  Interp interp(image, input_bytes, script);
  interp.run(step_limit);
  return std::move(interp.res);
}

}  // namespace solscan::vm
