#include "solscan/isa.hpp"

#include <cstring>

namespace solscan::sbpf {

namespace {

bool alu_op_legal(uint8_t op, uint8_t cls) {
  switch (op) {
    case kAluAdd:
    case kAluSub:
    case kAluMul:
    case kAluDiv:
    case kAluOr:
    case kAluAnd:
    case kAluLsh:
    case kAluRsh:
    case kAluMod:
    case kAluXor:
    case kAluMov:
    case kAluArsh:
      return true;
    case kAluNeg:
      return true;  // K form only, checked by caller
    case kAluEnd:
      return cls == kClassAlu32;  // le/be
    default:
      return false;
  }
}

bool jmp_op_legal(uint8_t op, uint8_t cls) {
  switch (op) {
    case kJmpJeq:
    case kJmpJgt:
    case kJmpJge:
    case kJmpJset:
    case kJmpJne:
    case kJmpJsgt:
    case kJmpJsge:
    case kJmpJlt:
    case kJmpJle:
    case kJmpJslt:
    case kJmpJsle:
      return true;
    case kJmpJa:
    case kJmpCall:
    case kJmpExit:
      return cls == kClassJmp;
    default:
      return false;
  }
}

}  // namespace

bool opcode_legal(uint8_t opcode, Dialect dialect) {
  uint8_t cls = opcode & 0x07;
  uint8_t mode = opcode & 0xe0;
  switch (cls) {
    case kClassLd:
      return opcode == kOpLddw;
    case kClassLdx:
    case kClassStx:
      return mode == 0x60;  // MEM mode only
    case kClassSt:
      return mode == 0x60;
    case kClassAlu32:
    case kClassAlu64: {
      uint8_t op = opcode & 0xf0;
      if (!alu_op_legal(op, cls)) return false;
      if (op == kAluNeg) return (opcode & kSrcX) == 0;
      if (op == kAluEnd) return true;  // 0xd4 le / 0xdc be
      return true;
    }
    case kClassJmp: {
      uint8_t op = opcode & 0xf0;
      if (!jmp_op_legal(op, cls)) return false;
      if (op == kJmpCall) return opcode == kOpCall || opcode == kOpCallx;
      if (op == kJmpExit) return opcode == kOpExit;
      if (op == kJmpJa) return opcode == kOpJa;
      return true;
    }
    case kClassJmp32: {
      if (dialect == Dialect::kV1) {
        uint8_t op = opcode & 0xf0;
        return jmp_op_legal(op, cls);
      }
      return jmp_op_legal(opcode & 0xf0, cls);
    }
    default:
      return false;
  }
}

Instruction decode(const uint8_t slot8[8], const uint8_t* next8,
                   uint64_t address, Dialect dialect) {
  Instruction insn;
  insn.opcode = slot8[0];
  insn.dst = slot8[1] & 0x0f;
  insn.src = (slot8[1] >> 4) & 0x0f;
  int16_t off;
  std::memcpy(&off, slot8 + 2, 2);
  insn.offset = off;
  int32_t imm;
  std::memcpy(&imm, slot8 + 4, 4);
  insn.imm = imm;
  insn.address = address;

  if (!opcode_legal(insn.opcode, dialect))
    throw DecodeError(address, insn.opcode, "reserved or illegal opcode");
  if (insn.dst > 10 || insn.src > 10)
    throw DecodeError(address, insn.opcode, "register index out of range");

  if (insn.opcode == kOpLddw) {
    if (!next8)
      throw DecodeError(address, insn.opcode,
                        "wide load-immediate missing second slot");
    if (next8[0] != 0)
      throw DecodeError(address, insn.opcode,
                        "wide load-immediate second slot has nonzero opcode");
    uint32_t hi;
    std::memcpy(&hi, next8 + 4, 4);
    insn.imm2 = hi;
    insn.imm = int64_t((uint64_t(hi) << 32) | uint32_t(imm));
  } else if (next8) {
    throw DecodeError(address, insn.opcode,
                      "second slot supplied for a narrow opcode");
  }
  return insn;
}

std::vector<uint8_t> encode(const Instruction& insn) {
  std::vector<uint8_t> out(insn.is_wide() ? 16 : 8, 0);
  out[0] = insn.opcode;
  out[1] = uint8_t(insn.dst | (insn.src << 4));
  std::memcpy(out.data() + 2, &insn.offset, 2);
  int32_t lo = int32_t(uint32_t(uint64_t(insn.imm)));
  std::memcpy(out.data() + 4, &lo, 4);
  if (insn.is_wide()) {
    uint32_t hi = uint32_t(uint64_t(insn.imm) >> 32);
    std::memcpy(out.data() + 12, &hi, 4);
  }
  return out;
}

namespace {

const char* alu_name(uint8_t op) {
  switch (op) {
    case kAluAdd: return "add";
    case kAluSub: return "sub";
    case kAluMul: return "mul";
    case kAluDiv: return "div";
    case kAluOr: return "or";
    case kAluAnd: return "and";
    case kAluLsh: return "lsh";
    case kAluRsh: return "rsh";
    case kAluNeg: return "neg";
    case kAluMod: return "mod";
    case kAluXor: return "xor";
    case kAluMov: return "mov";
    case kAluArsh: return "arsh";
    default: return "end";
  }
}

const char* jmp_name(uint8_t op) {
  switch (op) {
    case kJmpJa: return "ja";
    case kJmpJeq: return "jeq";
    case kJmpJgt: return "jgt";
    case kJmpJge: return "jge";
    case kJmpJset: return "jset";
    case kJmpJne: return "jne";
    case kJmpJsgt: return "jsgt";
    case kJmpJsge: return "jsge";
    case kJmpJlt: return "jlt";
    case kJmpJle: return "jle";
    case kJmpJslt: return "jslt";
    case kJmpJsle: return "jsle";
    default: return "?";
  }
}

const char* size_suffix(uint8_t opcode) {
  switch (opcode & 0x18) {
    case kSizeW: return "w";
    case kSizeH: return "h";
    case kSizeB: return "b";
    default: return "dw";
  }
}

}  // namespace

std::string mnemonic(const Instruction& insn) {
  uint8_t cls = insn.cls();
  if (insn.opcode == kOpLddw) return "lddw";
  if (insn.opcode == kOpExit) return "exit";
  if (insn.opcode == kOpCall) return "call";
  if (insn.opcode == kOpCallx) return "callx";
  if (insn.opcode == kOpJa) return "ja";
  if (cls == kClassLdx) return std::string("ldx") + size_suffix(insn.opcode);
  if (cls == kClassSt) return std::string("st") + size_suffix(insn.opcode);
  if (cls == kClassStx) return std::string("stx") + size_suffix(insn.opcode);
  if (cls == kClassAlu32 || cls == kClassAlu64) {
    std::string n = alu_name(insn.opcode & 0xf0);
    if ((insn.opcode & 0xf0) == kAluEnd)
      n = (insn.opcode & kSrcX) ? "be" : "le";
    if (cls == kClassAlu32 && (insn.opcode & 0xf0) != kAluEnd) n += "32";
    return n;
  }
  std::string n = jmp_name(insn.opcode & 0xf0);
  if (cls == kClassJmp32) n += "32";
  return n;
}

std::string disassemble_line(const Instruction& insn) {
  char buf[128];
  std::string m = mnemonic(insn);
  uint8_t cls = insn.cls();
  if (insn.opcode == kOpExit) {
    snprintf(buf, sizeof buf, "%llx: exit", (unsigned long long)insn.address);
  } else if (insn.opcode == kOpLddw) {
    snprintf(buf, sizeof buf, "%llx: lddw r%d, %lld",
             (unsigned long long)insn.address, insn.dst,
             (long long)insn.imm);
  } else if (insn.opcode == kOpCall) {
    snprintf(buf, sizeof buf, "%llx: call %lld",
             (unsigned long long)insn.address, (long long)insn.imm);
  } else if (insn.opcode == kOpCallx) {
    snprintf(buf, sizeof buf, "%llx: callx r%d",
             (unsigned long long)insn.address, insn.dst);
  } else if (insn.opcode == kOpJa) {
    snprintf(buf, sizeof buf, "%llx: ja %llx",
             (unsigned long long)insn.address,
             (unsigned long long)insn.jump_target());
  } else if (insn.is_cond_jump()) {
    if (insn.opcode & kSrcX)
      snprintf(buf, sizeof buf, "%llx: %s r%d, r%d, %llx",
               (unsigned long long)insn.address, m.c_str(), insn.dst,
               insn.src, (unsigned long long)insn.jump_target());
    else
      snprintf(buf, sizeof buf, "%llx: %s r%d, %lld, %llx",
               (unsigned long long)insn.address, m.c_str(), insn.dst,
               (long long)insn.imm, (unsigned long long)insn.jump_target());
  } else if (insn.is_load()) {
    snprintf(buf, sizeof buf, "%llx: %s r%d, [r%d%+d]",
             (unsigned long long)insn.address, m.c_str(), insn.dst, insn.src,
             insn.offset);
  } else if (cls == kClassSt) {
    snprintf(buf, sizeof buf, "%llx: %s [r%d%+d], %lld",
             (unsigned long long)insn.address, m.c_str(), insn.dst,
             insn.offset, (long long)insn.imm);
  } else if (cls == kClassStx) {
    snprintf(buf, sizeof buf, "%llx: %s [r%d%+d], r%d",
             (unsigned long long)insn.address, m.c_str(), insn.dst,
             insn.offset, insn.src);
  } else if (insn.opcode & kSrcX) {
    snprintf(buf, sizeof buf, "%llx: %s r%d, r%d",
             (unsigned long long)insn.address, m.c_str(), insn.dst, insn.src);
  } else {
    snprintf(buf, sizeof buf, "%llx: %s r%d, %lld",
             (unsigned long long)insn.address, m.c_str(), insn.dst,
             (long long)insn.imm);
  }
  return buf;
}

}  // namespace solscan::sbpf
