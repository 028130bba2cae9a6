#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace solscan::sbpf {

// Instruction classes (low 3 opcode bits).
inline constexpr uint8_t kClassLd = 0x00;
inline constexpr uint8_t kClassLdx = 0x01;
inline constexpr uint8_t kClassSt = 0x02;
inline constexpr uint8_t kClassStx = 0x03;
inline constexpr uint8_t kClassAlu32 = 0x04;
inline constexpr uint8_t kClassJmp = 0x05;
inline constexpr uint8_t kClassJmp32 = 0x06;
inline constexpr uint8_t kClassAlu64 = 0x07;

// Memory access sizes (opcode bits 3-4 for ld/st classes).
inline constexpr uint8_t kSizeW = 0x00;   // 4 bytes
inline constexpr uint8_t kSizeH = 0x08;   // 2 bytes
inline constexpr uint8_t kSizeB = 0x10;   // 1 byte
inline constexpr uint8_t kSizeDw = 0x18;  // 8 bytes

// ALU / jump operation bits (opcode bits 4-7).
inline constexpr uint8_t kAluAdd = 0x00;
inline constexpr uint8_t kAluSub = 0x10;
inline constexpr uint8_t kAluMul = 0x20;
inline constexpr uint8_t kAluDiv = 0x30;
inline constexpr uint8_t kAluOr = 0x40;
inline constexpr uint8_t kAluAnd = 0x50;
inline constexpr uint8_t kAluLsh = 0x60;
inline constexpr uint8_t kAluRsh = 0x70;
inline constexpr uint8_t kAluNeg = 0x80;
inline constexpr uint8_t kAluMod = 0x90;
inline constexpr uint8_t kAluXor = 0xa0;
inline constexpr uint8_t kAluMov = 0xb0;
inline constexpr uint8_t kAluArsh = 0xc0;
inline constexpr uint8_t kAluEnd = 0xd0;

inline constexpr uint8_t kJmpJa = 0x00;
inline constexpr uint8_t kJmpJeq = 0x10;
inline constexpr uint8_t kJmpJgt = 0x20;
inline constexpr uint8_t kJmpJge = 0x30;
inline constexpr uint8_t kJmpJset = 0x40;
inline constexpr uint8_t kJmpJne = 0x50;
inline constexpr uint8_t kJmpJsgt = 0x60;
inline constexpr uint8_t kJmpJsge = 0x70;
inline constexpr uint8_t kJmpCall = 0x80;
inline constexpr uint8_t kJmpExit = 0x90;
inline constexpr uint8_t kJmpJlt = 0xa0;
inline constexpr uint8_t kJmpJle = 0xb0;
inline constexpr uint8_t kJmpJslt = 0xc0;
inline constexpr uint8_t kJmpJsle = 0xd0;

// src operand flag (imm vs register form)
inline constexpr uint8_t kSrcK = 0x00;
inline constexpr uint8_t kSrcX = 0x08;

inline constexpr uint8_t kOpLddw = 0x18;   // wide load-immediate, 2 slots
inline constexpr uint8_t kOpCall = 0x85;
inline constexpr uint8_t kOpCallx = 0x8d;
inline constexpr uint8_t kOpExit = 0x95;
inline constexpr uint8_t kOpJa = 0x05;

struct Instruction {
  uint8_t opcode = 0;
  uint8_t dst = 0;
  uint8_t src = 0;
  int16_t offset = 0;
  int64_t imm = 0;       // 64-bit only for lddw
  uint64_t address = 0;  // byte offset in the text section
  uint32_t imm2 = 0;     // second-slot imm bits of lddw (pre-merge)

  uint8_t cls() const { return opcode & 0x07; }
  bool is_wide() const { return opcode == kOpLddw; }
  bool is_jump() const { return cls() == kClassJmp || cls() == kClassJmp32; }
  bool is_cond_jump() const {
    if (!is_jump()) return false;
    uint8_t op = opcode & 0xf0;
    return op != kJmpJa && op != kJmpCall && op != kJmpExit;
  }
  bool is_exit() const { return opcode == kOpExit; }
  bool is_call() const { return opcode == kOpCall || opcode == kOpCallx; }
  bool is_load() const { return cls() == kClassLdx; }
  bool is_store() const { return cls() == kClassSt || cls() == kClassStx; }
  uint32_t mem_width() const {  // bytes
    switch (opcode & 0x18) {
      case kSizeW: return 4;
      case kSizeH: return 2;
      case kSizeB: return 1;
      default: return 8;
    }
  }
  uint64_t size() const { return is_wide() ? 16 : 8; }
  uint64_t next_address() const { return address + size(); }
  // target of a direct (non-call) jump
  uint64_t jump_target() const {
    return address + 8 + int64_t(offset) * 8;
  }
};

struct DecodeError : std::runtime_error {
  DecodeError(uint64_t address, uint8_t opcode, const std::string& what)
      : std::runtime_error(what), address(address), opcode(opcode) {}
  uint64_t address;
  uint8_t opcode;
};

// Dialect switch; kV1 is the pre-SIMD-0174 instruction set the scanner
// targets, kV2 additionally accepts the newer opcode variants.
enum class Dialect { kV1, kV2 };

bool opcode_legal(uint8_t opcode, Dialect dialect = Dialect::kV1);

// Decodes one instruction from an 8-byte slot; next8 must be supplied
// exactly when the slot holds the wide load-immediate.
Instruction decode(const uint8_t slot8[8], const uint8_t* next8,
                   uint64_t address, Dialect dialect = Dialect::kV1);

// Re-encodes to 8 (or 16) bytes; inverse of decode.
std::vector<uint8_t> encode(const Instruction& insn);

std::string mnemonic(const Instruction& insn);
// One line per instruction: "address: mnemonic operands".
std::string disassemble_line(const Instruction& insn);

}  // namespace solscan::sbpf
