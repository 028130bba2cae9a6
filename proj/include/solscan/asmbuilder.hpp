#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "solscan/isa.hpp"

namespace solscan::sbpf {

// Programmatic sBPF assembler with label resolution and a minimal ELF
// writer. Used for fixture authoring; encoding is independent of decode()
// so the decoder roundtrip test has a second route.
class AsmBuilder {
 public:
  using Reg = uint8_t;

  void label(const std::string& name);
  // marks a label as a function (gets an ELF FUNC symbol)
  void function(const std::string& name);

  void raw(uint8_t opcode, Reg dst, Reg src, int16_t off, int32_t imm);

  void mov64_imm(Reg dst, int32_t imm) { raw(0xb7, dst, 0, 0, imm); }
  void mov64_reg(Reg dst, Reg src) { raw(0xbf, dst, src, 0, 0); }
  void mov32_imm(Reg dst, int32_t imm) { raw(0xb4, dst, 0, 0, imm); }
  void add64_imm(Reg dst, int32_t imm) { raw(0x07, dst, 0, 0, imm); }
  void add64_reg(Reg dst, Reg src) { raw(0x0f, dst, src, 0, 0); }
  void sub64_imm(Reg dst, int32_t imm) { raw(0x17, dst, 0, 0, imm); }
  void sub64_reg(Reg dst, Reg src) { raw(0x1f, dst, src, 0, 0); }
  void mul64_imm(Reg dst, int32_t imm) { raw(0x27, dst, 0, 0, imm); }
  void mul64_reg(Reg dst, Reg src) { raw(0x2f, dst, src, 0, 0); }
  void div64_imm(Reg dst, int32_t imm) { raw(0x37, dst, 0, 0, imm); }
  void div64_reg(Reg dst, Reg src) { raw(0x3f, dst, src, 0, 0); }
  void mod64_imm(Reg dst, int32_t imm) { raw(0x97, dst, 0, 0, imm); }
  void mod64_reg(Reg dst, Reg src) { raw(0x9f, dst, src, 0, 0); }
  void and64_imm(Reg dst, int32_t imm) { raw(0x57, dst, 0, 0, imm); }
  void or64_imm(Reg dst, int32_t imm) { raw(0x47, dst, 0, 0, imm); }
  void or64_reg(Reg dst, Reg src) { raw(0x4f, dst, src, 0, 0); }
  void xor64_imm(Reg dst, int32_t imm) { raw(0xa7, dst, 0, 0, imm); }
  void xor64_reg(Reg dst, Reg src) { raw(0xaf, dst, src, 0, 0); }
  void lsh64_imm(Reg dst, int32_t imm) { raw(0x67, dst, 0, 0, imm); }
  void rsh64_imm(Reg dst, int32_t imm) { raw(0x77, dst, 0, 0, imm); }

  void lddw(Reg dst, uint64_t imm);
  // lddw of a rodata VM address, expressed via relocation
  void lddw_rodata(Reg dst, uint64_t rodata_off);

  void ldxb(Reg dst, Reg src, int16_t off) { raw(0x71, dst, src, off, 0); }
  void ldxh(Reg dst, Reg src, int16_t off) { raw(0x69, dst, src, off, 0); }
  void ldxw(Reg dst, Reg src, int16_t off) { raw(0x61, dst, src, off, 0); }
  void ldxdw(Reg dst, Reg src, int16_t off) { raw(0x79, dst, src, off, 0); }
  void stxb(Reg dst, int16_t off, Reg src) { raw(0x73, dst, src, off, 0); }
  void stxh(Reg dst, int16_t off, Reg src) { raw(0x6b, dst, src, off, 0); }
  void stxw(Reg dst, int16_t off, Reg src) { raw(0x63, dst, src, off, 0); }
  void stxdw(Reg dst, int16_t off, Reg src) { raw(0x7b, dst, src, off, 0); }
  void stb(Reg dst, int16_t off, int32_t imm) { raw(0x72, dst, 0, off, imm); }
  void stdw(Reg dst, int16_t off, int32_t imm) { raw(0x7a, dst, 0, off, imm); }

  void ja(const std::string& target);
  // conditional jumps, immediate and register forms
  void jeq_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0x15, dst, 0, imm, t); }
  void jne_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0x55, dst, 0, imm, t); }
  void jgt_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0x25, dst, 0, imm, t); }
  void jge_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0x35, dst, 0, imm, t); }
  void jlt_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0xa5, dst, 0, imm, t); }
  void jle_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0xb5, dst, 0, imm, t); }
  void jsgt_imm(Reg dst, int32_t imm, const std::string& t) { jcond(0x65, dst, 0, imm, t); }
  void jeq_reg(Reg dst, Reg src, const std::string& t) { jcond(0x1d, dst, src, 0, t); }
  void jne_reg(Reg dst, Reg src, const std::string& t) { jcond(0x5d, dst, src, 0, t); }
  void jge_reg(Reg dst, Reg src, const std::string& t) { jcond(0x3d, dst, src, 0, t); }
  void jlt_reg(Reg dst, Reg src, const std::string& t) { jcond(0xad, dst, src, 0, t); }

  void call(const std::string& function_label);
  void syscall(const std::string& name);
  void exit() { raw(0x95, 0, 0, 0, 0); }

  // appends bytes to .rodata, returns their offset
  uint64_t rodata(const std::vector<uint8_t>& bytes);

  uint64_t current_offset() const { return text_.size(); }
  uint64_t label_offset(const std::string& name) const;

  // Emits a relocatable sBPF ELF; entry_label must be a defined function.
  std::vector<uint8_t> finalize(const std::string& entry_label = "entrypoint");

 private:
  void jcond(uint8_t opcode, Reg dst, Reg src, int32_t imm,
             const std::string& target);

  struct Fixup {
    uint64_t insn_off;
    std::string label;
  };
  struct CallSite {
    uint64_t insn_off;
    std::string name;
    bool is_syscall;
  };
  struct RodataRef {
    uint64_t insn_off;
    uint64_t rodata_off;
  };

  std::vector<uint8_t> text_;
  std::vector<uint8_t> rodata_;
  std::map<std::string, uint64_t> labels_;
  std::vector<std::string> functions_;
  std::vector<Fixup> jump_fixups_;
  std::vector<CallSite> call_sites_;
  std::vector<RodataRef> rodata_refs_;
};

}  // namespace solscan::sbpf
