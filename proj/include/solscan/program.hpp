#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "solscan/isa.hpp"

namespace solscan::sbpf {

// Deployed VM memory map.
inline constexpr uint64_t kTextBase = 0x1'0000'0000ull;
inline constexpr uint64_t kStackBase = 0x2'0000'0000ull;
inline constexpr uint64_t kHeapBase = 0x3'0000'0000ull;
inline constexpr uint64_t kInputBase = 0x4'0000'0000ull;
inline constexpr uint64_t kStackFrameSize = 4096;
inline constexpr uint64_t kStackFrameCount = 64;
inline constexpr uint64_t kHeapSize = 32 * 1024;

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedTargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RelocationError : std::runtime_error {
  RelocationError(uint64_t offset, const std::string& what)
      : std::runtime_error(what), offset(offset) {}
  uint64_t offset;
};

struct ProgramImage {
  // address-ordered; addresses are byte offsets into .text
  std::vector<Instruction> instructions;
  uint64_t entry = 0;
  // call-site text address -> syscall name
  std::map<uint64_t, std::string> syscalls;
  std::vector<uint8_t> rodata;
  uint64_t rodata_base = 0;  // VM address of rodata[0]; 0 if none
  std::set<uint64_t> function_starts;
  uint64_t text_vaddr = 0;

  // index into instructions by text address
  std::map<uint64_t, size_t> by_address;

  const Instruction* at(uint64_t address) const {
    auto it = by_address.find(address);
    return it == by_address.end() ? nullptr : &instructions[it->second];
  }
  bool is_syscall_site(uint64_t address) const {
    return syscalls.count(address) != 0;
  }
  std::optional<std::string> syscall_name(uint64_t address) const {
    auto it = syscalls.find(address);
    if (it == syscalls.end()) return std::nullopt;
    return it->second;
  }
  // resolved target of an internal `call imm` (text address)
  uint64_t call_target(const Instruction& insn) const {
    return insn.address + 8 + insn.imm * 8;
  }
  uint64_t text_vm_base() const { return kTextBase + text_vaddr; }
};

// Loads and fully relocates an sBPF ELF.
ProgramImage load_program(const std::vector<uint8_t>& elf_bytes,
                          Dialect dialect = Dialect::kV1);

// Textual dump, one instruction per line (fixture authoring aid).
std::string dump_program(const ProgramImage& image);

}  // namespace solscan::sbpf
