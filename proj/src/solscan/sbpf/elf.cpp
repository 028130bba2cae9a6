#include <elf.h>

#include <cstring>

#include "solscan/program.hpp"

namespace solscan::sbpf {

namespace {

constexpr uint16_t kMachineBpf = 247;  // EM_BPF
constexpr uint16_t kMachineSbf = 263;  // EM_SBF

// sBPF relocation types
constexpr uint32_t kRelocLddw = 1;       // R_BPF_64_64
constexpr uint32_t kRelocRelative = 8;   // R_BPF_64_RELATIVE
constexpr uint32_t kRelocCall = 10;      // R_BPF_64_32

struct SectionView {
  const Elf64_Shdr* hdr = nullptr;
  size_t index = 0;
};

template <typename T>
const T* checked_ptr(const std::vector<uint8_t>& bytes, uint64_t off,
                     uint64_t count = 1) {
  if (off + sizeof(T) * count > bytes.size() || off + sizeof(T) * count < off)
    throw LoadError("structure extends past end of file");
  return reinterpret_cast<const T*>(bytes.data() + off);
}

}  // namespace

ProgramImage load_program(const std::vector<uint8_t>& elf_bytes,
                          Dialect dialect) {
  if (elf_bytes.size() < sizeof(Elf64_Ehdr))
    throw LoadError("file too short for ELF header");
  Elf64_Ehdr ehdr;
  std::memcpy(&ehdr, elf_bytes.data(), sizeof ehdr);
  if (std::memcmp(ehdr.e_ident, ELFMAG, SELFMAG) != 0)
    throw LoadError("bad ELF magic");
  if (ehdr.e_ident[EI_CLASS] != ELFCLASS64)
    throw LoadError("not a 64-bit ELF (e_ident[EI_CLASS])");
  if (ehdr.e_ident[EI_DATA] != ELFDATA2LSB)
    throw LoadError("not little-endian (e_ident[EI_DATA])");
  if (ehdr.e_machine != kMachineBpf && ehdr.e_machine != kMachineSbf)
    throw UnsupportedTargetError("unsupported machine type " +
                                 std::to_string(ehdr.e_machine));
  if (ehdr.e_shoff == 0 || ehdr.e_shnum == 0)
    throw LoadError("missing section header table (e_shoff)");

  const Elf64_Shdr* shdrs =
      checked_ptr<Elf64_Shdr>(elf_bytes, ehdr.e_shoff, ehdr.e_shnum);
  if (ehdr.e_shstrndx >= ehdr.e_shnum)
    throw LoadError("e_shstrndx out of range");
  const Elf64_Shdr& shstr = shdrs[ehdr.e_shstrndx];
  auto section_name = [&](const Elf64_Shdr& s) -> std::string {
    uint64_t off = shstr.sh_offset + s.sh_name;
    if (off >= elf_bytes.size()) throw LoadError("section name out of range");
    return reinterpret_cast<const char*>(elf_bytes.data() + off);
  };

  SectionView text, rodata, dynsym, dynstr, symtab, strtab;
  std::vector<SectionView> rels;
  for (size_t i = 1; i < ehdr.e_shnum; ++i) {
    const Elf64_Shdr& s = shdrs[i];
    std::string name = section_name(s);
    if (name == ".text") text = {&s, i};
    else if (name == ".rodata" || name.rfind(".rodata.", 0) == 0)
      rodata = {&s, i};
    else if (s.sh_type == SHT_DYNSYM) dynsym = {&s, i};
    else if (name == ".dynstr") dynstr = {&s, i};
    else if (s.sh_type == SHT_SYMTAB) symtab = {&s, i};
    else if (name == ".strtab") strtab = {&s, i};
    else if (s.sh_type == SHT_REL) rels.push_back({&s, i});
  }
  if (!text.hdr) throw LoadError("missing .text section");
  if (text.hdr->sh_size % 8 != 0)
    throw LoadError(".text size not a multiple of 8");
  checked_ptr<uint8_t>(elf_bytes, text.hdr->sh_offset, text.hdr->sh_size);

  ProgramImage image;
  image.text_vaddr = text.hdr->sh_addr;
  std::vector<uint8_t> text_bytes(
      elf_bytes.begin() + text.hdr->sh_offset,
      elf_bytes.begin() + text.hdr->sh_offset + text.hdr->sh_size);

  if (rodata.hdr) {
    checked_ptr<uint8_t>(elf_bytes, rodata.hdr->sh_offset,
                         rodata.hdr->sh_size);
    image.rodata.assign(
        elf_bytes.begin() + rodata.hdr->sh_offset,
        elf_bytes.begin() + rodata.hdr->sh_offset + rodata.hdr->sh_size);
    image.rodata_base = kTextBase + rodata.hdr->sh_addr;
  }

  // dynamic symbol table (syscalls, exported functions)
  std::vector<Elf64_Sym> dsyms;
  auto sym_string = [&](const SectionView& strs, uint32_t off) -> std::string {
    if (!strs.hdr) throw LoadError("symbol names without a string table");
    uint64_t p = strs.hdr->sh_offset + off;
    if (p >= elf_bytes.size()) throw LoadError("symbol name out of range");
    return reinterpret_cast<const char*>(elf_bytes.data() + p);
  };
  if (dynsym.hdr) {
    size_t n = dynsym.hdr->sh_size / sizeof(Elf64_Sym);
    const Elf64_Sym* p =
        checked_ptr<Elf64_Sym>(elf_bytes, dynsym.hdr->sh_offset, n);
    dsyms.assign(p, p + n);
  }

  // apply relocations against the text copy
  auto in_text = [&](uint64_t vaddr) {
    return vaddr >= image.text_vaddr &&
           vaddr < image.text_vaddr + text_bytes.size();
  };
  auto patch_lddw = [&](uint64_t text_off, uint64_t value) {
    if (text_off + 16 > text_bytes.size())
      throw RelocationError(text_off, "relocation target outside .text");
    uint32_t lo = uint32_t(value);
    uint32_t hi = uint32_t(value >> 32);
    std::memcpy(text_bytes.data() + text_off + 4, &lo, 4);
    std::memcpy(text_bytes.data() + text_off + 12, &hi, 4);
  };
  auto read_lddw_imm = [&](uint64_t text_off) -> uint64_t {
    uint32_t lo, hi;
    std::memcpy(&lo, text_bytes.data() + text_off + 4, 4);
    std::memcpy(&hi, text_bytes.data() + text_off + 12, 4);
    return (uint64_t(hi) << 32) | lo;
  };

  for (const SectionView& rs : rels) {
    size_t n = rs.hdr->sh_size / sizeof(Elf64_Rel);
    const Elf64_Rel* entries =
        checked_ptr<Elf64_Rel>(elf_bytes, rs.hdr->sh_offset, n);
    for (size_t i = 0; i < n; ++i) {
      const Elf64_Rel& r = entries[i];
      uint32_t type = ELF64_R_TYPE(r.r_info);
      uint32_t symidx = ELF64_R_SYM(r.r_info);
      switch (type) {
        case kRelocLddw: {
          if (symidx >= dsyms.size())
            throw RelocationError(r.r_offset, "relocation symbol out of range");
          if (!in_text(r.r_offset))
            throw RelocationError(r.r_offset, "lddw relocation outside .text");
          uint64_t off = r.r_offset - image.text_vaddr;
          uint64_t value = dsyms[symidx].st_value + read_lddw_imm(off);
          if (value < kTextBase) value += kTextBase;
          patch_lddw(off, value);
          break;
        }
        case kRelocRelative: {
          if (!in_text(r.r_offset)) break;  // rodata-internal, preadjusted
          uint64_t off = r.r_offset - image.text_vaddr;
          uint64_t value = read_lddw_imm(off);
          if (value < kTextBase) value += kTextBase;
          patch_lddw(off, value);
          break;
        }
        case kRelocCall: {
          if (symidx >= dsyms.size())
            throw RelocationError(r.r_offset, "relocation symbol out of range");
          if (!in_text(r.r_offset))
            throw RelocationError(r.r_offset, "call relocation outside .text");
          uint64_t off = r.r_offset - image.text_vaddr;
          const Elf64_Sym& sym = dsyms[symidx];
          std::string name = sym_string(dynstr, sym.st_name);
          if (sym.st_shndx == SHN_UNDEF) {
            image.syscalls[off] = name;
          } else {
            // internal call: patch imm with the slot-relative target
            uint64_t target_off = sym.st_value - image.text_vaddr;
            int32_t imm =
                int32_t((int64_t(target_off) - int64_t(off) - 8) / 8);
            std::memcpy(text_bytes.data() + off + 4, &imm, 4);
            image.function_starts.insert(target_off);
          }
          break;
        }
        default:
          throw RelocationError(r.r_offset, "unknown relocation type " +
                                                std::to_string(type));
      }
    }
  }

  // decode
  for (uint64_t off = 0; off < text_bytes.size();) {
    const uint8_t* slot = text_bytes.data() + off;
    const uint8_t* next = nullptr;
    if (slot[0] == kOpLddw) {
      if (off + 16 > text_bytes.size())
        throw LoadError("wide load-immediate truncated at end of .text");
      next = slot + 8;
    }
    Instruction insn;
    try {
      insn = decode(slot, next, off, dialect);
    } catch (const DecodeError& e) {
      throw LoadError("illegal instruction at text offset " +
                      std::to_string(e.address) + ": " + e.what());
    }
    image.by_address[off] = image.instructions.size();
    image.instructions.push_back(insn);
    off += insn.size();
  }

  // entry point
  if (ehdr.e_entry < image.text_vaddr ||
      ehdr.e_entry >= image.text_vaddr + text_bytes.size())
    throw LoadError("entry point outside .text");
  image.entry = ehdr.e_entry - image.text_vaddr;
  image.function_starts.insert(image.entry);

  // function starts: symbols and call-target immediates
  auto add_func_syms = [&](const SectionView& syms, const SectionView& strs) {
    if (!syms.hdr) return;
    size_t n = syms.hdr->sh_size / sizeof(Elf64_Sym);
    const Elf64_Sym* p =
        checked_ptr<Elf64_Sym>(elf_bytes, syms.hdr->sh_offset, n);
    for (size_t i = 1; i < n; ++i) {
      if (ELF64_ST_TYPE(p[i].st_info) != STT_FUNC) continue;
      if (p[i].st_shndx == SHN_UNDEF) continue;
      uint64_t v = p[i].st_value;
      if (in_text(v)) image.function_starts.insert(v - image.text_vaddr);
      (void)strs;
    }
  };
  add_func_syms(dynsym, dynstr);
  add_func_syms(symtab, strtab);
  for (const Instruction& insn : image.instructions) {
    if (insn.opcode == kOpCall && !image.is_syscall_site(insn.address)) {
      uint64_t target = image.call_target(insn);
      if (target >= text_bytes.size())
        throw LoadError("call target outside .text at offset " +
                        std::to_string(insn.address));
      image.function_starts.insert(target);
    }
  }
  return image;
}

std::string dump_program(const ProgramImage& image) {
  std::string out;
  for (const Instruction& insn : image.instructions) {
    if (auto name = image.syscall_name(insn.address)) {
      char buf[96];
      snprintf(buf, sizeof buf, "%llx: syscall %s",
               (unsigned long long)insn.address, name->c_str());
      out += buf;
    } else {
      out += disassemble_line(insn);
    }
    out += '\n';
  }
  return out;
}

}  // namespace solscan::sbpf
