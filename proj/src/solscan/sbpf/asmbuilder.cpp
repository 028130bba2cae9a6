#include "solscan/asmbuilder.hpp"

#include <elf.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace solscan::sbpf {

void AsmBuilder::label(const std::string& name) {
  if (!labels_.emplace(name, text_.size()).second)
    throw std::logic_error("duplicate label: " + name);
}

void AsmBuilder::function(const std::string& name) {
  label(name);
  functions_.push_back(name);
}

void AsmBuilder::raw(uint8_t opcode, Reg dst, Reg src, int16_t off,
                     int32_t imm) {
  uint8_t slot[8];
  slot[0] = opcode;
  slot[1] = uint8_t(dst | (src << 4));
  std::memcpy(slot + 2, &off, 2);
  std::memcpy(slot + 4, &imm, 4);
  text_.insert(text_.end(), slot, slot + 8);
}

void AsmBuilder::lddw(Reg dst, uint64_t imm) {
  raw(kOpLddw, dst, 0, 0, int32_t(uint32_t(imm)));
  raw(0, 0, 0, 0, int32_t(uint32_t(imm >> 32)));
}

void AsmBuilder::lddw_rodata(Reg dst, uint64_t rodata_off) {
  rodata_refs_.push_back({text_.size(), rodata_off});
  // addend (the rodata offset) rides in the imm field pre-relocation
  raw(kOpLddw, dst, 0, 0, int32_t(uint32_t(rodata_off)));
  raw(0, 0, 0, 0, int32_t(uint32_t(rodata_off >> 32)));
}

void AsmBuilder::ja(const std::string& target) {
  jump_fixups_.push_back({text_.size(), target});
  raw(kOpJa, 0, 0, 0, 0);
}

void AsmBuilder::jcond(uint8_t opcode, Reg dst, Reg src, int32_t imm,
                       const std::string& target) {
  jump_fixups_.push_back({text_.size(), target});
  raw(opcode, dst, src, 0, imm);
}

void AsmBuilder::call(const std::string& function_label) {
  call_sites_.push_back({text_.size(), function_label, false});
  raw(kOpCall, 0, 1, 0, -1);
}

void AsmBuilder::syscall(const std::string& name) {
  call_sites_.push_back({text_.size(), name, true});
  raw(kOpCall, 0, 0, 0, -1);
}

uint64_t AsmBuilder::rodata(const std::vector<uint8_t>& bytes) {
  uint64_t off = rodata_.size();
  rodata_.insert(rodata_.end(), bytes.begin(), bytes.end());
  while (rodata_.size() % 8) rodata_.push_back(0);
  return off;
}

uint64_t AsmBuilder::label_offset(const std::string& name) const {
  auto it = labels_.find(name);
  if (it == labels_.end()) throw std::logic_error("unknown label: " + name);
  return it->second;
}

std::vector<uint8_t> AsmBuilder::finalize(const std::string& entry_label) {
  constexpr uint64_t kTextVaddr = 0x1000;
  constexpr uint64_t kRodataVaddr = 0x10'0000;

  // resolve jumps
  for (const Fixup& f : jump_fixups_) {
    uint64_t target = label_offset(f.label);
    int64_t delta = (int64_t(target) - int64_t(f.insn_off) - 8) / 8;
    if (delta < INT16_MIN || delta > INT16_MAX)
      throw std::logic_error("jump displacement overflow to " + f.label);
    int16_t off = int16_t(delta);
    std::memcpy(text_.data() + f.insn_off + 2, &off, 2);
  }

  // collect call targets as functions
  std::vector<std::string> funcs = functions_;
  if (std::find(funcs.begin(), funcs.end(), entry_label) == funcs.end())
    funcs.push_back(entry_label);
  for (const CallSite& c : call_sites_) {
    if (c.is_syscall) continue;
    if (std::find(funcs.begin(), funcs.end(), c.name) == funcs.end())
      funcs.push_back(c.name);
  }
  std::vector<std::string> syscall_names;
  for (const CallSite& c : call_sites_) {
    if (!c.is_syscall) continue;
    if (std::find(syscall_names.begin(), syscall_names.end(), c.name) ==
        syscall_names.end())
      syscall_names.push_back(c.name);
  }

  // .dynstr
  std::vector<uint8_t> dynstr{0};
  auto add_str = [&dynstr](const std::string& s) {
    uint32_t off = uint32_t(dynstr.size());
    dynstr.insert(dynstr.end(), s.begin(), s.end());
    dynstr.push_back(0);
    return off;
  };

  // .dynsym: null, syscalls (undef), functions, rodata section symbol
  constexpr size_t kTextShndx = 1;
  constexpr size_t kRodataShndx = 2;
  std::vector<Elf64_Sym> syms(1);
  std::memset(syms.data(), 0, sizeof(Elf64_Sym));
  std::map<std::string, uint32_t> sym_index;
  for (const std::string& s : syscall_names) {
    Elf64_Sym sym{};
    sym.st_name = add_str(s);
    sym.st_info = ELF64_ST_INFO(STB_GLOBAL, STT_NOTYPE);
    sym.st_shndx = SHN_UNDEF;
    sym_index[s] = uint32_t(syms.size());
    syms.push_back(sym);
  }
  for (const std::string& f : funcs) {
    Elf64_Sym sym{};
    sym.st_name = add_str(f);
    sym.st_info = ELF64_ST_INFO(STB_GLOBAL, STT_FUNC);
    sym.st_shndx = kTextShndx;
    sym.st_value = kTextVaddr + label_offset(f);
    sym_index[f] = uint32_t(syms.size());
    syms.push_back(sym);
  }
  uint32_t rodata_sym = 0;
  if (!rodata_refs_.empty()) {
    Elf64_Sym sym{};
    sym.st_name = add_str(".rodata");
    sym.st_info = ELF64_ST_INFO(STB_LOCAL, STT_SECTION);
    sym.st_shndx = kRodataShndx;
    sym.st_value = kRodataVaddr;
    rodata_sym = uint32_t(syms.size());
    syms.push_back(sym);
  }

  // relocations
  std::vector<Elf64_Rel> relocs;
  for (const CallSite& c : call_sites_) {
    Elf64_Rel r{};
    r.r_offset = kTextVaddr + c.insn_off;
    r.r_info = ELF64_R_INFO(sym_index.at(c.name), 10);  // R_BPF_64_32
    relocs.push_back(r);
  }
  for (const RodataRef& rr : rodata_refs_) {
    Elf64_Rel r{};
    r.r_offset = kTextVaddr + rr.insn_off;
    r.r_info = ELF64_R_INFO(rodata_sym, 1);  // R_BPF_64_64
    relocs.push_back(r);
  }

  // section bodies in file order
  const char shstrtab_src[] =
      "\0.text\0.rodata\0.dynstr\0.dynsym\0.rel.dyn\0.shstrtab";
  std::vector<uint8_t> shstrtab(shstrtab_src,
                                shstrtab_src + sizeof(shstrtab_src));
  auto name_off = [&](const char* s) -> uint32_t {
    size_t len = std::strlen(s);
    for (size_t i = 0; i + len < shstrtab.size(); ++i)
      if (std::memcmp(shstrtab.data() + i, s, len + 1) == 0)
        return uint32_t(i);
    throw std::logic_error("shstrtab miss");
  };

  struct Sec {
    const char* name;
    uint32_t type;
    uint64_t flags;
    uint64_t addr;
    const std::vector<uint8_t>* body;
    uint64_t entsize;
    uint32_t link;
    uint64_t align;
  };
  std::vector<uint8_t> dynsym_bytes(syms.size() * sizeof(Elf64_Sym));
  std::memcpy(dynsym_bytes.data(), syms.data(), dynsym_bytes.size());
  std::vector<uint8_t> rel_bytes(relocs.size() * sizeof(Elf64_Rel));
  if (!relocs.empty())
    std::memcpy(rel_bytes.data(), relocs.data(), rel_bytes.size());

  std::vector<Sec> secs = {
      {".text", SHT_PROGBITS, SHF_ALLOC | SHF_EXECINSTR, kTextVaddr, &text_,
       0, 0, 8},
      {".rodata", SHT_PROGBITS, SHF_ALLOC, kRodataVaddr, &rodata_, 0, 0, 8},
      {".dynstr", SHT_STRTAB, SHF_ALLOC, 0, &dynstr, 0, 0, 1},
      {".dynsym", SHT_DYNSYM, SHF_ALLOC, 0, &dynsym_bytes,
       sizeof(Elf64_Sym), 3, 8},
      {".rel.dyn", SHT_REL, SHF_ALLOC, 0, &rel_bytes, sizeof(Elf64_Rel), 4,
       8},
      {".shstrtab", SHT_STRTAB, 0, 0, &shstrtab, 0, 0, 1},
  };

  std::vector<uint8_t> out(sizeof(Elf64_Ehdr), 0);
  std::vector<Elf64_Shdr> shdrs(1 + secs.size());
  std::memset(shdrs.data(), 0, sizeof(Elf64_Shdr));
  for (size_t i = 0; i < secs.size(); ++i) {
    while (out.size() % secs[i].align) out.push_back(0);
    Elf64_Shdr& sh = shdrs[i + 1];
    sh.sh_name = name_off(secs[i].name);
    sh.sh_type = secs[i].type;
    sh.sh_flags = secs[i].flags;
    sh.sh_addr = secs[i].addr;
    sh.sh_offset = out.size();
    sh.sh_size = secs[i].body->size();
    sh.sh_entsize = secs[i].entsize;
    sh.sh_link = secs[i].link;
    sh.sh_info = secs[i].type == SHT_DYNSYM ? 1 : 0;
    sh.sh_addralign = secs[i].align;
    out.insert(out.end(), secs[i].body->begin(), secs[i].body->end());
  }
  while (out.size() % 8) out.push_back(0);
  uint64_t shoff = out.size();
  out.resize(out.size() + shdrs.size() * sizeof(Elf64_Shdr));
  std::memcpy(out.data() + shoff, shdrs.data(),
              shdrs.size() * sizeof(Elf64_Shdr));

  Elf64_Ehdr ehdr{};
  std::memcpy(ehdr.e_ident, ELFMAG, SELFMAG);
  ehdr.e_ident[EI_CLASS] = ELFCLASS64;
  ehdr.e_ident[EI_DATA] = ELFDATA2LSB;
  ehdr.e_ident[EI_VERSION] = EV_CURRENT;
  ehdr.e_type = ET_DYN;
  ehdr.e_machine = 247;  // EM_BPF
  ehdr.e_version = EV_CURRENT;
  ehdr.e_entry = kTextVaddr + label_offset(entry_label);
  ehdr.e_shoff = shoff;
  ehdr.e_ehsize = sizeof(Elf64_Ehdr);
  ehdr.e_shentsize = sizeof(Elf64_Shdr);
  ehdr.e_shnum = uint16_t(shdrs.size());
  ehdr.e_shstrndx = uint16_t(shdrs.size() - 1);
  std::memcpy(out.data(), &ehdr, sizeof ehdr);
  return out;
}

}  // namespace solscan::sbpf
