#include "doctest.h"
#include "solscan/asmbuilder.hpp"
#include "solscan/cfg.hpp"
#include "solscan/isa.hpp"
#include "solscan/marks.hpp"
#include "solscan/program.hpp"

#include <random>

using namespace solscan::sbpf;

namespace {

std::vector<uint8_t> legal_opcodes() {
  std::vector<uint8_t> out;
  for (int op = 0; op < 256; ++op)
    if (opcode_legal(uint8_t(op))) out.push_back(uint8_t(op));
  return out;
}

ProgramImage load(AsmBuilder& b) { return load_program(b.finalize()); }

}  // namespace

TEST_CASE("encode-decode identity over random legal instructions") {
  auto ops = legal_opcodes();
  REQUIRE(!ops.empty());
  std::mt19937_64 rng(0x5eed);
  int rounds = 0;
  for (int i = 0; i < 120000; ++i, ++rounds) {
    uint8_t opcode = ops[rng() % ops.size()];
    std::vector<uint8_t> bytes(opcode == kOpLddw ? 16 : 8, 0);
    bytes[0] = opcode;
    bytes[1] = uint8_t((rng() % 11) | ((rng() % 11) << 4));
    for (int k = 2; k < 8; ++k) bytes[k] = uint8_t(rng());
    if (opcode == kOpLddw)
      for (int k = 12; k < 16; ++k) bytes[k] = uint8_t(rng());
    uint64_t addr = (rng() % 1000) * 8;
    Instruction insn = decode(bytes.data(),
                              opcode == kOpLddw ? bytes.data() + 8 : nullptr,
                              addr);
    std::vector<uint8_t> back = encode(insn);
    CHECK(back == bytes);
    Instruction again = decode(back.data(),
                               opcode == kOpLddw ? back.data() + 8 : nullptr,
                               addr);
    CHECK(again.opcode == insn.opcode);
    CHECK(again.dst == insn.dst);
    CHECK(again.src == insn.src);
    CHECK(again.offset == insn.offset);
    CHECK(again.imm == insn.imm);
  }
  CHECK(rounds >= 100000);
}

TEST_CASE("decoder rejects malformed slots") {
  uint8_t bytes[8] = {};
  CHECK_THROWS_AS(decode(bytes, nullptr, 0), DecodeError);  // reserved 0x00
  uint8_t bad_reg[8] = {0xb7, 11, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decode(bad_reg, nullptr, 0), DecodeError);
  uint8_t wide[8] = {0x18, 1, 0, 0, 0x44, 0x33, 0x22, 0x11};
  CHECK_THROWS_AS(decode(wide, nullptr, 0), DecodeError);  // missing slot 2
  uint8_t second[8] = {0x01, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decode(wide, second, 0), DecodeError);  // nonzero opcode
}

TEST_CASE("lddw merges both immediate slots") {
  uint8_t bytes[16] = {0x18, 2, 0, 0, 0xef, 0xbe, 0xad, 0xde,
                       0,    0, 0, 0, 0x78, 0x56, 0x34, 0x12};
  Instruction insn = decode(bytes, bytes + 8, 64);
  CHECK(insn.imm == int64_t(0x12345678deadbeefull));
  CHECK(insn.size() == 16);
  CHECK(insn.next_address() == 80);
}

TEST_CASE("loader handles a minimal program") {
  AsmBuilder b;
  b.function("entrypoint");
  b.exit();
  ProgramImage img = load(b);
  REQUIRE(img.instructions.size() == 1);
  CHECK(img.instructions[0].opcode == kOpExit);
  CHECK(img.entry == 0);
  CHECK(img.function_starts.count(0) == 1);
}

TEST_CASE("loader resolves syscalls and internal calls") {
  AsmBuilder b;
  b.function("entrypoint");
  b.call("helper");
  b.syscall("sol_log_");
  b.exit();
  b.function("helper");
  b.mov64_imm(0, 0);
  b.exit();
  ProgramImage img = load(b);
  uint64_t helper_off = b.label_offset("helper");
  CHECK(img.syscall_name(8) == std::optional<std::string>("sol_log_"));
  CHECK(!img.is_syscall_site(0));
  const Instruction* call_insn = img.at(0);
  REQUIRE(call_insn != nullptr);
  CHECK(img.call_target(*call_insn) == helper_off);
  CHECK(img.function_starts.count(helper_off) == 1);
}

TEST_CASE("loader relocates rodata references") {
  AsmBuilder b;
  uint64_t off = b.rodata({'h', 'i', 0});
  b.function("entrypoint");
  b.lddw_rodata(1, off);
  b.exit();
  ProgramImage img = load(b);
  const Instruction* lddw_insn = img.at(0);
  REQUIRE(lddw_insn != nullptr);
  REQUIRE(img.rodata_base != 0);
  CHECK(uint64_t(lddw_insn->imm) == img.rodata_base + off);
  CHECK(img.rodata_base >= kTextBase);  // placed in the VM's mapped range
  REQUIRE(img.rodata.size() >= 3);  // builder pads the section to 8 bytes
  CHECK(img.rodata[off + 0] == 'h');
  CHECK(img.rodata[off + 1] == 'i');
}

TEST_CASE("cfg of straight-line code is one block") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_imm(0, 1);
  b.add64_imm(0, 2);
  b.exit();
  Cfg cfg = build_cfg(load(b));
  REQUIRE(cfg.blocks.size() == 1);
  CHECK(cfg.blocks[0].succs.empty());
  CHECK(cfg.functions.size() == 1);
}

TEST_CASE("cfg gives a conditional both successors") {
  AsmBuilder b;
  b.function("entrypoint");
  b.jeq_imm(1, 0, "zero");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("zero");
  b.mov64_imm(0, 0);
  b.exit();
  Cfg cfg = build_cfg(load(b));
  uint32_t head = cfg.block_by_start.at(0);
  REQUIRE(cfg.blocks[head].succs.size() == 2);
  std::set<EdgeKind> kinds;
  for (const Edge& e : cfg.blocks[head].succs) kinds.insert(e.kind);
  CHECK(kinds == std::set<EdgeKind>{EdgeKind::FallThrough,
                                    EdgeKind::BranchTaken});
}

TEST_CASE("cfg finds a counted loop") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_imm(2, 0);
  b.label("loop");
  b.add64_imm(2, 1);
  b.jlt_imm(2, 10, "loop");
  b.exit();
  Cfg cfg = build_cfg(load(b));
  REQUIRE(cfg.functions.size() == 1);
  REQUIRE(cfg.functions[0].loops.size() == 1);
  const Loop& loop = cfg.functions[0].loops[0];
  CHECK(cfg.blocks[loop.header].start == b.label_offset("loop"));
  CHECK(loop.body.size() == 1);
}

namespace {

// account-iteration loop scanning for the 0xff duplicate marker
void emit_marker_loop(AsmBuilder& b, const std::string& tag) {
  b.label(tag + "_head");
  b.ldxb(2, 6, 0);
  b.jne_imm(2, 0xff, tag + "_done");
  b.add64_imm(6, 1);
  b.ja(tag + "_head");
  b.label(tag + "_done");
}

}  // namespace

TEST_CASE("merge point found for a single marker loop") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(6, 1);
  emit_marker_loop(b, "scan");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  auto mp = find_deserialization_merge_point(img, cfg);
  REQUIRE(mp.has_value());
  CHECK(*mp == b.label_offset("scan_head"));
}

TEST_CASE("merge point found through a callee") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(6, 1);
  b.call("deser");
  b.exit();
  b.function("deser");
  emit_marker_loop(b, "scan");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  auto mp = find_deserialization_merge_point(img, cfg);
  REQUIRE(mp.has_value());
  CHECK(*mp == b.label_offset("scan_head"));
}

TEST_CASE("merge point absent without a marker comparison") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(6, 1);
  b.label("head");
  b.ldxb(2, 6, 0);
  b.jne_imm(2, 0, "done");
  b.add64_imm(6, 1);
  b.ja("head");
  b.label("done");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(!find_deserialization_merge_point(img, cfg).has_value());
}

TEST_CASE("merge point absent when two loops qualify") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(6, 1);
  emit_marker_loop(b, "first");
  emit_marker_loop(b, "second");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(!find_deserialization_merge_point(img, cfg).has_value());
}

TEST_CASE("merge point ignores marker loops beyond the call depth") {
  AsmBuilder b;
  b.function("entrypoint");
  b.call("l1");
  b.exit();
  b.function("l1");
  b.call("l2");
  b.exit();
  b.function("l2");
  b.call("l3");
  b.exit();
  b.function("l3");
  b.call("l4");
  b.exit();
  b.function("l4");
  b.mov64_reg(6, 1);
  emit_marker_loop(b, "scan");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(!find_deserialization_merge_point(img, cfg).has_value());
  CHECK(find_deserialization_merge_point(img, cfg, 4).has_value());
}

TEST_CASE("dispatch leaves of a three-way tag chain") {
  AsmBuilder b;
  b.function("entrypoint");
  b.ldxb(2, 1, 0);
  b.jeq_imm(2, 0, "h0");
  b.jeq_imm(2, 1, "h1");
  b.jeq_imm(2, 2, "h2");
  b.label("fallback");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("h0");
  b.mov64_imm(0, 10);
  b.exit();
  b.label("h1");
  b.mov64_imm(0, 11);
  b.exit();
  b.label("h2");
  b.mov64_imm(0, 12);
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  std::set<uint64_t> expected = {
      b.label_offset("h0"), b.label_offset("h1"), b.label_offset("h2"),
      b.label_offset("fallback")};
  CHECK(find_dispatch_leaves(img, cfg) == expected);
}

TEST_CASE("dispatch leaves of a nested two-level tree") {
  AsmBuilder b;
  b.function("entrypoint");
  b.ldxb(2, 1, 0);
  b.ldxb(3, 1, 1);
  b.jeq_imm(2, 0, "left");
  b.jeq_imm(3, 0, "h2");
  b.label("h3");
  b.mov64_imm(0, 3);
  b.exit();
  b.label("left");
  b.jeq_imm(3, 0, "h0");
  b.label("h1");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("h0");
  b.mov64_imm(0, 0);
  b.exit();
  b.label("h2");
  b.mov64_imm(0, 2);
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  std::set<uint64_t> expected = {b.label_offset("h0"), b.label_offset("h1"),
                                 b.label_offset("h2"), b.label_offset("h3")};
  CHECK(find_dispatch_leaves(img, cfg) == expected);
}

TEST_CASE("no dispatch leaves without a comparison tree") {
  AsmBuilder b;
  b.function("entrypoint");
  b.ldxb(2, 1, 0);
  b.jeq_imm(2, 0, "h0");  // a lone comparison is not a tree
  b.mov64_imm(0, 1);
  b.exit();
  b.label("h0");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_dispatch_leaves(img, cfg).empty());
}

TEST_CASE("dispatch ignores comparisons inside loops") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(6, 1);
  b.label("head");
  b.ldxb(2, 6, 0);
  b.jeq_imm(2, 1, "out");
  b.add64_imm(6, 1);
  b.jne_imm(2, 9, "head");
  b.label("out");
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_dispatch_leaves(img, cfg).empty());
}

TEST_CASE("cpi call sites are collected") {
  AsmBuilder b;
  b.function("entrypoint");
  b.syscall("sol_log_");
  b.syscall("sol_invoke_signed_c");
  b.exit();
  ProgramImage img = load(b);
  CHECK(find_cpi_sites(img) == std::set<uint64_t>{8});
}

namespace {

// decimal formatter stub: writes one digit of r2 into [r1], returns length
void emit_format_fn(AsmBuilder& b) {
  b.function("fmt");
  b.mov64_reg(0, 2);
  b.mod64_imm(0, 10);
  b.add64_imm(0, 48);
  b.stxb(1, 0, 0);
  b.mov64_imm(0, 1);
  b.exit();
}

}  // namespace

TEST_CASE("format call whose result is only logged is skippable") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(1, 10);  // stack buffer
  b.mov64_reg(2, 1);
  b.label("site");
  b.call("fmt");
  b.mov64_reg(2, 0);  // length
  b.mov64_reg(1, 10);
  b.syscall("sol_log_");
  b.exit();
  emit_format_fn(b);
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_format_skip_sites(img, cfg) ==
        std::set<uint64_t>{b.label_offset("site")});
}

TEST_CASE("format call is kept when its result steers a branch") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(1, 10);
  b.mov64_reg(2, 1);
  b.call("fmt");
  b.jeq_imm(0, 0, "empty");
  b.mov64_reg(1, 10);
  b.mov64_reg(2, 0);
  b.syscall("sol_log_");
  b.label("empty");
  b.exit();
  emit_format_fn(b);
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_format_skip_sites(img, cfg).empty());
}

TEST_CASE("format call is kept when its result is stored") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(1, 10);
  b.mov64_reg(2, 1);
  b.call("fmt");
  b.stxdw(6, 0, 0);  // result escapes into account memory
  b.exit();
  emit_format_fn(b);
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_format_skip_sites(img, cfg).empty());
}

TEST_CASE("non-format callees are never skip sites") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(1, 10);
  b.call("helper");
  b.exit();
  b.function("helper");
  b.mov64_imm(0, 0);
  b.exit();
  ProgramImage img = load(b);
  Cfg cfg = build_cfg(img);
  CHECK(find_format_skip_sites(img, cfg).empty());
}

TEST_CASE("disassembly renders one line per instruction") {
  AsmBuilder b;
  b.function("entrypoint");
  b.mov64_imm(0, 7);
  b.exit();
  ProgramImage img = load(b);
  CHECK(disassemble_line(img.instructions[0]) == "0: mov r0, 7");
  CHECK(disassemble_line(img.instructions[1]) == "8: exit");
}
