#include "doctest.h"
#include "solscan/asmbuilder.hpp"
#include "solscan/concrete.hpp"
#include "solscan/input.hpp"
#include "solscan/machine.hpp"

using namespace solscan;
using sym::ExprArena;
using sym::ExprRef;
using sym::Machine;
using sym::Region;
using sym::Solver;
using sym::Status;
using sym::SymState;
using vm::AccountField;
using vm::CheckKind;
using vm::InputLayout;

namespace {

struct Harness {
  ExprArena arena;
  Solver solver{arena};
  sbpf::ProgramImage image;
  vm::TxContext ctx;
  std::unique_ptr<Machine> machine;
  SymState entry;

  Harness(sbpf::AsmBuilder& b, uint32_t n_accounts = 2,
          uint32_t max_data = 16) {
    image = sbpf::load_program(b.finalize());
    ctx = vm::build_input(arena, n_accounts, max_data);
    machine = std::make_unique<Machine>(arena, solver, image, ctx.layout);
    entry = vm::make_entry_state(arena, image, ctx);
  }
};

std::vector<SymState> run_all(Machine& m, SymState s0,
                              size_t step_limit = 20000) {
  std::vector<SymState> done, work;
  work.push_back(std::move(s0));
  size_t steps = 0;
  while (!work.empty()) {
    REQUIRE(steps++ < step_limit);
    SymState s = std::move(work.back());
    work.pop_back();
    if (!s.active()) {
      done.push_back(std::move(s));
      continue;
    }
    for (SymState& n : m.step(std::move(s))) work.push_back(std::move(n));
  }
  return done;
}

const SymState& graceful(const std::vector<SymState>& done) {
  for (const SymState& s : done)
    if (s.status == Status::Exited) return s;
  REQUIRE(false);
  return done.front();
}

}  // namespace

TEST_CASE("input layout fixed offsets") {
  InputLayout ly{2, 16};
  CHECK(ly.account_footprint() == 10352);
  CHECK(ly.account_base(0) == 8);
  CHECK(ly.account_base(1) == 10360);
  CHECK(ly.instr_len_offset() == 20712);
  CHECK(ly.total_size() == 20712 + 8 + 16 + 32);

  CHECK(ly.locate(8).field == AccountField::Marker);
  CHECK(ly.locate(9).field == AccountField::Signer);
  CHECK(ly.locate(16).field == AccountField::Key);
  CHECK(ly.locate(16).byte == 0);
  CHECK(ly.locate(48 + 5).field == AccountField::Owner);
  CHECK(ly.locate(80).field == AccountField::Lamports);
  CHECK(ly.locate(88).field == AccountField::DataLen);
  CHECK(ly.locate(96).field == AccountField::Data);
  CHECK(ly.locate(10360).account == 1);
  CHECK(ly.locate(10360).field == AccountField::Marker);
  CHECK(ly.locate(ly.account_base(1) - 8).field == AccountField::RentEpoch);

  // the default scanner configuration still fits the input region
  InputLayout big{10, 1024};
  CHECK(big.account_footprint() == 11360);
  CHECK(big.total_size() < sbpf::kHeapBase - sbpf::kInputBase);
}

TEST_CASE("serialized entry region: marker, count, program id") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.exit();
  Harness h(b);
  const sym::MemRegion& input = h.entry.region(Region::Input);
  auto byte = [&](uint64_t off) {
    return h.arena.const_value(input.load_byte(h.arena, off));
  };
  CHECK(byte(0) == 2);     // account count, LE
  CHECK(byte(1) == 0);
  CHECK(byte(8) == 0xff);  // marker of account 0
  CHECK(byte(10360) == 0xff);
  CHECK(input.load_byte(h.arena, 9) == h.ctx.accounts[0].signer);
  CHECK(byte(h.ctx.layout.program_id_offset()) == 0xc0);
}

TEST_CASE("serialize_input is deterministic and layout-stable") {
  ExprArena a1, a2;
  vm::TxContext c1 = vm::build_input(a1, 2, 16);
  vm::TxContext c2 = vm::build_input(a2, 2, 16);
  std::vector<uint64_t> asg1(a1.var_count(), 0), asg2(a2.var_count(), 0);
  asg1[a1.node(c1.accounts[0].lamports).a] = 12345;
  asg2[a2.node(c2.accounts[0].lamports).a] = 12345;
  auto b1 = vm::serialize_input(a1, c1, asg1);
  auto b2 = vm::serialize_input(a2, c2, asg2);
  CHECK(b1 == b2);
  CHECK(b1.size() == c1.layout.total_size());
  CHECK(b1[8] == 0xff);
  uint64_t lam = 0;
  for (int i = 0; i < 8; ++i) lam |= uint64_t(b1[80 + i]) << (8 * i);
  CHECK(lam == 12345);
}

TEST_CASE("branch on owner bytes marks owner-compared") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxdw(2, 1, 48);  // account 0 owner bytes 0-7
  b.jeq_imm(2, 0x51, "ok");
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(s.ledger.has_check(0, CheckKind::OwnerCompared));
  CHECK((s.ledger.read_flags[0] & vm::kReadOwner) != 0);
  CHECK(!s.ledger.has_check(1, CheckKind::OwnerCompared));
}

TEST_CASE("key compared to a constant marks key-vs-constant") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxdw(2, 1, 16);  // account 0 key bytes 0-7
  b.jeq_imm(2, 0x7777, "ok");
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(s.ledger.has_check(0, CheckKind::KeyVsConstant));
}

TEST_CASE("key against unchecked account data is only a note") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxdw(2, 1, 16);             // account 0 key
  b.ldxdw(3, 1, int16_t(10448));  // account 1 data, never owner-checked
  b.jeq_reg(2, 3, "ok");
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(!s.ledger.has_check(0, CheckKind::KeyVsConstant));
  REQUIRE(!s.ledger.notes.empty());
  CHECK(s.ledger.notes[0].find("weak key check") != std::string::npos);
}

TEST_CASE("key against owner-checked account data is a real check") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxdw(4, 1, int16_t(10400));  // account 1 owner
  b.jne_imm(4, 0x51, "bad");
  b.ldxdw(2, 1, 16);              // account 0 key
  b.ldxdw(3, 1, int16_t(10448));  // account 1 data, now trusted
  b.jeq_reg(2, 3, "ok");
  b.label("bad");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  bool found = false;
  for (const SymState& s : done)
    if (s.ledger.has_check(0, CheckKind::KeyVsConstant)) found = true;
  CHECK(found);
}

TEST_CASE("data stores mark data-written and record a critical action") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.stb(1, 96, 7);  // account 0 data byte 0
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(s.ledger.has_check(0, CheckKind::DataWritten));
  REQUIRE(s.actions.size() == 1);
  CHECK(s.actions[0].kind == vm::CriticalAction::Kind::AccountWrite);
  CHECK(s.actions[0].account == 0);
  CHECK(s.actions[0].field == AccountField::Data);
  CHECK(s.actions[0].site == 0);
}

TEST_CASE("lamport stores are critical actions but not trust marks") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.stdw(1, 80, 0);  // zero account 0 lamports
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(!s.ledger.has_check(0, CheckKind::DataWritten));
  REQUIRE(s.actions.size() == 1);
  CHECK(s.actions[0].field == AccountField::Lamports);
}

TEST_CASE("branching on the signer byte is recorded") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxb(2, 1, 9);
  b.jne_imm(2, 0, "ok");
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(s.ledger.signer_seen[0] == 1);
  CHECK(s.ledger.signer_seen[1] == 0);
}

namespace {

// CPI through the C ABI: target = account 1 key, hands account 0 writable
sbpf::AsmBuilder cpi_program() {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.lddw(2, sbpf::kInputBase + 10360 + 8);  // &account1.key
  b.stxdw(10, -64, 2);                      // instruction.program_id
  b.lddw(3, sbpf::kInputBase + 8 + 8);      // &account0.key
  b.stxdw(10, -128, 3);                     // meta0.pubkey
  b.stb(10, -120, 1);                       // meta0.is_writable
  b.stb(10, -119, 0);                       // meta0.is_signer
  b.mov64_reg(4, 10);
  b.add64_imm(4, -128);
  b.stxdw(10, -56, 4);  // instruction.accounts
  b.stdw(10, -48, 1);   // instruction.account_len
  b.stdw(10, -40, 0);   // instruction.data
  b.stdw(10, -32, 0);   // instruction.data_len
  b.mov64_reg(1, 10);
  b.add64_imm(1, -64);
  b.label("site");
  b.syscall("sol_invoke_signed_c");
  b.mov64_imm(0, 0);
  b.exit();
  return b;
}

}  // namespace

TEST_CASE("cpi records the target key and havocs handed writable accounts") {
  sbpf::AsmBuilder b = cpi_program();
  uint64_t site = b.label_offset("site");
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  REQUIRE(s.actions.size() == 1);
  const vm::CriticalAction& act = s.actions[0];
  CHECK(act.kind == vm::CriticalAction::Kind::Cpi);
  CHECK(act.site == site);
  CHECK(act.handed_accounts == std::vector<uint32_t>{0});
  REQUIRE(act.target_key.size() == 32);
  CHECK(act.target_key[0] == h.ctx.accounts[1].key[0]);
  CHECK(act.target_key[31] == h.ctx.accounts[1].key[31]);

  // handed writable account 0: data bytes replaced with fresh havoc vars
  const sym::MemRegion& input = s.region(Region::Input);
  ExprRef d0 = input.load_byte(h.arena, 96);
  CHECK(d0 != h.ctx.accounts[0].data[0]);
  REQUIRE(h.arena.node(d0).op == sym::Op::Var);
  CHECK(h.arena.var_info(h.arena.node(d0).a).field == sym::VarField::Havoc);
  // containment: account 1 bytes untouched
  CHECK(input.load_byte(h.arena, 10360 + 88) == h.ctx.accounts[1].data[0]);
}

TEST_CASE("pda equality against an account key marks pda-derived") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.mov64_reg(4, 10);
  b.add64_imm(4, -32);  // result buffer
  b.mov64_imm(1, 0);
  b.mov64_imm(2, 0);
  b.mov64_imm(3, 0);
  b.syscall("sol_create_program_address");
  b.ldxdw(2, 10, -32);  // first 8 derived bytes
  b.lddw(5, sbpf::kInputBase + 16);
  b.ldxdw(3, 5, 0);  // account 0 key bytes 0-7
  b.jeq_reg(2, 3, "ok");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("ok");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  bool marked = false;
  for (const SymState& s : done)
    if (s.ledger.has_check(0, CheckKind::PdaDerived)) marked = true;
  CHECK(marked);
}

TEST_CASE("log syscalls succeed without ledger effects") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.mov64_imm(1, 0);
  b.mov64_imm(2, 0);
  b.syscall("sol_log_64_");
  b.mov64_reg(3, 0);  // r0 must be 0
  b.mov64_reg(0, 3);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  const SymState& s = graceful(done);
  CHECK(h.arena.const_value(s.regs[0]) == 0);
  CHECK(s.ledger.checks.empty());
  CHECK(s.actions.empty());
}

TEST_CASE("abort syscall ends the path") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.syscall("abort");
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  REQUIRE(done.size() == 1);
  CHECK(done[0].status == Status::Aborted);
}

TEST_CASE("memcmp writes a sign result consumed by branches") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.lddw(1, sbpf::kInputBase + 16);          // account 0 key
  b.lddw(2, sbpf::kInputBase + 10360 + 8);   // account 1 key
  b.mov64_imm(3, 32);
  b.mov64_reg(4, 10);
  b.add64_imm(4, -8);
  b.syscall("sol_memcmp_");
  b.ldxw(5, 10, -8);
  b.jeq_imm(5, 0, "equal");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("equal");
  b.mov64_imm(0, 0);
  b.exit();
  Harness h(b);
  auto done = run_all(*h.machine, h.entry);
  REQUIRE(done.size() == 2);  // both outcomes feasible
  for (const SymState& s : done) CHECK(s.status == Status::Exited);
}

TEST_CASE("concrete interpreter agrees instruction-for-instruction") {
  std::vector<sbpf::AsmBuilder> programs;
  {
    sbpf::AsmBuilder b;  // branches, arithmetic, calls, stack traffic
    b.function("entrypoint");
    b.ldxb(2, 1, 9);
    b.jne_imm(2, 0, "set");
    b.stb(10, -8, 0);
    b.ja("join");
    b.label("set");
    b.stb(10, -8, 1);
    b.label("join");
    b.ldxdw(3, 1, 80);  // lamports
    b.mov64_imm(4, 3);
    b.div64_reg(3, 4);
    b.call("helper");
    b.mov64_imm(1, 0);
    b.syscall("sol_log_");
    b.mov64_imm(0, 0);
    b.exit();
    b.function("helper");
    b.mov64_imm(6, 9);
    b.exit();
    programs.push_back(std::move(b));
  }
  {
    sbpf::AsmBuilder b;  // byte swaps, shifts, 32-bit ops
    b.function("entrypoint");
    b.ldxdw(2, 1, 16);
    b.raw(0xdc, 2, 0, 0, 64);  // be64
    b.lsh64_imm(2, 7);
    b.raw(0x04, 2, 0, 0, 12345);  // add32
    b.rsh64_imm(2, 3);
    b.stxdw(1, 96, 2);
    b.mov64_imm(0, 0);
    b.exit();
    programs.push_back(std::move(b));
  }
  for (sbpf::AsmBuilder& b : programs) {
    Harness h(b, 1, 16);
    auto model = h.machine->model(h.entry);
    REQUIRE(model.has_value());
    std::vector<uint8_t> bytes =
        vm::serialize_input(h.arena, h.ctx, *model);

    // symbolic engine over the concrete input
    SymState s = h.entry;
    auto init = std::make_shared<std::vector<ExprRef>>();
    for (uint8_t v : bytes) init->push_back(h.arena.constant(v, 8));
    s.region(Region::Input).init = init;
    s.constraints.clear();
    std::vector<uint64_t> sym_trace;
    size_t guard = 0;
    while (s.active()) {
      REQUIRE(guard++ < 10000);
      sym_trace.push_back(s.pc);
      auto next = h.machine->step(std::move(s));
      REQUIRE(next.size() == 1);  // fully concrete: never forks
      s = std::move(next[0]);
    }

    vm::ConcreteResult ref = vm::run_concrete(h.image, bytes);
    CHECK(sym_trace == ref.pc_trace);
    if (s.status == Status::Exited) {
      CHECK(ref.end == vm::ConcreteResult::End::Exited);
      CHECK(h.arena.const_value(s.regs[0]) == ref.r0);
    } else {
      CHECK(ref.end == vm::ConcreteResult::End::Aborted);
    }
  }
}

TEST_CASE("concrete replay reaches a recorded critical action site") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.ldxb(2, 1, 96);            // data byte steers the path
  b.jne_imm(2, 0x2a, "skip");
  b.label("write");
  b.stdw(1, 80, 0);            // lamport write: the critical action
  b.label("skip");
  b.mov64_imm(0, 0);
  b.exit();
  uint64_t site = b.label_offset("write");
  Harness h(b, 1, 16);
  auto done = run_all(*h.machine, h.entry);
  const SymState* with_action = nullptr;
  for (const SymState& s : done)
    if (!s.actions.empty() && s.status == Status::Exited) with_action = &s;
  REQUIRE(with_action != nullptr);
  CHECK(with_action->actions[0].site == site);

  REQUIRE(h.solver.check(with_action->constraints) == sym::SatVerdict::Yes);
  std::vector<uint64_t> asg = h.solver.model_assignment();
  asg.resize(h.arena.var_count(), 0);
  std::vector<uint8_t> bytes = vm::serialize_input(h.arena, h.ctx, asg);
  vm::ConcreteResult ref = vm::run_concrete(h.image, bytes);
  CHECK(ref.end == vm::ConcreteResult::End::Exited);
  CHECK(ref.reached(site));
}
