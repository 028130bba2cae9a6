#include "solscan/input.hpp"

#include <stdexcept>

namespace solscan::vm {

using sym::ExprArena;
using sym::ExprRef;
using sym::SymState;
using sym::VarField;

TxContext build_input(ExprArena& arena, uint32_t n_accounts,
                      uint32_t max_data) {
  if (n_accounts < 1) throw std::invalid_argument("need at least one account");
  TxContext ctx;
  ctx.layout = InputLayout{n_accounts, max_data};
  if (ctx.layout.total_size() > sbpf::kHeapBase - sbpf::kInputBase)
    throw std::invalid_argument("input region overflow");
  for (uint32_t b = 0; b < 32; ++b)
    ctx.program_id[b] = uint8_t(0xc0 + b);  // fixed analysis program id

  auto tag = [&](const char* field, uint32_t i, uint32_t b) {
    return std::string(field) + "_" + std::to_string(i) + "_" +
           std::to_string(b);
  };
  for (uint32_t i = 0; i < n_accounts; ++i) {
    AccountVars acc;
    acc.signer = arena.var(tag("signer", i, 0), 8, VarField::Signer, i);
    acc.writable = arena.var(tag("writable", i, 0), 8, VarField::Writable, i);
    acc.executable =
        arena.var(tag("executable", i, 0), 8, VarField::Executable, i);
    for (uint32_t b = 0; b < 32; ++b)
      acc.key.push_back(arena.var(tag("key", i, b), 8, VarField::Key, i, b));
    for (uint32_t b = 0; b < 32; ++b)
      acc.owner.push_back(
          arena.var(tag("owner", i, b), 8, VarField::Owner, i, b));
    acc.lamports = arena.var(tag("lamports", i, 0), 64, VarField::Lamports, i);
    acc.data_len = arena.var(tag("data_len", i, 0), 64, VarField::DataLen, i);
    for (uint32_t b = 0; b < max_data; ++b)
      acc.data.push_back(
          arena.var(tag("data", i, b), 8, VarField::Data, i, b));
    acc.len_pin = arena.eq(acc.data_len, arena.constant(max_data, 64));
    ctx.accounts.push_back(std::move(acc));
  }
  ctx.instr_len = arena.var("instr_len", 64, VarField::InstrDataLen);
  for (uint32_t b = 0; b < max_data; ++b)
    ctx.instr_data.push_back(
        arena.var(tag("instr", 0, b), 8, VarField::InstrData, -1, b));
  return ctx;
}

namespace {

std::shared_ptr<std::vector<ExprRef>> serialize_symbolic(ExprArena& arena,
                                                         const TxContext& ctx) {
  const InputLayout& ly = ctx.layout;
  auto bytes = std::make_shared<std::vector<ExprRef>>(
      ly.total_size(), arena.constant(0, 8));
  auto put64 = [&](uint64_t off, ExprRef v) {
    for (uint32_t b = 0; b < 8; ++b)
      (*bytes)[off + b] = arena.extract(v, 8 * b + 7, 8 * b);
  };
  put64(0, arena.constant(ly.n_accounts, 64));
  for (uint32_t i = 0; i < ly.n_accounts; ++i) {
    const AccountVars& acc = ctx.accounts[i];
    uint64_t base = ly.account_base(i);
    (*bytes)[base + InputLayout::kMarkerOff] = arena.constant(0xff, 8);
    (*bytes)[base + InputLayout::kSignerOff] = acc.signer;
    (*bytes)[base + InputLayout::kWritableOff] = acc.writable;
    (*bytes)[base + InputLayout::kExecutableOff] = acc.executable;
    for (uint32_t b = 0; b < 32; ++b) {
      (*bytes)[base + InputLayout::kKeyOff + b] = acc.key[b];
      (*bytes)[base + InputLayout::kOwnerOff + b] = acc.owner[b];
    }
    put64(base + InputLayout::kLamportsOff, acc.lamports);
    put64(base + InputLayout::kDataLenOff, acc.data_len);
    for (uint32_t b = 0; b < ly.max_data; ++b)
      (*bytes)[base + InputLayout::kDataOff + b] = acc.data[b];
  }
  put64(ly.instr_len_offset(), ctx.instr_len);
  for (uint32_t b = 0; b < ly.max_data; ++b)
    (*bytes)[ly.instr_data_offset() + b] = ctx.instr_data[b];
  for (uint32_t b = 0; b < 32; ++b)
    (*bytes)[ly.program_id_offset() + b] =
        arena.constant(ctx.program_id[b], 8);
  return bytes;
}

}  // namespace

SymState make_entry_state(ExprArena& arena, const sbpf::ProgramImage& image,
                          const TxContext& ctx) {
  using sym::MemRegion;
  using sym::Region;
  SymState state;
  state.pc = image.entry;
  state.ledger.init(ctx.layout.n_accounts);

  MemRegion stack{Region::Stack, sbpf::kStackBase,
                  sbpf::kStackFrameSize * sbpf::kStackFrameCount, true,
                  nullptr, {}};
  MemRegion heap{Region::Heap, sbpf::kHeapBase, sbpf::kHeapSize, true,
                 nullptr, {}};
  MemRegion input{Region::Input, sbpf::kInputBase, ctx.layout.total_size(),
                  true, serialize_symbolic(arena, ctx), {}};
  state.mem.push_back(stack);
  state.mem.push_back(heap);
  state.mem.push_back(input);
  if (!image.rodata.empty()) {
    auto ro = std::make_shared<std::vector<ExprRef>>();
    ro->reserve(image.rodata.size());
    for (uint8_t b : image.rodata) ro->push_back(arena.constant(b, 8));
    state.mem.push_back(MemRegion{Region::Rodata, image.rodata_base,
                                  image.rodata.size(), false, ro, {}});
  }

  for (int r = 0; r < 11; ++r) state.regs[r] = arena.constant(0, 64);
  state.regs[1] = arena.constant(sbpf::kInputBase, 64);
  state.regs[10] =
      arena.constant(sbpf::kStackBase + sbpf::kStackFrameSize, 64);

  // deserialization pins: fixed lengths until hybridization
  for (const AccountVars& acc : ctx.accounts)
    state.constraints.push_back(acc.len_pin);
  state.constraints.push_back(
      arena.ule(ctx.instr_len, arena.constant(ctx.layout.max_data, 64)));
  return state;
}

void hybridize_lengths(ExprArena& arena, SymState& state,
                       const TxContext& ctx) {
  for (const AccountVars& acc : ctx.accounts) {
    // idempotent: only relax lengths still carrying their pin
    if (std::erase(state.constraints, acc.len_pin) == 0) continue;
    state.constraints.push_back(
        arena.ule(acc.data_len, arena.constant(ctx.layout.max_data, 64)));
  }
}

std::vector<uint8_t> serialize_input(ExprArena& arena, const TxContext& ctx,
                                     const std::vector<uint64_t>& assignment) {
  const InputLayout& ly = ctx.layout;
  std::vector<uint8_t> bytes(ly.total_size(), 0);
  auto put64 = [&](uint64_t off, uint64_t v) {
    for (uint32_t b = 0; b < 8; ++b) bytes[off + b] = uint8_t(v >> (8 * b));
  };
  auto ev = [&](ExprRef e) { return arena.eval(e, assignment); };
  put64(0, ly.n_accounts);
  for (uint32_t i = 0; i < ly.n_accounts; ++i) {
    const AccountVars& acc = ctx.accounts[i];
    uint64_t base = ly.account_base(i);
    bytes[base + InputLayout::kMarkerOff] = 0xff;
    bytes[base + InputLayout::kSignerOff] = uint8_t(ev(acc.signer));
    bytes[base + InputLayout::kWritableOff] = uint8_t(ev(acc.writable));
    bytes[base + InputLayout::kExecutableOff] = uint8_t(ev(acc.executable));
    for (uint32_t b = 0; b < 32; ++b) {
      bytes[base + InputLayout::kKeyOff + b] = uint8_t(ev(acc.key[b]));
      bytes[base + InputLayout::kOwnerOff + b] = uint8_t(ev(acc.owner[b]));
    }
    put64(base + InputLayout::kLamportsOff, ev(acc.lamports));
    put64(base + InputLayout::kDataLenOff, ev(acc.data_len));
    for (uint32_t b = 0; b < ly.max_data; ++b)
      bytes[base + InputLayout::kDataOff + b] = uint8_t(ev(acc.data[b]));
  }
  put64(ly.instr_len_offset(), ev(ctx.instr_len));
  for (uint32_t b = 0; b < ly.max_data; ++b)
    bytes[ly.instr_data_offset() + b] = uint8_t(ev(ctx.instr_data[b]));
  for (uint32_t b = 0; b < 32; ++b)
    bytes[ly.program_id_offset() + b] = ctx.program_id[b];
  return bytes;
}

}  // namespace solscan::vm
