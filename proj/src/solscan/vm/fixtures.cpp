#include "solscan/fixtures.hpp"

#include "solscan/asmbuilder.hpp"
#include "solscan/ledger.hpp"
#include "solscan/program.hpp"

namespace solscan::fixtures {

using sbpf::AsmBuilder;

namespace {

// Offsets below are relative to r1 (the input region base) and assume the
// fixture's declared account count / data capacity.
constexpr int16_t kSigner0 = 9;
constexpr int16_t kKey0 = 16;
constexpr int16_t kOwner0 = 48;
constexpr int16_t kLamports0 = 80;
constexpr int16_t kData0 = 96;

constexpr int32_t kOwnerTag = 0x51;  // expected first owner bytes

uint32_t stride_for(uint32_t max_data) {
  return uint32_t(vm::InputLayout{1, max_data}.account_footprint());
}

// Conventional entrypoint prologue: read the account count, then walk the
// serialized accounts validating the 0xff duplicate marker, advancing by
// the fixed per-account footprint. Clobbers r2, r6-r8; preserves r1.
void emit_prologue(AsmBuilder& b, uint32_t max_data) {
  b.ldxdw(6, 1, 0);
  b.mov64_reg(7, 1);
  b.add64_imm(7, 8);
  b.mov64_imm(8, 0);
  b.label("deser_head");
  b.jge_reg(8, 6, "deser_done");
  b.ldxb(2, 7, 0);
  b.jne_imm(2, 0xff, "deser_fail");
  b.add64_imm(7, int32_t(stride_for(max_data)));
  b.add64_imm(8, 1);
  b.ja("deser_head");
  b.label("deser_fail");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("deser_done");
}

void emit_reject(AsmBuilder& b) {
  b.label("reject");
  b.mov64_imm(0, 1);
  b.exit();
}

// Builds a C-ABI instruction struct in the caller frame and invokes it.
// Expects the target key address in r2; optionally hands account 0 as a
// writable meta. Clobbers r1-r4.
void emit_cpi_c(AsmBuilder& b, const std::string& site, bool hand_acc0) {
  b.stxdw(10, -64, 2);  // program_id
  if (hand_acc0) {
    b.lddw(3, sbpf::kInputBase + 8 + 8);  // &account0.key
    b.stxdw(10, -128, 3);
    b.stb(10, -120, 1);  // is_writable
    b.stb(10, -119, 0);  // is_signer
    b.mov64_reg(4, 10);
    b.add64_imm(4, -128);
    b.stxdw(10, -56, 4);
    b.stdw(10, -48, 1);
  } else {
    b.stdw(10, -56, 0);
    b.stdw(10, -48, 0);
  }
  b.stdw(10, -40, 0);  // data / data_len
  b.stdw(10, -32, 0);
  b.mov64_reg(1, 10);
  b.add64_imm(1, -64);
  b.label(site);
  b.syscall("sol_invoke_signed_c");
}

Fixture pack(const char* name, AsmBuilder& b, uint32_t accounts,
             uint32_t max_data, std::initializer_list<const char*> sites) {
  Fixture f;
  f.name = name;
  f.accounts = accounts;
  f.max_data = max_data;
  for (const char* s : sites) f.sites[s] = b.label_offset(s);
  f.elf = b.finalize();
  return f;
}

}  // namespace

Fixture level0_moc() {
  // Wallet payout: the payer account's balance field is read without any
  // owner check and credited to the destination's lamports. The authority
  // (destination) signer is checked, so only the owner check is missing.
  constexpr int16_t kSigner1 = 10360 + 1;
  constexpr int16_t kLamports1 = 10360 + 72;
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxb(2, 1, kSigner1);
  b.jeq_imm(2, 0, "reject");
  b.ldxdw(3, 1, kData0);  // wallet balance, account 0 never checked
  b.label("transfer");
  b.stxdw(1, kLamports1, 3);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack("level0_moc", b, 2, 16, {"transfer"});
}

Fixture level1_msc() {
  // Vault withdrawal: the vault is owner-checked but nothing requires a
  // signature before draining its lamports.
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxdw(2, 1, kOwner0);
  b.jne_imm(2, kOwnerTag, "reject");
  b.ldxdw(3, 1, kData0);  // withdrawal amount stored in vault data
  b.ldxdw(4, 1, kLamports0);
  b.sub64_reg(4, 3);
  b.label("withdraw");
  b.stxdw(1, kLamports0, 4);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack("level1_msc", b, 1, 16, {"withdraw"});
}

Fixture level4_acpi() {
  // Proxy: invokes whatever program key the instruction data names,
  // handing over the caller's writable account. No checks at all.
  constexpr int32_t kInstrData = 8 + 10400 + 8;  // 1 account, 64-byte data
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 64);
  b.mov64_reg(2, 1);
  b.add64_imm(2, kInstrData);
  emit_cpi_c(b, "cpi", /*hand_acc0=*/true);
  b.mov64_imm(0, 0);
  b.exit();
  return pack("level4_acpi", b, 1, 64, {"cpi"});
}

Fixture clean() {
  // Fully-checked vault: owner check, signer check, then the withdrawal
  // plus a CPI to a hardcoded program key.
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxdw(2, 1, kOwner0);
  b.jne_imm(2, kOwnerTag, "reject");
  b.ldxb(2, 1, kSigner0);
  b.jeq_imm(2, 0, "reject");
  b.ldxdw(3, 1, kData0);
  b.ldxdw(4, 1, kLamports0);
  b.sub64_reg(4, 3);
  b.label("withdraw");
  b.stxdw(1, kLamports0, 4);
  std::vector<uint8_t> key(32, 0xaa);
  uint64_t key_off = b.rodata(key);
  b.lddw_rodata(2, key_off);
  emit_cpi_c(b, "cpi", /*hand_acc0=*/true);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack("clean", b, 1, 16, {"withdraw", "cpi"});
}

Fixture merge_loop() {
  // Deserialization that normalizes the three boolean flags of every
  // account into stack bytes, branching on each: 8 paths per account.
  AsmBuilder b;
  b.function("entrypoint");
  b.ldxdw(6, 1, 0);
  b.mov64_reg(7, 1);
  b.add64_imm(7, 8);
  b.mov64_imm(8, 0);
  b.label("scan_head");
  b.jge_reg(8, 6, "scan_done");
  b.ldxb(2, 7, 0);
  b.jne_imm(2, 0xff, "scan_fail");
  const int16_t flag_off[3] = {1, 2, 3};  // signer, writable, executable
  for (int i = 0; i < 3; ++i) {
    std::string z = "flag" + std::to_string(i) + "_zero";
    std::string j = "flag" + std::to_string(i) + "_join";
    b.ldxb(2, 7, flag_off[i]);
    b.jeq_imm(2, 0, z);
    b.stb(10, int16_t(-8 - i), 1);
    b.ja(j);
    b.label(z);
    b.stb(10, int16_t(-8 - i), 0);
    b.label(j);
  }
  b.add64_imm(7, int32_t(stride_for(16)));
  b.add64_imm(8, 1);
  b.ja("scan_head");
  b.label("scan_fail");
  b.mov64_imm(0, 1);
  b.exit();
  b.label("scan_done");
  b.mov64_imm(0, 0);
  b.exit();
  return pack("merge_loop", b, 3, 16, {"scan_head", "scan_done"});
}

Fixture signer_rejoin(bool gated) {
  // The classic rejoining signer branch: both sides fall through to the
  // withdrawal. The gated variant rejects the unsigned side instead.
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxdw(2, 1, kOwner0);
  b.jne_imm(2, kOwnerTag, "reject");
  b.ldxb(3, 1, kSigner0);
  if (gated) {
    b.jeq_imm(3, 0, "reject");
  } else {
    b.jne_imm(3, 0, "signed");
    b.stb(10, -8, 0);  // remember "unsigned" and carry on anyway
    b.ja("join");
    b.label("signed");
    b.stb(10, -8, 1);
    b.label("join");
  }
  b.label("withdraw");
  b.stdw(1, kLamports0, 0);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack(gated ? "signer_gated" : "signer_rejoin", b, 1, 16,
              {"withdraw"});
}

Fixture implicit_owner(bool write_before) {
  // level0 wallet, except the program also updates a bookkeeping byte in
  // the wallet's data. A successful write implies the runtime accepted us
  // as the owner, so the payout read is covered.
  constexpr int16_t kSigner1 = 10360 + 1;
  constexpr int16_t kLamports1 = 10360 + 72;
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxb(2, 1, kSigner1);
  b.jeq_imm(2, 0, "reject");
  if (write_before) {
    b.label("bookkeep");
    b.stb(1, kData0 + 8, 1);
  }
  b.ldxdw(3, 1, kData0);
  b.label("transfer");
  b.stxdw(1, kLamports1, 3);
  if (!write_before) {
    b.label("bookkeep");
    b.stb(1, kData0 + 8, 1);
  }
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack(write_before ? "implicit_owner_before" : "implicit_owner_after",
              b, 2, 16, {"transfer", "bookkeep"});
}

Fixture acpi_constant_target() {
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  std::vector<uint8_t> key(32, 0xbb);
  uint64_t key_off = b.rodata(key);
  b.lddw_rodata(2, key_off);
  emit_cpi_c(b, "cpi", /*hand_acc0=*/true);
  b.mov64_imm(0, 0);
  b.exit();
  return pack("acpi_constant_target", b, 1, 16, {"cpi"});
}

Fixture acpi_checked_data_target() {
  // The target key is read out of account 0's data, and account 0 passed
  // an owner check first: the registry pattern. Worth a note, not a bug.
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 64);
  b.ldxdw(2, 1, kOwner0);
  b.jne_imm(2, kOwnerTag, "reject");
  b.mov64_reg(2, 1);
  b.add64_imm(2, kData0);
  emit_cpi_c(b, "cpi", /*hand_acc0=*/false);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack("acpi_checked_data_target", b, 1, 64, {"cpi"});
}

Fixture format_log(bool feeds_branch) {
  // Logs the vault balance as decimal digits before an unguarded
  // withdrawal. The digit loop divides a symbolic 64-bit value by 10 up
  // to 20 times, which is what the skip heuristic exists for.
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxdw(2, 1, kOwner0);
  b.jne_imm(2, kOwnerTag, "reject");
  b.mov64_reg(9, 1);
  b.ldxdw(2, 1, kLamports0);
  b.ldxdw(4, 1, kData0);  // fee rate from account data
  b.mul64_reg(2, 4);      // the logged value: balance * rate
  b.ldxb(3, 1, int16_t(kData0 + 8));  // display radix from config data
  b.jne_imm(3, 10, "reject");         // only decimal output supported
  b.mov64_reg(1, 10);
  b.add64_imm(1, -32);
  b.label("fmtsite");
  b.call("fmt");
  if (feeds_branch) {
    b.jne_imm(0, 19, "short_number");
    b.label("short_number");
  }
  b.mov64_reg(1, 10);
  b.add64_imm(1, -32);
  b.mov64_reg(2, 0);
  b.syscall("sol_log_");
  b.label("withdraw");
  b.stdw(9, kLamports0, 0);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);

  b.function("fmt");  // r1 = buffer, r2 = value, r3 = radix; returns count
  // Tag the value's top bit (a nonce-style id): the decimal expansion is
  // always 19-20 digits, so every path through the loop drags a deep
  // division chain into the path condition.
  b.lddw(4, 0x8000000000000000ull);
  b.or64_reg(2, 4);
  b.mov64_imm(5, 0);
  b.label("fmt_head");
  b.mov64_reg(0, 2);
  b.mod64_imm(0, 10);  // decimal fast path; radix re-checked below
  b.jge_reg(0, 3, "fmt_oob");  // bounds check before the glyph lookup
  b.add64_imm(0, 48);
  b.stxb(1, 0, 0);
  b.add64_imm(1, 1);
  b.add64_imm(5, 1);
  b.div64_reg(2, 3);
  b.jne_imm(2, 0, "fmt_head");
  b.mov64_reg(0, 5);
  b.exit();
  b.label("fmt_oob");
  b.syscall("abort");
  b.exit();
  return pack(feeds_branch ? "format_branch" : "format_log", b, 1, 16,
              {"fmtsite", "withdraw"});
}

Fixture dispatcher() {
  // Tag-dispatched entrypoint: a benign logger, an unguarded withdrawal,
  // and a raw proxy CPI behind instruction-data tags 0/1/2.
  constexpr int32_t kInstrData = 8 + 2 * 10352 + 8;
  AsmBuilder b;
  b.function("entrypoint");
  emit_prologue(b, 16);
  b.ldxb(2, 1, int16_t(kInstrData));
  b.jeq_imm(2, 0, "h_log");
  b.jeq_imm(2, 1, "h_pay");
  b.jeq_imm(2, 2, "h_cpi");
  b.ja("reject");

  b.label("h_log");
  b.mov64_imm(1, 0);
  b.mov64_imm(2, 0);
  b.syscall("sol_log_64_");
  b.mov64_imm(0, 0);
  b.exit();

  b.label("h_pay");
  b.ldxdw(3, 1, kOwner0);
  b.jne_imm(3, kOwnerTag, "reject");
  b.label("pay");
  b.stdw(1, kLamports0, 0);
  b.mov64_imm(0, 0);
  b.exit();

  b.label("h_cpi");
  b.mov64_reg(2, 1);
  b.add64_imm(2, kInstrData);
  emit_cpi_c(b, "cpi", /*hand_acc0=*/true);
  b.mov64_imm(0, 0);
  b.exit();
  emit_reject(b);
  return pack("dispatcher", b, 2, 16,
              {"h_log", "h_pay", "h_cpi", "pay", "cpi"});
}

std::vector<Fixture> all() {
  return {level0_moc(),
          level1_msc(),
          level4_acpi(),
          clean(),
          merge_loop(),
          signer_rejoin(false),
          signer_rejoin(true),
          implicit_owner(true),
          implicit_owner(false),
          acpi_constant_target(),
          acpi_checked_data_target(),
          format_log(false),
          format_log(true),
          dispatcher()};
}

}  // namespace solscan::fixtures
