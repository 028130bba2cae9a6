#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "solscan/expr.hpp"

namespace solscan::sym {
struct SymState;
}

namespace solscan::vm {

// Fields of the serialized transaction input, addressable by byte offset.
enum class AccountField : uint8_t {
  None,
  Marker,
  Signer,
  Writable,
  Executable,
  Pad,
  Key,
  Owner,
  Lamports,
  DataLen,
  Data,
  RentEpoch,
  InstrLen,
  InstrData,
  ProgramId,
};

struct FieldRef {
  int32_t account = -1;  // -1 for non-account fields
  AccountField field = AccountField::None;
  uint32_t byte = 0;  // offset within the field
};

// Byte layout of the serialized input region. Every account occupies its
// maximum footprint so all offsets are compile-time-style constants for a
// fixed (n_accounts, max_data) configuration.
struct InputLayout {
  uint32_t n_accounts = 0;
  uint32_t max_data = 0;

  static constexpr uint64_t kHeaderSize = 8;      // account count, LE
  static constexpr uint64_t kReallocPad = 10240;  // growth headroom
  // per-account field offsets
  static constexpr uint64_t kMarkerOff = 0;
  static constexpr uint64_t kSignerOff = 1;
  static constexpr uint64_t kWritableOff = 2;
  static constexpr uint64_t kExecutableOff = 3;
  static constexpr uint64_t kKeyOff = 8;
  static constexpr uint64_t kOwnerOff = 40;
  static constexpr uint64_t kLamportsOff = 72;
  static constexpr uint64_t kDataLenOff = 80;
  static constexpr uint64_t kDataOff = 88;

  uint64_t account_footprint() const {
    uint64_t raw = kDataOff + max_data + kReallocPad;
    return ((raw + 7) & ~7ull) + 8;  // align, then rent epoch
  }
  uint64_t account_base(uint32_t i) const {
    return kHeaderSize + uint64_t(i) * account_footprint();
  }
  uint64_t instr_len_offset() const { return account_base(n_accounts); }
  uint64_t instr_data_offset() const { return instr_len_offset() + 8; }
  uint64_t program_id_offset() const { return instr_data_offset() + max_data; }
  uint64_t total_size() const { return program_id_offset() + 32; }

  FieldRef locate(uint64_t offset) const;
};

// The four trust marks of the classification rules.
enum class CheckKind : uint8_t {
  OwnerCompared,
  KeyVsConstant,
  DataWritten,
  PdaDerived,
};

std::string check_kind_name(CheckKind kind);

struct CheckMark {
  uint32_t account;
  CheckKind kind;
  uint64_t site;
  uint64_t seq;
};

struct WriteRecord {
  uint32_t account;
  AccountField field;
  uint64_t site;
  uint64_t seq;
};

// Read-flag bits per account.
inline constexpr uint8_t kReadKey = 1;
inline constexpr uint8_t kReadOwner = 2;
inline constexpr uint8_t kReadData = 4;
inline constexpr uint8_t kReadLamports = 8;

// Per-path record of which account fields entered dataflow and which trust
// marks the path established; append-only along a path.
struct AccountLedger {
  uint32_t n_accounts = 0;
  std::vector<uint8_t> read_flags;   // per account, kRead* bits
  std::vector<uint8_t> signer_seen;  // signer byte occurred in a branch
  std::vector<CheckMark> checks;
  std::vector<WriteRecord> writes;
  std::vector<std::string> notes;  // e.g. weak key checks
  uint64_t seq = 0;

  void init(uint32_t accounts) {
    n_accounts = accounts;
    read_flags.assign(accounts, 0);
    signer_seen.assign(accounts, 0);
  }
  bool has_check(uint32_t account, CheckKind kind) const {
    for (const CheckMark& m : checks)
      if (m.account == account && m.kind == kind) return true;
    return false;
  }
  void add_check(uint32_t account, CheckKind kind, uint64_t site) {
    if (!has_check(account, kind)) checks.push_back({account, kind, site, seq});
  }
};

// A state-affecting sink recorded during execution; classified by the
// oracles once the owning path terminates.
struct CriticalAction {
  enum class Kind : uint8_t { AccountWrite, Cpi };
  Kind kind;
  uint64_t site;
  int32_t account = -1;                   // write target
  AccountField field = AccountField::None;
  std::vector<sym::ExprRef> target_key;   // cpi: 32 byte exprs
  std::vector<uint32_t> handed_accounts;  // cpi: accounts passed along
  // cpi: bytes the modeled callee overwrote (absolute address -> fresh
  // variable), so replay can reproduce the callee's effect concretely
  std::vector<std::pair<uint64_t, sym::ExprRef>> havoc_bytes;
  uint64_t seq = 0;
  size_t trace_len = 0;  // branch-trace length when recorded
};

// Ledger hook for a memory access that resolved into the input region.
void on_memory_event(const InputLayout& layout, sym::SymState& state,
                     uint64_t offset, uint32_t width, bool is_write,
                     uint64_t site);

// Ledger hook for a conditional-branch condition; inspects the free
// variables of cond and records owner/key/pda marks.
void on_branch_event(sym::ExprArena& arena, sym::SymState& state,
                     sym::ExprRef cond, uint64_t site);

}  // namespace solscan::vm
