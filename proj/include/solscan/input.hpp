#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "solscan/expr.hpp"
#include "solscan/ledger.hpp"
#include "solscan/program.hpp"
#include "solscan/state.hpp"

namespace solscan::vm {

// Free variables backing one serialized account.
struct AccountVars {
  sym::ExprRef signer, writable, executable;  // 8-bit each
  std::vector<sym::ExprRef> key, owner;       // 32 bytes each
  sym::ExprRef lamports;                      // 64-bit
  sym::ExprRef data_len;                      // 64-bit
  std::vector<sym::ExprRef> data;             // max_data bytes
  sym::ExprRef len_pin;  // the data_len = max_data deserialization pin
};

struct TxContext {
  InputLayout layout;
  std::vector<AccountVars> accounts;
  sym::ExprRef instr_len;                 // 64-bit, bounded by capacity
  std::vector<sym::ExprRef> instr_data;   // capacity bytes
  std::array<uint8_t, 32> program_id{};   // constant
};

// Serializes n_accounts fresh symbolic accounts at their fixed offsets.
TxContext build_input(sym::ExprArena& arena, uint32_t n_accounts,
                      uint32_t max_data);

// Entry state: r1 = input pointer, r10 = stack frame top, memory regions
// populated, data_len pins and capacity bounds asserted.
sym::SymState make_entry_state(sym::ExprArena& arena,
                               const sbpf::ProgramImage& image,
                               const TxContext& ctx);

// Swaps each account's data_len = max_data pin for data_len <= max_data
// once deserialization is past the merge point.
void hybridize_lengths(sym::ExprArena& arena, sym::SymState& state,
                       const TxContext& ctx);

// Concrete input-region bytes under a full variable assignment; this is
// the exploit payload layout.
std::vector<uint8_t> serialize_input(sym::ExprArena& arena,
                                     const TxContext& ctx,
                                     const std::vector<uint64_t>& assignment);

}  // namespace solscan::vm
