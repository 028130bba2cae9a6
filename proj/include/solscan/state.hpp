#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "solscan/expr.hpp"
#include "solscan/ledger.hpp"

namespace solscan::sym {

enum class Region : uint8_t { Stack, Heap, Input, Rodata };

// One contiguous address range with symbolic byte contents. The shared
// initial image never changes; per-state writes live in the overlay, so
// forks copy only what a path actually wrote.
struct MemRegion {
  Region kind;
  uint64_t base = 0;
  uint64_t size = 0;
  bool writable = false;
  std::shared_ptr<const std::vector<ExprRef>> init;  // null = all zero
  std::map<uint64_t, ExprRef> overlay;               // offset -> byte

  bool contains(uint64_t addr) const {
    return addr >= base && addr - base < size;
  }
  ExprRef load_byte(ExprArena& arena, uint64_t offset) const;
  void store_byte(uint64_t offset, ExprRef value);
};

struct BranchChoice {
  uint64_t address;  // branch instruction
  bool taken;
};

struct Frame {
  uint64_t return_address;
  std::array<ExprRef, 4> saved;  // r6..r9, callee-saved by the VM
  ExprRef saved_r10;
};

enum class Status : uint8_t { Active, Exited, Aborted, UnsatPruned };

inline constexpr uint32_t kNoState = 0xffffffffu;

// One path of execution: machine registers, region memory, the path
// condition, and the account ledger the oracles consume. Plain value
// semantics; a copy is a snapshot.
struct SymState {
  std::array<ExprRef, 11> regs{};
  uint64_t pc = 0;
  std::vector<MemRegion> mem;
  std::vector<ExprRef> constraints;  // conjunction, width-1 terms
  vm::AccountLedger ledger;
  std::vector<Frame> call_stack;
  std::set<uint64_t> coverage;  // executed instruction addresses
  Status status = Status::Active;
  uint32_t id = 0;
  uint32_t fork_parent = kNoState;
  uint64_t rng_seed = 0;
  uint64_t heap_top = 0;

  std::vector<BranchChoice> trace;  // every conditional outcome, in order
  std::vector<vm::CriticalAction> actions;
  // PDA-derivation results along the path, 33 byte exprs per derivation
  // (32 address bytes plus the bump, kNoExpr when no bump was requested)
  std::vector<ExprRef> pda_trace;
  uint64_t fork_ordinal = 0;  // monotone fork timestamp
  bool solver_degraded = false;
  bool merged = false;  // trace has a gap from state merging
  std::string abort_reason;

  bool active() const { return status == Status::Active; }

  MemRegion* region_at(uint64_t addr);
  const MemRegion* region_at(uint64_t addr) const;
  MemRegion& region(Region kind);
  const MemRegion& region(Region kind) const;

  // Little-endian multi-byte access at a concrete address; the address
  // must lie fully inside one region.
  ExprRef load(ExprArena& arena, uint64_t addr, uint32_t width) const;
  void store(ExprArena& arena, uint64_t addr, uint32_t width, ExprRef value);
};

// Deep-copy snapshot semantics (value copy made explicit for call sites).
inline SymState snapshot(const SymState& s) { return s; }
inline SymState restore(const SymState& snap) { return snap; }

}  // namespace solscan::sym
