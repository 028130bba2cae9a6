#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "solscan/program.hpp"

namespace solscan::vm {

// External effects consumed during concrete replay, in call order. PDA
// results and CPI writebacks depend on chain state the analyzer fixed by
// solver model; the exploit sidecar carries them so replay agrees.
struct SyscallScript {
  std::vector<std::array<uint8_t, 33>> pda_results;  // 32 bytes + bump
  struct CpiWrite {
    uint64_t address;  // absolute VM address
    std::vector<uint8_t> bytes;
  };
  std::vector<std::vector<CpiWrite>> cpi_effects;  // per invoke, in order
};

struct ConcreteResult {
  enum class End : uint8_t { Exited, Aborted, StepLimit } end = End::Aborted;
  uint64_t r0 = 0;
  std::vector<uint64_t> pc_trace;  // executed instruction addresses
  std::string abort_reason;

  bool reached(uint64_t site) const {
    for (uint64_t a : pc_trace)
      if (a == site) return true;
    return false;
  }
};

// Plain reference interpreter over the same memory map as the symbolic
// machine; input_bytes populate the input region verbatim.
ConcreteResult run_concrete(const sbpf::ProgramImage& image,
                            const std::vector<uint8_t>& input_bytes,
                            const SyscallScript& script = {},
                            uint64_t step_limit = 1 << 20);

}  // namespace solscan::vm
