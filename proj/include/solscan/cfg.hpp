#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "solscan/program.hpp"

namespace solscan::sbpf {

enum class EdgeKind : uint8_t { FallThrough, BranchTaken, Return };

struct Edge {
  uint32_t to;
  EdgeKind kind;
};

struct Block {
  uint64_t start = 0;  // text address of first instruction
  uint64_t end = 0;    // exclusive
  uint32_t function = 0;
  std::vector<Edge> succs;
  std::vector<uint32_t> preds;
  uint64_t terminator = 0;  // address of last instruction
};

struct Loop {
  uint32_t header;
  std::set<uint32_t> body;  // block ids, includes header
};

struct Function {
  uint64_t entry = 0;
  uint64_t end = 0;  // exclusive text address
  std::vector<uint32_t> blocks;
  // immediate dominator per block id (kNoBlock for the entry block)
  std::map<uint32_t, uint32_t> idom;
  std::vector<Loop> loops;
};

inline constexpr uint32_t kNoBlock = 0xffffffffu;

struct MalformedTargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Cfg {
  std::vector<Block> blocks;
  std::vector<Function> functions;
  std::map<uint64_t, uint32_t> block_by_start;
  // caller graph: function id -> callee function ids
  std::map<uint32_t, std::set<uint32_t>> callees;
  // call-site instruction address -> callee function id
  std::map<uint64_t, uint32_t> call_site_target;
  std::map<uint64_t, uint32_t> function_by_entry;

  uint32_t block_at(uint64_t address) const;  // block containing address
  uint32_t function_of_block(uint32_t block) const {
    return blocks[block].function;
  }
  uint32_t function_at(uint64_t address) const {
    return blocks[block_at(address)].function;
  }
  // true if a dominates b (same function)
  bool dominates(uint32_t a, uint32_t b) const;
};

Cfg build_cfg(const ProgramImage& image);

}  // namespace solscan::sbpf
