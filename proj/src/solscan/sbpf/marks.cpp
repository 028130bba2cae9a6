#include "solscan/marks.hpp"

#include <algorithm>
#include <map>
#include <queue>

namespace solscan::sbpf {

bool is_cpi_syscall(const std::string& name) {
  return name == "sol_invoke_signed_c" || name == "sol_invoke_signed_rust";
}

bool is_log_syscall(const std::string& name) {
  return name == "sol_log_" || name == "sol_log_64_";
}

namespace {

// functions reachable from entry within `depth` call levels (entry = 0)
std::map<uint32_t, int> functions_by_depth(const Cfg& cfg, uint64_t entry,
                                           int depth) {
  std::map<uint32_t, int> out;
  auto it = cfg.function_by_entry.find(entry);
  if (it == cfg.function_by_entry.end()) return out;
  std::queue<std::pair<uint32_t, int>> q;
  q.push({it->second, 0});
  while (!q.empty()) {
    auto [f, d] = q.front();
    q.pop();
    auto ins = out.emplace(f, d);
    if (!ins.second) continue;
    if (d >= depth) continue;
    auto ce = cfg.callees.find(f);
    if (ce == cfg.callees.end()) continue;
    for (uint32_t callee : ce->second) q.push({callee, d + 1});
  }
  return out;
}

const Loop* enclosing_loop(const Cfg& cfg, uint32_t func, uint32_t block) {
  const Function& fn = cfg.functions[func];
  const Loop* best = nullptr;
  for (const Loop& l : fn.loops) {
    if (!l.body.count(block)) continue;
    if (!best || l.body.size() > best->body.size()) best = &l;
  }
  return best;
}

bool block_in_any_loop(const Cfg& cfg, uint32_t block) {
  const Function& fn = cfg.functions[cfg.blocks[block].function];
  for (const Loop& l : fn.loops)
    if (l.body.count(block)) return true;
  return false;
}

}  // namespace

std::optional<uint64_t> find_deserialization_merge_point(
    const ProgramImage& image, const Cfg& cfg, int depth) {
  auto funcs = functions_by_depth(cfg, image.entry, depth);

  // loops (function, header) enclosing a `jeq/jne r*, 0xff` comparison
  std::set<std::pair<uint32_t, uint32_t>> candidate_loops;
  std::map<std::pair<uint32_t, uint32_t>, const Loop*> loop_of;
  for (const Instruction& insn : image.instructions) {
    if (!insn.is_cond_jump()) continue;
    uint8_t op = insn.opcode & 0xf0;
    if (op != kJmpJeq && op != kJmpJne) continue;
    if ((insn.opcode & kSrcX) || insn.imm != 0xff) continue;
    uint32_t block = cfg.block_at(insn.address);
    uint32_t func = cfg.blocks[block].function;
    if (!funcs.count(func)) continue;
    const Loop* loop = enclosing_loop(cfg, func, block);
    if (!loop) continue;
    candidate_loops.insert({func, loop->header});
    loop_of[{func, loop->header}] = loop;
  }
  // a single candidate loop enables merging; anything else disables it
  if (candidate_loops.size() != 1) return std::nullopt;
  auto key = *candidate_loops.begin();
  const Loop* loop = loop_of[key];

  // exit-condition block: a loop block with a successor outside the body
  std::vector<uint32_t> exits;
  for (uint32_t b : loop->body) {
    for (const Edge& e : cfg.blocks[b].succs) {
      if (!loop->body.count(e.to)) {
        exits.push_back(b);
        break;
      }
    }
  }
  if (exits.empty()) return std::nullopt;
  std::sort(exits.begin(), exits.end());
  return cfg.blocks[exits.front()].start;
}

namespace {

// Per-function forward propagation of "input-derived" register values.
// Entry r1 (the serialized input pointer) seeds the analysis; loads through
// tainted pointers produce tainted values; arithmetic propagates.
struct TaintResult {
  // instruction address -> bitmask of tainted registers before execution
  std::map<uint64_t, uint16_t> before;
};

TaintResult propagate_taint(const ProgramImage& image, const Cfg& cfg,
                            uint32_t func, uint16_t entry_mask) {
  TaintResult res;
  const Function& fn = cfg.functions[func];
  std::map<uint32_t, uint16_t> block_in;
  uint32_t entry_block = cfg.block_by_start.at(fn.entry);
  block_in[entry_block] = entry_mask;
  std::queue<uint32_t> work;
  work.push(entry_block);
  std::set<uint32_t> queued{entry_block};
  while (!work.empty()) {
    uint32_t b = work.front();
    work.pop();
    queued.erase(b);
    uint16_t mask = block_in[b];
    const Block& blk = cfg.blocks[b];
    for (uint64_t a = blk.start; a < blk.end;) {
      const Instruction* insn = image.at(a);
      if (!insn) break;
      auto& slot = res.before[a];
      slot |= mask;
      mask = slot;
      uint8_t cls = insn->cls();
      if (cls == kClassLdx) {
        if (mask & (1 << insn->src))
          mask |= uint16_t(1 << insn->dst);
        else
          mask &= uint16_t(~(1 << insn->dst));
      } else if (cls == kClassAlu32 || cls == kClassAlu64) {
        uint8_t op = insn->opcode & 0xf0;
        if (op == kAluMov) {
          if (insn->opcode & kSrcX) {
            if (mask & (1 << insn->src))
              mask |= uint16_t(1 << insn->dst);
            else
              mask &= uint16_t(~(1 << insn->dst));
          } else {
            mask &= uint16_t(~(1 << insn->dst));
          }
        } else if ((insn->opcode & kSrcX) && (mask & (1 << insn->src))) {
          mask |= uint16_t(1 << insn->dst);
        }
      } else if (insn->opcode == kOpLddw) {
        mask &= uint16_t(~(1 << insn->dst));
      } else if (insn->is_call()) {
        // r0 clobbered; scratch r1-r5 conservatively kept
        mask &= uint16_t(~1);
      }
      a = insn->next_address();
    }
    for (const Edge& e : blk.succs) {
      if (cfg.blocks[e.to].function != func) continue;
      uint16_t& in = block_in[e.to];
      if ((in | mask) != in || !res.before.count(cfg.blocks[e.to].start)) {
        in |= mask;
        if (queued.insert(e.to).second) work.push(e.to);
      }
    }
  }
  return res;
}

}  // namespace

std::set<uint64_t> find_dispatch_leaves(const ProgramImage& image,
                                        const Cfg& cfg) {
  std::set<uint64_t> leaves;
  if (cfg.blocks.empty()) return leaves;
  // root must sit within the first two call levels from entry
  auto funcs = functions_by_depth(cfg, image.entry, 2);

  // candidate compare blocks: terminator compares an input-derived value
  // against an immediate (or register), outside any loop
  std::set<uint32_t> candidates;
  for (auto [func, depth] : funcs) {
    (void)depth;
    uint16_t seed = func == cfg.function_by_entry.at(image.entry)
                        ? uint16_t(1 << 1)   // entry r1 = input pointer
                        : uint16_t(0x3e);    // args r1-r5 may carry input
    TaintResult taint = propagate_taint(image, cfg, func, seed);
    for (uint32_t b : cfg.functions[func].blocks) {
      const Block& blk = cfg.blocks[b];
      const Instruction* term = image.at(blk.terminator);
      if (!term || !term->is_cond_jump()) continue;
      uint8_t op = term->opcode & 0xf0;
      bool eq_or_range = op == kJmpJeq || op == kJmpJne || op == kJmpJgt ||
                         op == kJmpJge || op == kJmpJlt || op == kJmpJle;
      if (!eq_or_range) continue;
      if (block_in_any_loop(cfg, b)) continue;
      auto it = taint.before.find(term->address);
      if (it == taint.before.end()) continue;
      bool dst_tainted = it->second & (1 << term->dst);
      bool src_tainted = (term->opcode & kSrcX) && (it->second & (1 << term->src));
      if (dst_tainted || src_tainted) candidates.insert(b);
    }
  }
  if (candidates.empty()) return leaves;

  // trees over candidate blocks; roots have no candidate predecessor
  std::vector<uint32_t> roots;
  for (uint32_t c : candidates) {
    bool has_cand_pred = false;
    for (uint32_t p : cfg.blocks[c].preds)
      if (candidates.count(p)) has_cand_pred = true;
    if (!has_cand_pred) roots.push_back(c);
  }
  // pick the largest tree; ties go to the lowest root address
  std::set<uint32_t> best_tree;
  uint64_t best_root_addr = 0;
  for (uint32_t root : roots) {
    std::set<uint32_t> tree;
    std::vector<uint32_t> work{root};
    while (!work.empty()) {
      uint32_t n = work.back();
      work.pop_back();
      if (!tree.insert(n).second) continue;
      for (const Edge& e : cfg.blocks[n].succs)
        if (candidates.count(e.to)) work.push_back(e.to);
    }
    if (tree.size() > best_tree.size() ||
        (tree.size() == best_tree.size() &&
         cfg.blocks[root].start < best_root_addr)) {
      best_tree = tree;
      best_root_addr = cfg.blocks[root].start;
    }
  }
  // a single comparison is not a dispatch tree
  if (best_tree.size() < 2) return leaves;

  for (uint32_t n : best_tree)
    for (const Edge& e : cfg.blocks[n].succs)
      if (!best_tree.count(e.to)) leaves.insert(cfg.blocks[e.to].start);
  return leaves;
}

std::set<uint64_t> find_cpi_sites(const ProgramImage& image) {
  std::set<uint64_t> out;
  for (const auto& [addr, name] : image.syscalls)
    if (is_cpi_syscall(name)) out.insert(addr);
  return out;
}

namespace {

// format-routine signature: decimal conversion (div/mod by 10) in the body
bool looks_like_format_routine(const ProgramImage& image, const Cfg& cfg,
                               uint32_t func) {
  const Function& fn = cfg.functions[func];
  for (uint32_t b : fn.blocks) {
    const Block& blk = cfg.blocks[b];
    for (uint64_t a = blk.start; a < blk.end;) {
      const Instruction* insn = image.at(a);
      if (!insn) break;
      uint8_t cls = insn->cls();
      if ((cls == kClassAlu64 || cls == kClassAlu32) &&
          !(insn->opcode & kSrcX) && insn->imm == 10) {
        uint8_t op = insn->opcode & 0xf0;
        if (op == kAluDiv || op == kAluMod) return true;
      }
      a = insn->next_address();
    }
  }
  return false;
}

// def-use walk after a format call: the result (r0 and bytes reachable from
// the buffer pointer) may flow only into log syscalls and a trailing
// deallocation call.
bool result_only_logged(const ProgramImage& image, const Cfg& cfg,
                        uint64_t call_addr, uint8_t buf_reg) {
  uint32_t start_block = cfg.block_at(call_addr);
  uint32_t func = cfg.blocks[start_block].function;

  struct State {
    uint16_t ptr;  // registers aliasing the buffer
    uint16_t res;  // registers carrying result bytes / the length
    bool operator==(const State&) const = default;
  };
  State init{uint16_t(1 << buf_reg), uint16_t(1 << 0)};  // r0 = length

  std::map<uint32_t, State> seen;
  struct Item {
    uint32_t block;
    uint64_t from;  // first address to scan
    State st;
  };
  const Instruction* call_insn = image.at(call_addr);
  std::vector<Item> work{{start_block, call_insn->next_address(), init}};
  while (!work.empty()) {
    Item it = work.back();
    work.pop_back();
    auto prev = seen.find(it.block);
    if (prev != seen.end() && it.from == cfg.blocks[it.block].start &&
        prev->second == it.st)
      continue;
    if (it.from == cfg.blocks[it.block].start) seen[it.block] = it.st;

    State st = it.st;
    const Block& blk = cfg.blocks[it.block];
    for (uint64_t a = it.from; a < blk.end;) {
      const Instruction* insn = image.at(a);
      if (!insn) break;
      auto kill = [&st](uint8_t r) {
        st.ptr &= uint16_t(~(1u << r));
        st.res &= uint16_t(~(1u << r));
      };
      uint8_t cls = insn->cls();
      if (insn->is_call() && insn->opcode == kOpCall) {
        uint16_t args = 0x3e;  // r1-r5
        bool ptr_passed = st.ptr & args;
        bool res_passed = st.res & args;
        auto name = image.syscall_name(insn->address);
        if (name && is_log_syscall(*name)) {
          // allowed use
        } else if (name) {
          if (ptr_passed || res_passed) return false;
        } else {
          // internal call: deallocation may take the pointer, never bytes
          if (res_passed) return false;
        }
        kill(0);
      } else if (cls == kClassLdx) {
        if (st.ptr & (1 << insn->src)) {
          kill(insn->dst);
          st.res |= uint16_t(1 << insn->dst);
        } else {
          kill(insn->dst);
        }
      } else if (insn->is_store()) {
        bool value_tracked = cls == kClassStx && ((st.res | st.ptr) &
                                                  (1 << insn->src));
        bool dest_buffer = st.ptr & (1 << insn->dst);
        if (value_tracked && !dest_buffer) return false;
      } else if (cls == kClassAlu32 || cls == kClassAlu64) {
        uint8_t op = insn->opcode & 0xf0;
        bool src_ptr = (insn->opcode & kSrcX) && (st.ptr & (1 << insn->src));
        bool src_res = (insn->opcode & kSrcX) && (st.res & (1 << insn->src));
        if (op == kAluMov) {
          kill(insn->dst);
          if (src_ptr) st.ptr |= uint16_t(1 << insn->dst);
          if (src_res) st.res |= uint16_t(1 << insn->dst);
        } else if (op == kAluAdd && (st.ptr & (1 << insn->dst)) &&
                   !(insn->opcode & kSrcX)) {
          // pointer arithmetic keeps the alias
        } else {
          bool dst_res = st.res & (1 << insn->dst);
          bool dst_ptr = st.ptr & (1 << insn->dst);
          if (dst_res || dst_ptr || src_res || src_ptr) {
            kill(insn->dst);
            st.res |= uint16_t(1 << insn->dst);
          }
        }
      } else if (insn->is_cond_jump()) {
        bool on_res = (st.res & (1 << insn->dst)) ||
                      ((insn->opcode & kSrcX) && (st.res & (1 << insn->src)));
        if (on_res) return false;  // formatted bytes feed control flow
      }
      a = insn->next_address();
    }
    if (st.ptr == 0 && st.res == 0) continue;
    for (const Edge& e : blk.succs) {
      if (cfg.blocks[e.to].function != func) continue;
      work.push_back({e.to, cfg.blocks[e.to].start, st});
    }
  }
  return true;
}

}  // namespace

std::set<uint64_t> find_format_skip_sites(const ProgramImage& image,
                                          const Cfg& cfg) {
  std::set<uint64_t> out;
  for (const auto& [addr, callee] : cfg.call_site_target) {
    if (!looks_like_format_routine(image, cfg, callee)) continue;
    // by convention the buffer rides in r1 at the call
    if (result_only_logged(image, cfg, addr, 1)) out.insert(addr);
  }
  return out;
}

StaticMarks compute_marks(const ProgramImage& image, const Cfg& cfg) {
  StaticMarks marks;
  marks.merge_point = find_deserialization_merge_point(image, cfg);
  marks.dispatch_leaves = find_dispatch_leaves(image, cfg);
  marks.cpi_sites = find_cpi_sites(image);
  marks.skip_sites = find_format_skip_sites(image, cfg);
  return marks;
}

}  // namespace solscan::sbpf
