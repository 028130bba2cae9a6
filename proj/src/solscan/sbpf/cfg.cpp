#include "solscan/cfg.hpp"

#include <algorithm>
#include <cassert>

namespace solscan::sbpf {

uint32_t Cfg::block_at(uint64_t address) const {
  auto it = block_by_start.upper_bound(address);
  if (it == block_by_start.begin()) throw MalformedTargetError("no block");
  --it;
  uint32_t b = it->second;
  if (address >= blocks[b].end)
    throw MalformedTargetError("address between blocks");
  return b;
}

bool Cfg::dominates(uint32_t a, uint32_t b) const {
  const Function& f = functions[blocks[b].function];
  uint32_t cur = b;
  while (cur != kNoBlock) {
    if (cur == a) return true;
    auto it = f.idom.find(cur);
    cur = it == f.idom.end() ? kNoBlock : it->second;
  }
  return false;
}

namespace {

// iterative dominator computation (Cooper-Harvey-Kennedy)
void compute_dominators(Cfg& cfg, Function& fn) {
  // reverse postorder over the function's blocks
  std::vector<uint32_t> rpo;
  std::set<uint32_t> visited;
  std::vector<std::pair<uint32_t, size_t>> stack;
  uint32_t entry_block = cfg.block_by_start.at(fn.entry);
  stack.push_back({entry_block, 0});
  visited.insert(entry_block);
  std::vector<uint32_t> post;
  while (!stack.empty()) {
    auto& [b, i] = stack.back();
    if (i < cfg.blocks[b].succs.size()) {
      uint32_t s = cfg.blocks[b].succs[i++].to;
      if (cfg.blocks[s].function == cfg.blocks[b].function &&
          !visited.count(s)) {
        visited.insert(s);
        stack.push_back({s, 0});
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  rpo.assign(post.rbegin(), post.rend());
  std::map<uint32_t, size_t> rpo_index;
  for (size_t i = 0; i < rpo.size(); ++i) rpo_index[rpo[i]] = i;

  std::map<uint32_t, uint32_t> idom;
  idom[entry_block] = entry_block;
  auto intersect = [&](uint32_t a, uint32_t b) {
    while (a != b) {
      while (rpo_index.at(a) > rpo_index.at(b)) a = idom.at(a);
      while (rpo_index.at(b) > rpo_index.at(a)) b = idom.at(b);
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < rpo.size(); ++i) {
      uint32_t b = rpo[i];
      uint32_t new_idom = kNoBlock;
      for (uint32_t p : cfg.blocks[b].preds) {
        if (cfg.blocks[p].function != cfg.blocks[b].function) continue;
        if (!idom.count(p)) continue;
        new_idom = new_idom == kNoBlock ? p : intersect(p, new_idom);
      }
      if (new_idom == kNoBlock) continue;
      if (!idom.count(b) || idom[b] != new_idom) {
        idom[b] = new_idom;
        changed = true;
      }
    }
  }
  idom[entry_block] = kNoBlock;
  fn.idom = std::move(idom);
}

void find_loops(Cfg& cfg, Function& fn) {
  // back edge u->h where h dominates u; body is the natural loop
  for (uint32_t b : fn.blocks) {
    for (const Edge& e : cfg.blocks[b].succs) {
      uint32_t h = e.to;
      if (cfg.blocks[h].function != cfg.blocks[b].function) continue;
      if (!cfg.dominates(h, b)) continue;
      Loop loop;
      loop.header = h;
      loop.body.insert(h);
      std::vector<uint32_t> work{b};
      while (!work.empty()) {
        uint32_t n = work.back();
        work.pop_back();
        if (!loop.body.insert(n).second) continue;
        for (uint32_t p : cfg.blocks[n].preds)
          if (cfg.blocks[p].function == cfg.blocks[n].function)
            work.push_back(p);
      }
      // merge loops sharing a header
      bool merged = false;
      for (Loop& existing : fn.loops) {
        if (existing.header == h) {
          existing.body.insert(loop.body.begin(), loop.body.end());
          merged = true;
          break;
        }
      }
      if (!merged) fn.loops.push_back(std::move(loop));
    }
  }
}

}  // namespace

Cfg build_cfg(const ProgramImage& image) {
  Cfg cfg;
  if (image.instructions.empty()) return cfg;
  uint64_t text_end = image.instructions.back().next_address();

  // function boundaries from sorted starts
  std::vector<uint64_t> fstarts(image.function_starts.begin(),
                                image.function_starts.end());
  auto function_of_addr = [&](uint64_t addr) -> uint32_t {
    auto it = std::upper_bound(fstarts.begin(), fstarts.end(), addr);
    assert(it != fstarts.begin());
    return uint32_t(it - fstarts.begin() - 1);
  };

  // leaders: function starts, jump targets, post-branch/post-call fallthroughs
  std::set<uint64_t> leaders(fstarts.begin(), fstarts.end());
  for (const Instruction& insn : image.instructions) {
    if (insn.opcode == kOpJa || insn.is_cond_jump()) {
      uint64_t target = insn.jump_target();
      if (target >= text_end || !image.at(target))
        throw MalformedTargetError("branch target outside text at offset " +
                                   std::to_string(insn.address));
      leaders.insert(target);
      leaders.insert(insn.next_address());
    } else if (insn.is_call() || insn.is_exit()) {
      if (insn.next_address() < text_end) leaders.insert(insn.next_address());
    }
  }

  // blocks
  std::vector<uint64_t> leader_list(leaders.begin(), leaders.end());
  for (size_t i = 0; i < leader_list.size(); ++i) {
    Block blk;
    blk.start = leader_list[i];
    uint64_t limit =
        i + 1 < leader_list.size() ? leader_list[i + 1] : text_end;
    // block also ends at the function boundary
    uint32_t func = function_of_addr(blk.start);
    uint64_t func_end =
        func + 1 < fstarts.size() ? fstarts[func + 1] : text_end;
    blk.end = std::min(limit, func_end);
    blk.function = func;
    // find terminator
    uint64_t t = blk.start;
    const Instruction* insn = image.at(t);
    while (insn && insn->next_address() < blk.end) {
      t = insn->next_address();
      insn = image.at(t);
    }
    blk.terminator = t;
    cfg.block_by_start[blk.start] = uint32_t(cfg.blocks.size());
    cfg.blocks.push_back(blk);
  }

  // functions
  for (size_t i = 0; i < fstarts.size(); ++i) {
    Function fn;
    fn.entry = fstarts[i];
    fn.end = i + 1 < fstarts.size() ? fstarts[i + 1] : text_end;
    cfg.function_by_entry[fn.entry] = uint32_t(i);
    cfg.functions.push_back(fn);
  }
  for (uint32_t b = 0; b < cfg.blocks.size(); ++b)
    cfg.functions[cfg.blocks[b].function].blocks.push_back(b);

  // edges
  auto add_edge = [&](uint32_t from, uint64_t to_addr, EdgeKind kind) {
    uint32_t to = cfg.block_at(to_addr);
    cfg.blocks[from].succs.push_back({to, kind});
    cfg.blocks[to].preds.push_back(from);
  };
  for (uint32_t b = 0; b < cfg.blocks.size(); ++b) {
    const Block& blk = cfg.blocks[b];
    const Instruction& term = *image.at(blk.terminator);
    if (term.is_exit()) continue;  // return/exit: no intra-function successor
    if (term.opcode == kOpJa) {
      add_edge(b, term.jump_target(), EdgeKind::BranchTaken);
    } else if (term.is_cond_jump()) {
      add_edge(b, term.jump_target(), EdgeKind::BranchTaken);
      if (term.next_address() < text_end)
        add_edge(b, term.next_address(), EdgeKind::FallThrough);
    } else if (term.opcode == kOpCall &&
               !image.is_syscall_site(term.address)) {
      uint64_t target = image.call_target(term);
      uint32_t caller = blk.function;
      uint32_t callee = function_of_addr(target);
      cfg.callees[caller].insert(callee);
      cfg.call_site_target[term.address] = callee;
      // execution resumes after the call inside the caller
      if (term.next_address() < text_end)
        add_edge(b, term.next_address(), EdgeKind::FallThrough);
    } else if (term.next_address() < text_end) {
      add_edge(b, term.next_address(), EdgeKind::FallThrough);
    }
  }

  for (Function& fn : cfg.functions) {
    compute_dominators(cfg, fn);
    find_loops(cfg, fn);
  }
  return cfg;
}

}  // namespace solscan::sbpf
