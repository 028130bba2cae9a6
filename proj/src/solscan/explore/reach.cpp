#include <deque>

#include "solscan/explore.hpp"

namespace solscan::explore {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Cpi:
      return "cpi";
    case Strategy::Main:
      return "main";
    case Strategy::Random:
      return "random";
  }
  return "?";
}

std::set<uint64_t> compute_targets(Strategy strategy,
                                   const sbpf::StaticMarks& marks) {
  switch (strategy) {
    case Strategy::Cpi:
      return marks.cpi_sites;
    case Strategy::Main:
      return marks.dispatch_leaves;
    case Strategy::Random:
      return {};
  }
  return {};
}

ReachabilityIndex build_reachability(const sbpf::Cfg& cfg,
                                     const std::set<uint64_t>& targets) {
  ReachabilityIndex index;
  if (targets.empty()) return index;

  // forward adjacency: block successors plus call edges into callee
  // entry blocks (conservative: the call may reach the target even if
  // nothing after the return does)
  std::vector<std::vector<uint32_t>> preds(cfg.blocks.size());
  auto add_edge = [&](uint32_t from, uint32_t to) {
    preds[to].push_back(from);
  };
  for (uint32_t b = 0; b < cfg.blocks.size(); ++b) {
    for (const sbpf::Edge& e : cfg.blocks[b].succs)
      if (e.kind != sbpf::EdgeKind::Return) add_edge(b, e.to);
  }
  for (const auto& [site, callee] : cfg.call_site_target) {
    uint32_t from = cfg.block_at(site);
    uint64_t entry = cfg.functions[callee].entry;
    auto it = cfg.block_by_start.find(entry);
    if (it != cfg.block_by_start.end()) add_edge(from, it->second);
  }

  std::deque<uint32_t> work;
  for (uint64_t t : targets) {
    uint32_t b = cfg.block_at(t);
    if (index.reaching_blocks.insert(b).second) work.push_back(b);
  }
  while (!work.empty()) {
    uint32_t b = work.front();
    work.pop_front();
    for (uint32_t p : preds[b])
      if (index.reaching_blocks.insert(p).second) work.push_back(p);
  }
  return index;
}

bool still_reachable(const sbpf::Cfg& cfg, const ReachabilityIndex& index,
                     const sym::SymState& state) {
  if (index.reaching_blocks.count(cfg.block_at(state.pc))) return true;
  for (const sym::Frame& f : state.call_stack)
    if (index.reaching_blocks.count(cfg.block_at(f.return_address)))
      return true;
  return false;
}

}  // namespace solscan::explore
