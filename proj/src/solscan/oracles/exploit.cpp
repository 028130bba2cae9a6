#include <algorithm>

#include "solscan/oracles.hpp"

namespace solscan::oracles {

using sym::ExprArena;
using sym::ExprRef;
using sym::SymState;
using vm::CriticalAction;
using vm::SyscallScript;

namespace {

// Packs (address, byte) pairs into contiguous write runs.
std::vector<SyscallScript::CpiWrite> pack_writes(
    std::vector<std::pair<uint64_t, uint8_t>> bytes) {
  std::sort(bytes.begin(), bytes.end());
  std::vector<SyscallScript::CpiWrite> out;
  for (const auto& [addr, value] : bytes) {
    if (out.empty() || out.back().address + out.back().bytes.size() != addr)
      out.push_back({addr, {}});
    out.back().bytes.push_back(value);
  }
  return out;
}

}  // namespace

std::optional<Exploit> Oracle::synthesize_exploit(
    const SymState& terminal, const CriticalAction& action,
    const std::vector<ExprRef>& extra) {
  ExprArena& a = machine_.arena();
  std::optional<std::vector<uint64_t>> model;
  if (!extra.empty()) {
    SymState pinned = terminal;
    pinned.constraints.insert(pinned.constraints.end(), extra.begin(),
                              extra.end());
    model = machine_.model(pinned);
  }
  if (!model) model = machine_.model(terminal);
  if (!model) return std::nullopt;  // unsat or solver timeout

  Exploit e;
  e.input = vm::serialize_input(a, ctx_, *model);

  // PDA derivations in path order, 33 exprs each (32 bytes + bump slot)
  for (size_t i = 0; i + 33 <= terminal.pda_trace.size(); i += 33) {
    std::array<uint8_t, 33> entry{};
    for (size_t b = 0; b < 32; ++b)
      entry[b] = uint8_t(a.eval(terminal.pda_trace[i + b], *model));
    ExprRef bump = terminal.pda_trace[i + 32];
    entry[32] = bump == sym::kNoExpr ? 0 : uint8_t(a.eval(bump, *model));
    e.script.pda_results.push_back(entry);
  }

  // one callee-effect list per CPI along the path, in order
  for (const CriticalAction& act : terminal.actions) {
    if (act.kind != CriticalAction::Kind::Cpi) continue;
    std::vector<std::pair<uint64_t, uint8_t>> bytes;
    bytes.reserve(act.havoc_bytes.size());
    for (const auto& [addr, expr] : act.havoc_bytes)
      bytes.emplace_back(addr, uint8_t(a.eval(expr, *model)));
    e.script.cpi_effects.push_back(pack_writes(std::move(bytes)));
  }

  if (config_.verify_replay) {
    vm::ConcreteResult res =
        vm::run_concrete(machine_.image(), e.input, e.script);
    e.replay_ok = res.reached(action.site);
  }
  return e;
}

}  // namespace solscan::oracles
