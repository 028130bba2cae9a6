#include <algorithm>
#include <deque>

#include "solscan/oracles.hpp"

namespace solscan::oracles {

using sym::ExprArena;
using sym::ExprRef;
using sym::SatVerdict;
using sym::SymState;
using sym::VarField;
using vm::AccountLedger;
using vm::CheckKind;
using vm::CriticalAction;

std::string finding_kind_name(FindingKind kind) {
  switch (kind) {
    case FindingKind::Msc:
      return "missing-signer-check";
    case FindingKind::Moc:
      return "missing-owner-check";
    case FindingKind::MocMsc:
      return "missing-owner-and-signer-check";
    case FindingKind::Acpi:
      return "arbitrary-cpi";
  }
  return "?";
}

std::set<uint32_t> Oracle::checked_accounts(const AccountLedger& ledger,
                                            const CriticalAction& action,
                                            bool graceful) const {
  std::set<uint32_t> out;
  for (const vm::CheckMark& m : ledger.checks) {
    bool is_write_mark = m.kind == CheckKind::DataWritten;
    if (m.seq <= action.seq || (is_write_mark && graceful))
      out.insert(m.account);
  }
  return out;
}

bool Oracle::has_authority(const SymState& terminal) {
  ExprArena& a = machine_.arena();
  for (uint32_t i = 0; i < ctx_.accounts.size(); ++i) {
    if (!terminal.ledger.has_check(i, CheckKind::KeyVsConstant)) continue;
    ExprRef unsigned_i =
        a.eq(ctx_.accounts[i].signer, a.constant(0, 8));
    if (machine_.is_sat(terminal, unsigned_i) == SatVerdict::No)
      return true;  // trusted account whose signer byte must be nonzero
  }
  return false;
}

namespace {

bool condition_reads_signer(const ExprArena& a, ExprRef cond) {
  std::vector<uint32_t> vars;
  a.collect_vars(cond, vars);
  for (uint32_t v : vars)
    if (a.var_info(v).field == VarField::Signer) return true;
  return false;
}

}  // namespace

// Re-executes the recorded path with every signer byte pinned to 0. A
// branch that flips under the pin and inspects a signer byte is the
// rejoining-branch pattern: continue down the feasible side and switch to
// a bounded search for the action site. Flips at signer-free branches
// mean the trace is invalid for unrelated reasons: conservative true.
bool Oracle::has_signer_check(const SymState& terminal,
                              const CriticalAction& action, bool& degraded) {
  ExprArena& a = machine_.arena();
  SymState start = vm::make_entry_state(a, machine_.image(), ctx_);
  vm::hybridize_lengths(a, start, ctx_);
  for (const vm::AccountVars& acc : ctx_.accounts)
    start.constraints.push_back(a.eq(acc.signer, a.constant(0, 8)));
  if (machine_.is_sat(start) == SatVerdict::No) return true;

  const std::vector<sym::BranchChoice>& trace = terminal.trace;
  size_t guided_len = terminal.merged ? trace.size() : action.trace_len;
  if (!terminal.merged) guided_len = std::min(guided_len, trace.size());

  std::deque<SymState> work;
  work.push_back(std::move(start));
  bool guided = true;
  size_t steps = 0;
  while (!work.empty()) {
    if (steps++ > config_.reexec_step_limit) {
      degraded = true;
      return true;
    }
    SymState s = std::move(work.front());
    work.pop_front();
    if (s.pc == action.site) return false;  // action still reachable
    if (!s.active()) continue;
    size_t before = s.trace.size();
    std::vector<SymState> succs = machine_.step(std::move(s));
    if (guided && !succs.empty() && succs[0].trace.size() > before) {
      // conditional branch: follow the recorded choice while we have one
      if (before < guided_len) {
        bool want = trace[before].taken;
        SymState* match = nullptr;
        for (SymState& n : succs)
          if (n.trace.back().taken == want) match = &n;
        if (match) {
          work.push_back(std::move(*match));
          continue;
        }
        // recorded side infeasible under forced signers
        ExprRef guard = succs[0].constraints.empty()
                            ? a.bool_true()
                            : succs[0].constraints.back();
        if (!condition_reads_signer(a, guard)) {
          degraded = true;
          return true;
        }
        guided = false;  // rejoin pattern: search from here on
      } else {
        guided = false;  // past the recorded prefix (merge gap)
      }
    }
    for (SymState& n : succs) {
      if (!n.active() && n.pc != action.site) continue;
      if (work.size() < config_.reexec_state_cap)
        work.push_back(std::move(n));
    }
  }
  return true;  // site unreachable with signers forced off
}

namespace {

std::set<uint32_t> read_accounts(const AccountLedger& ledger) {
  std::set<uint32_t> out;
  for (uint32_t i = 0; i < ledger.n_accounts; ++i)
    if (ledger.read_flags[i] != 0) out.insert(i);
  return out;
}

std::string describe_account(const AccountLedger& ledger, uint32_t i) {
  std::string s = "account " + std::to_string(i) + ": reads[";
  uint8_t f = ledger.read_flags[i];
  if (f & vm::kReadKey) s += " key";
  if (f & vm::kReadOwner) s += " owner";
  if (f & vm::kReadData) s += " data";
  if (f & vm::kReadLamports) s += " lamports";
  s += " ] checks[";
  for (const vm::CheckMark& m : ledger.checks)
    if (m.account == i) s += " " + vm::check_kind_name(m.kind);
  s += " ]";
  return s;
}

}  // namespace

std::optional<Finding> Oracle::classify_write(const SymState& terminal,
                                              const CriticalAction& action,
                                              std::vector<std::string>&) {
  bool graceful = terminal.status == sym::Status::Exited;
  if (!graceful) return std::nullopt;  // runtime rolls the write back

  std::set<uint32_t> used = read_accounts(terminal.ledger);
  std::set<uint32_t> checked =
      checked_accounts(terminal.ledger, action, graceful);
  std::set<uint32_t> unchecked;
  std::set_difference(used.begin(), used.end(), checked.begin(),
                      checked.end(),
                      std::inserter(unchecked, unchecked.begin()));
  // the runtime itself authorizes lamport deductions by the owning
  // program, so the written account does not need an explicit check
  if (action.field == vm::AccountField::Lamports && action.account >= 0)
    unchecked.erase(uint32_t(action.account));

  bool degraded = terminal.solver_degraded;
  bool moc = !unchecked.empty() && !has_authority(terminal);
  bool msc = !has_signer_check(terminal, action, degraded);
  if (!moc && !msc) return std::nullopt;

  Finding f;
  f.kind = moc && msc ? FindingKind::MocMsc
                      : (moc ? FindingKind::Moc : FindingKind::Msc);
  f.site = action.site;
  f.unchecked_accounts.assign(unchecked.begin(), unchecked.end());
  f.confidence = degraded ? 0.5 : 1.0;
  f.evidence.push_back(
      "write to account " + std::to_string(action.account) + " field " +
      (action.field == vm::AccountField::Lamports ? "lamports" : "data"));
  for (uint32_t i : used)
    f.evidence.push_back(describe_account(terminal.ledger, i));
  f.evidence.push_back(msc ? "no signer constraint survives re-execution"
                           : "signer check present");
  return f;
}

std::optional<Finding> Oracle::classify_cpi(const SymState& terminal,
                                            const CriticalAction& action,
                                            std::vector<std::string>& notes) {
  ExprArena& a = machine_.arena();
  bool degraded = terminal.solver_degraded;

  // constant target: exactly one model for the 32 key bytes
  bool constant = false;
  auto model = machine_.concretize(terminal, action.target_key);
  if (model) {
    ExprRef differs = a.bool_false();
    for (size_t i = 0; i < action.target_key.size(); ++i)
      differs = a.bit_or(
          differs, a.ne(action.target_key[i], a.constant((*model)[i], 8)));
    SatVerdict v = machine_.is_sat(terminal, differs);
    constant = v == SatVerdict::No;
    if (v == SatVerdict::Timeout) degraded = true;
  } else {
    degraded = true;
  }
  if (constant) return std::nullopt;

  // owner-checked source: every free variable of the target is a data
  // byte of an account that passed an owner comparison first
  std::vector<uint32_t> vars;
  for (ExprRef b : action.target_key) a.collect_vars(b, vars);
  bool sourced_checked = !vars.empty();
  for (uint32_t v : vars) {
    const sym::VarInfo& info = a.var_info(v);
    if (info.field != VarField::Data || info.account < 0 ||
        !terminal.ledger.has_check(uint32_t(info.account),
                                   CheckKind::OwnerCompared)) {
      sourced_checked = false;
      break;
    }
  }

  bool signer = has_signer_check(terminal, action, degraded);
  if (!sourced_checked && !signer) {
    Finding f;
    f.kind = FindingKind::Acpi;
    f.site = action.site;
    std::set<uint32_t> sources;
    for (uint32_t v : vars)
      if (a.var_info(v).account >= 0)
        sources.insert(uint32_t(a.var_info(v).account));
    f.unchecked_accounts.assign(sources.begin(), sources.end());
    f.confidence = degraded ? 0.5 : 1.0;
    f.evidence.push_back("cpi target is attacker-influenced (" +
                         std::to_string(vars.size()) + " free bytes)");
    f.evidence.push_back("no owner-checked source, no signer check");
    return f;
  }
  if (sourced_checked != signer)
    notes.push_back("cpi at site " + std::to_string(action.site) +
                    " guarded by only " +
                    (sourced_checked ? "an owner-checked source"
                                     : "a signer check") +
                    "; possible arbitrary invocation");
  return std::nullopt;
}

std::vector<Finding> Oracle::classify_state(const SymState& terminal,
                                            std::vector<std::string>& notes) {
  std::vector<Finding> out;
  if (terminal.status != sym::Status::Exited) return out;
  for (const std::string& n : terminal.ledger.notes) notes.push_back(n);
  for (const CriticalAction& action : terminal.actions) {
    std::optional<Finding> f =
        action.kind == CriticalAction::Kind::Cpi
            ? classify_cpi(terminal, action, notes)
            : classify_write(terminal, action, notes);
    if (!f) continue;
    // missing-signer exploits should demonstrate the unsigned transaction
    std::vector<ExprRef> extra;
    if (f->kind != FindingKind::Moc) {
      ExprArena& a = machine_.arena();
      for (const vm::AccountVars& acc : ctx_.accounts)
        extra.push_back(a.eq(acc.signer, a.constant(0, 8)));
    }
    f->exploit = synthesize_exploit(terminal, action, extra);
    out.push_back(std::move(*f));
  }
  return out;
}

}  // namespace solscan::oracles
