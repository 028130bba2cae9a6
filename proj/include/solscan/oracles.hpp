#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "solscan/concrete.hpp"
#include "solscan/input.hpp"
#include "solscan/machine.hpp"

namespace solscan::oracles {

enum class FindingKind : uint8_t { Msc, Moc, MocMsc, Acpi };
std::string finding_kind_name(FindingKind kind);

// Concrete transaction input plus the scripted environment responses
// (PDA results, callee effects) that make the replay deterministic.
struct Exploit {
  std::vector<uint8_t> input;
  vm::SyscallScript script;
  bool replay_ok = false;
};

struct Finding {
  FindingKind kind = FindingKind::Msc;
  uint64_t site = 0;
  std::vector<uint32_t> unchecked_accounts;  // sorted
  std::vector<std::string> evidence;
  double confidence = 1.0;  // 0.5 once any solver/re-execution degradation
  std::optional<Exploit> exploit;
};

struct OracleConfig {
  size_t reexec_step_limit = 200000;  // signer re-execution budget
  size_t reexec_state_cap = 256;      // post-divergence search width
  bool verify_replay = true;
};

// Classifies the critical actions of terminated paths. Stateless between
// paths except for the shared arena/solver inside the machine.
class Oracle {
 public:
  Oracle(sym::Machine& machine, const vm::TxContext& ctx,
         OracleConfig config = {})
      : machine_(machine), ctx_(ctx), config_(config) {}

  // All findings for a gracefully-exited path; low-confidence CPI notes
  // are appended to notes instead of becoming findings.
  std::vector<Finding> classify_state(const sym::SymState& terminal,
                                      std::vector<std::string>& notes);

  // Accounts bearing any trust mark at the time of the action; write
  // marks recorded after the action count only on gracefully-exited paths.
  std::set<uint32_t> checked_accounts(const vm::AccountLedger& ledger,
                                      const vm::CriticalAction& action,
                                      bool graceful) const;

  // False iff replaying the recorded path with every signer byte forced
  // to 0 still reaches the action site. Divergence at a branch that does
  // not inspect a signer byte yields true with degraded set.
  bool has_signer_check(const sym::SymState& terminal,
                        const vm::CriticalAction& action, bool& degraded);

  // True iff some account is signer-constrained-true on the path and its
  // key was validated against a constant or owner-checked data.
  bool has_authority(const sym::SymState& terminal);

  std::optional<Finding> classify_write(const sym::SymState& terminal,
                                        const vm::CriticalAction& action,
                                        std::vector<std::string>& notes);
  std::optional<Finding> classify_cpi(const sym::SymState& terminal,
                                      const vm::CriticalAction& action,
                                      std::vector<std::string>& notes);

  // Concretizes the path and packages input bytes plus environment
  // script; nullopt on solver timeout (finding stays unsynthesized).
  // extra constraints (e.g. signer bytes forced 0) are tried first and
  // dropped when they make the path unsatisfiable
  std::optional<Exploit> synthesize_exploit(
      const sym::SymState& terminal, const vm::CriticalAction& action,
      const std::vector<sym::ExprRef>& extra = {});

 private:
  sym::Machine& machine_;
  const vm::TxContext& ctx_;
  OracleConfig config_;
};

}  // namespace solscan::oracles
