#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "solscan/cfg.hpp"
#include "solscan/machine.hpp"
#include "solscan/marks.hpp"
#include "solscan/oracles.hpp"

namespace solscan::explore {

enum class Strategy : uint8_t { Cpi, Main, Random };
std::string strategy_name(Strategy s);

// cpi -> CPI call sites, main -> dispatch leaves, random -> unrestricted
std::set<uint64_t> compute_targets(Strategy strategy,
                                   const sbpf::StaticMarks& marks);

// Conservative target reachability over the block graph plus call edges.
struct ReachabilityIndex {
  std::set<uint32_t> reaching_blocks;  // block ids that can reach a target
};

ReachabilityIndex build_reachability(const sbpf::Cfg& cfg,
                                     const std::set<uint64_t>& targets);

// True iff the state's block reaches a target, or some call-stack frame
// returns into a block that does.
bool still_reachable(const sbpf::Cfg& cfg, const ReachabilityIndex& index,
                     const sym::SymState& state);

struct SchedulerConfig {
  std::set<uint64_t> targets;  // empty = no pruning possible
  bool merge_enabled = true;
  bool prune_enabled = true;
  std::optional<uint64_t> merge_point;
  size_t deferred_cap = 10000;
  uint64_t seed = 0;
};

struct SchedulerStats {
  size_t steps = 0;
  size_t forks = 0;
  size_t pruned = 0;
  size_t evicted = 0;
  size_t merges = 0;
  // barrier occupancy when the deserialization merge point released
  size_t merge_peak = 0;
  size_t post_merge_states = 0;  // states leaving the final release
};

// Single-strategy exploration: five-rule state selection, reachability
// pruning, and the merge barrier at the deserialization merge point.
class Scheduler {
 public:
  Scheduler(sym::Machine& machine, const sbpf::Cfg& cfg,
            const vm::TxContext& ctx, SchedulerConfig config,
            std::set<uint64_t>& covered);

  void seed_state(sym::SymState entry);

  // Steps until the deadline, exhaustion, or the terminal callback
  // returns false; terminal states are reported exactly once.
  using TerminalFn = std::function<bool(sym::SymState&&)>;
  void run_slice(std::function<bool()> out_of_time, const TerminalFn& on_terminal);

  bool exhausted() const;
  size_t active_states() const;
  const SchedulerStats& stats() const { return stats_; }

 private:
  std::optional<sym::SymState> select_next();
  void dispose(sym::SymState&& s);
  void flush_barrier();
  void enforce_cap();

  sym::Machine& machine_;
  const sbpf::Cfg& cfg_;
  const vm::TxContext& ctx_;
  SchedulerConfig config_;
  ReachabilityIndex index_;
  std::set<uint64_t>& covered_;
  std::optional<sym::SymState> current_;
  std::vector<sym::SymState> deferred_;
  std::vector<sym::SymState> barrier_;
  std::mt19937_64 rng_;
  SchedulerStats stats_;
};

struct AnalysisConfig {
  uint32_t max_accounts = 10;
  uint32_t max_data = 1024;
  uint64_t seed = 0;
  double strategy_budget_s = 600.0;
  double global_timeout_s = 7200.0;
  size_t finding_limit = 0;  // 0 = unlimited
  size_t deferred_cap = 10000;
  bool merge = true;
  bool prune = true;
  bool format_skip = true;
  bool verify_replay = true;
  size_t reexec_step_limit = 200000;
  std::string solver = "builtin";  // SOLSCAN_SOLVER override, report-recorded
};

struct CoveragePoint {
  double elapsed_seconds = 0;
  size_t instructions_covered = 0;
  double ratio = 0;
};

struct AnalysisResult {
  std::vector<oracles::Finding> findings;
  std::vector<std::string> notes;
  std::vector<CoveragePoint> coverage;
  double coverage_final = 0;
  double block_coverage = 0;
  std::string termination_reason;  // exploration-complete | global-timeout
                                   // | finding-limit
  std::map<std::string, double> strategy_seconds;
  SchedulerStats merge_stats;  // from the strategy owning the barrier
  size_t total_instructions = 0;
  size_t total_steps = 0;   // across strategies
  size_t total_pruned = 0;  // states rejected by reachability pruning
};

// Full per-contract pipeline: static marks, strategy round-robin, oracle
// classification, exploit synthesis. progress (optional) receives
// tab-separated lines: elapsed, strategy, active, deferred, ratio.
AnalysisResult run_analysis(sym::ExprArena& arena,
                            const sbpf::ProgramImage& image,
                            const AnalysisConfig& config,
                            std::ostream* progress = nullptr);

}  // namespace solscan::explore
