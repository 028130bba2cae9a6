#include <chrono>
#include <memory>
#include <ostream>
#include <tuple>

#include "solscan/explore.hpp"
#include "solscan/input.hpp"

namespace solscan::explore {

using sym::SymState;

AnalysisResult run_analysis(sym::ExprArena& arena,
                            const sbpf::ProgramImage& image,
                            const AnalysisConfig& config,
                            std::ostream* progress) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };

  sbpf::Cfg cfg = sbpf::build_cfg(image);
  sbpf::StaticMarks marks = sbpf::compute_marks(image, cfg);
  if (!config.format_skip) marks.skip_sites.clear();

  vm::TxContext ctx =
      vm::build_input(arena, config.max_accounts, config.max_data);
  sym::Solver solver(arena);
  sym::MachineConfig mcfg;
  mcfg.skip_sites = marks.skip_sites;
  sym::Machine machine(arena, solver, image, ctx.layout, mcfg);

  oracles::OracleConfig ocfg;
  ocfg.reexec_step_limit = config.reexec_step_limit;
  ocfg.verify_replay = config.verify_replay;
  oracles::Oracle oracle(machine, ctx, ocfg);

  AnalysisResult res;
  res.total_instructions = image.instructions.size();
  std::set<uint64_t> covered;
  std::set<std::tuple<int, uint64_t, std::vector<uint32_t>>> dedup;
  std::set<std::string> notes_seen;
  auto add_notes = [&](const std::vector<std::string>& ns) {
    for (const std::string& n : ns)
      if (notes_seen.insert(n).second) res.notes.push_back(n);
  };
  auto ratio = [&] {
    return res.total_instructions
               ? double(covered.size()) / double(res.total_instructions)
               : 0.0;
  };
  auto record_coverage = [&] {
    res.coverage.push_back({elapsed(), covered.size(), ratio()});
  };

  struct StrategyRun {
    Strategy strategy;
    std::unique_ptr<Scheduler> sched;
    bool exhausted = false;
    double seconds = 0;
  };
  std::vector<StrategyRun> runs;
  uint64_t salt = 0;
  for (Strategy st : {Strategy::Cpi, Strategy::Main, Strategy::Random}) {
    std::set<uint64_t> targets = compute_targets(st, marks);
    ++salt;
    if (st != Strategy::Random && targets.empty()) continue;  // skipped
    SchedulerConfig sc;
    sc.targets = std::move(targets);
    sc.merge_enabled = config.merge;
    sc.prune_enabled = config.prune;
    sc.merge_point = marks.merge_point;
    sc.deferred_cap = config.deferred_cap;
    sc.seed = config.seed * 1315423911ull + salt;
    StrategyRun run;
    run.strategy = st;
    run.sched = std::make_unique<Scheduler>(machine, cfg, ctx, sc, covered);
    run.sched->seed_state(vm::make_entry_state(arena, image, ctx));
    runs.push_back(std::move(run));
  }

  record_coverage();
  bool finding_limit_hit = false;
  while (res.termination_reason.empty()) {
    bool any_live = false;
    for (StrategyRun& run : runs) {
      if (run.exhausted) continue;
      if (elapsed() >= config.global_timeout_s) break;
      any_live = true;
      double slice_start = elapsed();
      double slice_end =
          std::min(slice_start + config.strategy_budget_s,
                   config.global_timeout_s);
      size_t tick = 0;
      run.sched->run_slice(
          [&] {
            if ((++tick & 0x3ff) == 0) record_coverage();
            return elapsed() >= slice_end;
          },
          [&](SymState&& terminal) {
            if (terminal.status != sym::Status::Exited ||
                terminal.actions.empty())
              return true;
            std::vector<std::string> notes;
            std::vector<oracles::Finding> found =
                oracle.classify_state(terminal, notes);
            add_notes(notes);
            bool fresh = false;
            for (oracles::Finding& f : found) {
              auto key = std::make_tuple(int(f.kind), f.site,
                                         f.unchecked_accounts);
              if (!dedup.insert(key).second) continue;
              res.findings.push_back(std::move(f));
              fresh = true;
            }
            if (config.finding_limit &&
                res.findings.size() >= config.finding_limit) {
              finding_limit_hit = true;
              return false;
            }
            // round-robin advances right after oracle evaluation
            return !fresh;
          });
      run.seconds += elapsed() - slice_start;
      if (run.sched->exhausted()) run.exhausted = true;
      record_coverage();
      if (progress)
        *progress << elapsed() << '\t' << strategy_name(run.strategy) << '\t'
                  << run.sched->active_states() << '\t' << ratio() << '\n';
      if (finding_limit_hit) break;
    }
    if (finding_limit_hit)
      res.termination_reason = "finding-limit";
    else if (elapsed() >= config.global_timeout_s)
      res.termination_reason = "global-timeout";
    else if (!any_live)
      res.termination_reason = "exploration-complete";
  }

  for (StrategyRun& run : runs) {
    res.strategy_seconds[strategy_name(run.strategy)] = run.seconds;
    res.total_steps += run.sched->stats().steps;
    res.total_pruned += run.sched->stats().pruned;
    if (run.sched->stats().merge_peak >= res.merge_stats.merge_peak)
      res.merge_stats = run.sched->stats();
  }
  res.coverage_final = ratio();
  size_t blocks_hit = 0;
  for (const sbpf::Block& b : cfg.blocks)
    if (covered.count(b.start)) ++blocks_hit;
  res.block_coverage =
      cfg.blocks.empty() ? 0.0 : double(blocks_hit) / double(cfg.blocks.size());
  record_coverage();
  return res;
}

}  // namespace solscan::explore
