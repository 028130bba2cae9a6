// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and runs against the built-in
// fixture corpus.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "solscan/asmbuilder.hpp"
#include "solscan/concrete.hpp"
#include "solscan/explore.hpp"
#include "solscan/fixtures.hpp"
#include "solscan/input.hpp"
#include "solscan/isa.hpp"
#include "solscan/machine.hpp"
#include "solscan/marks.hpp"
#include "solscan/report.hpp"

using namespace solscan;
using explore::AnalysisConfig;
using explore::AnalysisResult;
using fixtures::Fixture;
using oracles::FindingKind;

namespace {

int g_failures = 0;
std::vector<const oracles::Finding*> g_all_findings;  // for criterion 6
std::vector<AnalysisResult> g_results;                // keeps findings alive

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

void criterion(int n, const std::string& title,
               const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  std::printf("criterion %d: %s — %s%s%s\n", n, c.ok ? "PASS" : "FAIL",
              title.c_str(), c.ok ? "" : ": ", c.why.c_str());
  std::fflush(stdout);
  if (!c.ok) ++g_failures;
}

AnalysisConfig config_for(const Fixture& f) {
  AnalysisConfig c;
  c.max_accounts = f.accounts;
  c.max_data = f.max_data;
  c.seed = 7;
  c.strategy_budget_s = 600.0;
  c.global_timeout_s = 1800.0;
  return c;
}

const AnalysisResult& analyze(const Fixture& f, AnalysisConfig c) {
  sym::ExprArena arena;
  sbpf::ProgramImage image = sbpf::load_program(f.elf);
  g_results.push_back(explore::run_analysis(arena, image, c));
  for (const oracles::Finding& fd : g_results.back().findings)
    g_all_findings.push_back(&fd);
  return g_results.back();
}

const AnalysisResult& analyze(const Fixture& f) {
  return analyze(f, config_for(f));
}

std::multiset<FindingKind> kinds_of(const AnalysisResult& r) {
  std::multiset<FindingKind> out;
  for (const oracles::Finding& f : r.findings) out.insert(f.kind);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  criterion(1, "fixture detection matrix", [](Check& c) {
    struct Row {
      Fixture f;
      std::multiset<FindingKind> want;
    };
    std::vector<Row> rows;
    rows.push_back({fixtures::level0_moc(), {FindingKind::Moc}});
    rows.push_back({fixtures::level1_msc(), {FindingKind::Msc}});
    rows.push_back({fixtures::level4_acpi(), {FindingKind::Acpi}});
    rows.push_back({fixtures::clean(), {}});
    for (const Row& row : rows) {
      auto t0 = std::chrono::steady_clock::now();
      const AnalysisResult& r = analyze(row.f);
      double el = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      c.expect(kinds_of(r) == row.want, row.f.name + ": wrong finding set");
      c.expect(r.termination_reason == "exploration-complete",
               row.f.name + ": did not complete");
      c.expect(el < 600.0, row.f.name + ": exceeded one strategy budget");
    }
  });

  criterion(2, "state-merge reduction at the merge point", [](Check& c) {
    Fixture f = fixtures::merge_loop();
    for (uint32_t n : {1u, 3u, 10u}) {
      AnalysisConfig cfg = config_for(f);
      cfg.max_accounts = n;
      const AnalysisResult& merged = analyze(f, cfg);
      c.expect(merged.merge_stats.post_merge_states == 1,
               "post-merge count != 1 at n=" + std::to_string(n));
      if (n > 3) continue;  // exhaustive count only required for n <= 3
      cfg.merge = false;
      const AnalysisResult& unmerged = analyze(f, cfg);
      size_t expect = 1;
      for (uint32_t i = 0; i < n; ++i) expect *= 8;
      c.expect(unmerged.merge_stats.merge_peak == expect,
               "no-merge peak != 8^n at n=" + std::to_string(n));
    }
  });

  criterion(3, "signer re-execution distinguishes rejoin from gate",
            [](Check& c) {
              const AnalysisResult& rejoin =
                  analyze(fixtures::signer_rejoin(false));
              c.expect(kinds_of(rejoin) ==
                           std::multiset<FindingKind>{FindingKind::Msc},
                       "rejoining branch not flagged as MSC");
              const AnalysisResult& gated =
                  analyze(fixtures::signer_rejoin(true));
              c.expect(gated.findings.empty(),
                       "genuine signer gate still flagged");
            });

  criterion(4, "implicit owner check via account write", [](Check& c) {
    c.expect(analyze(fixtures::implicit_owner(true)).findings.empty(),
             "write before the read still flagged");
    c.expect(analyze(fixtures::implicit_owner(false)).findings.empty(),
             "write after the read still flagged");
  });

  criterion(5, "arbitrary-cpi guard matrix", [](Check& c) {
    c.expect(analyze(fixtures::acpi_constant_target()).findings.empty(),
             "constant target flagged");
    const AnalysisResult& checked =
        analyze(fixtures::acpi_checked_data_target());
    c.expect(checked.findings.empty(), "owner-checked data target flagged");
    bool noted = false;
    for (const std::string& n : checked.notes)
      if (n.find("guarded by only") != std::string::npos) noted = true;
    c.expect(noted, "single-guard CPI produced no note");
    c.expect(kinds_of(analyze(fixtures::level4_acpi())) ==
                 std::multiset<FindingKind>{FindingKind::Acpi},
             "raw target not flagged");
  });

  criterion(6, "100% exploit replay fidelity", [](Check& c) {
    c.expect(!g_all_findings.empty(), "no findings were produced upstream");
    for (const oracles::Finding* f : g_all_findings) {
      c.expect(f->exploit.has_value(),
               "finding without a synthesized exploit");
      if (f->exploit)
        c.expect(f->exploit->replay_ok, "exploit replay missed its site");
    }
  });

  criterion(7, "pruning keeps findings and visits fewer states",
            [](Check& c) {
              Fixture f = fixtures::dispatcher();
              AnalysisConfig cfg = config_for(f);
              const AnalysisResult& pruned = analyze(f, cfg);
              cfg.prune = false;
              const AnalysisResult& full = analyze(f, cfg);
              auto sites = [](const AnalysisResult& r) {
                std::multiset<std::pair<int, uint64_t>> s;
                for (const oracles::Finding& fd : r.findings)
                  s.insert({int(fd.kind), fd.site});
                return s;
              };
              c.expect(sites(pruned) == sites(full),
                       "finding sets differ under pruning");
              c.expect(pruned.total_pruned > 0, "nothing was pruned");
              c.expect(pruned.total_steps < full.total_steps,
                       "pruned run did not visit strictly fewer states");
            });

  criterion(8, "decoder identity and concrete agreement", [](Check& c) {
    // encode(decode(bytes)) == bytes over >= 1e5 random legal instructions
    std::vector<uint8_t> ops;
    for (int op = 0; op < 256; ++op)
      if (sbpf::opcode_legal(uint8_t(op))) ops.push_back(uint8_t(op));
    std::mt19937_64 rng(0xacce97);
    int rounds = 0;
    for (int i = 0; i < 120000; ++i, ++rounds) {
      uint8_t opcode = ops[rng() % ops.size()];
      std::vector<uint8_t> bytes(opcode == sbpf::kOpLddw ? 16 : 8, 0);
      bytes[0] = opcode;
      bytes[1] = uint8_t((rng() % 11) | ((rng() % 11) << 4));
      for (size_t k = 2; k < 8; ++k) bytes[k] = uint8_t(rng());
      if (opcode == sbpf::kOpLddw)
        for (size_t k = 12; k < 16; ++k) bytes[k] = uint8_t(rng());
      sbpf::Instruction insn = sbpf::decode(
          bytes.data(), opcode == sbpf::kOpLddw ? bytes.data() + 8 : nullptr,
          (rng() % 4096) * 8);
      if (sbpf::encode(insn) != bytes) {
        c.expect(false, "roundtrip mismatch for opcode " +
                            std::to_string(opcode));
        break;
      }
    }
    c.expect(rounds >= 100000, "fewer than 1e5 instructions exercised");

    // instruction-for-instruction agreement with the reference interpreter
    for (const Fixture& f : fixtures::all()) {
      sym::ExprArena arena;
      sym::Solver solver(arena);
      sbpf::ProgramImage image = sbpf::load_program(f.elf);
      vm::TxContext ctx = vm::build_input(arena, f.accounts, f.max_data);
      sym::Machine machine(arena, solver, image, ctx.layout);

      // steer one feasible path to a terminal, then pin its model
      sym::SymState s = vm::make_entry_state(arena, image, ctx);
      size_t guard = 0;
      while (s.active() && guard++ < 4000) {
        std::vector<sym::SymState> succs = machine.step(std::move(s));
        size_t pick = 0;
        for (size_t i = 0; i < succs.size(); ++i)
          if (succs[i].active()) pick = i;
        s = std::move(succs[pick]);
      }
      c.expect(guard < 4000, f.name + ": steering did not terminate");
      c.expect(solver.check(s.constraints) == sym::SatVerdict::Yes,
               f.name + ": steered path unsatisfiable");
      if (!c.ok) break;
      std::vector<uint64_t> asg = solver.model_assignment();
      asg.resize(arena.var_count(), 0);
      std::vector<uint8_t> input = vm::serialize_input(arena, ctx, asg);

      sym::SymState replay = vm::make_entry_state(arena, image, ctx);
      auto init = std::make_shared<std::vector<sym::ExprRef>>();
      for (uint8_t v : input) init->push_back(arena.constant(v, 8));
      replay.region(sym::Region::Input).init = init;
      replay.constraints.clear();
      std::vector<uint64_t> sym_trace;
      guard = 0;
      bool single = true;
      while (replay.active() && guard++ < 20000) {
        sym_trace.push_back(replay.pc);
        std::vector<sym::SymState> succs = machine.step(std::move(replay));
        if (succs.size() != 1) {
          single = false;
          break;
        }
        replay = std::move(succs[0]);
      }
      c.expect(single, f.name + ": concrete input still forked");
      vm::ConcreteResult ref = vm::run_concrete(image, input);
      c.expect(sym_trace == ref.pc_trace,
               f.name + ": engines diverged instruction-for-instruction");
      bool sym_exit = replay.status == sym::Status::Exited;
      c.expect(sym_exit == (ref.end == vm::ConcreteResult::End::Exited),
               f.name + ": end states differ");
      if (sym_exit)
        c.expect(arena.const_value(replay.regs[0]) == ref.r0,
                 f.name + ": r0 differs");
      if (!c.ok) break;
    }
  });

  criterion(9, "format-skip rescues the logging bottleneck", [](Check& c) {
    Fixture pos = fixtures::format_log(false);
    {
      sbpf::ProgramImage image = sbpf::load_program(pos.elf);
      sbpf::Cfg cfg = sbpf::build_cfg(image);
      c.expect(sbpf::compute_marks(image, cfg).skip_sites ==
                   std::set<uint64_t>{pos.sites.at("fmtsite")},
               "formatting call site not skipped");
    }
    {
      Fixture neg = fixtures::format_log(true);
      sbpf::ProgramImage image = sbpf::load_program(neg.elf);
      sbpf::Cfg cfg = sbpf::build_cfg(image);
      c.expect(sbpf::compute_marks(image, cfg).skip_sites.empty(),
               "branch-fed formatting call was skipped");
    }
    const AnalysisResult& skipped = analyze(pos);
    c.expect(kinds_of(skipped) ==
                 std::multiset<FindingKind>{FindingKind::Msc},
             "planted MSC not found with skipping");
    c.expect(skipped.termination_reason == "exploration-complete",
             "skipping run did not complete");

    AnalysisConfig cfg = config_for(pos);
    cfg.format_skip = false;
    cfg.global_timeout_s = 60.0;
    const AnalysisResult& stuck = analyze(pos, cfg);
    c.expect(stuck.findings.empty(),
             "action reached within the 60s mini-budget without skipping");
    c.expect(stuck.termination_reason == "global-timeout",
             "unskipped run ended for another reason");
  });

  criterion(10, "byte-identical reports for identical seeds", [](Check& c) {
    namespace fs = std::filesystem;
    Fixture f = fixtures::level0_moc();
    fs::path base = fs::temp_directory_path() / "solscan_acceptance";
    fs::remove_all(base);
    std::string hash = report::bytes_hash_hex(f.elf);
    for (int i = 0; i < 2; ++i)
      report::emit(base / std::to_string(i), f.name + ".so", hash,
                   config_for(f), analyze(f));
    c.expect(slurp(base / "0" / "report.json") ==
                 slurp(base / "1" / "report.json"),
             "report.json differs between identical runs");
    c.expect(!slurp(base / "0" / "report.json").empty(),
             "report.json is empty");
    c.expect(slurp(base / "0" / "exploit_0.bin") ==
                 slurp(base / "1" / "exploit_0.bin"),
             "exploit bytes differ between identical runs");
    fs::remove_all(base);
  });

  return g_failures == 0 ? 0 : 1;
}
