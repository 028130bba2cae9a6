#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "solscan/asmbuilder.hpp"
#include "solscan/explore.hpp"
#include "solscan/fixtures.hpp"
#include "solscan/report.hpp"

using namespace solscan;
using explore::AnalysisConfig;
using explore::AnalysisResult;
using explore::Strategy;
using fixtures::Fixture;
using oracles::FindingKind;

namespace {

AnalysisConfig config_for(const Fixture& f) {
  AnalysisConfig c;
  c.max_accounts = f.accounts;
  c.max_data = f.max_data;
  c.seed = 7;
  c.strategy_budget_s = 120.0;
  c.global_timeout_s = 360.0;
  return c;
}

AnalysisResult analyze(const Fixture& f, AnalysisConfig c) {
  sym::ExprArena arena;
  sbpf::ProgramImage image = sbpf::load_program(f.elf);
  return explore::run_analysis(arena, image, c);
}

AnalysisResult analyze(const Fixture& f) { return analyze(f, config_for(f)); }

std::multiset<FindingKind> kinds_of(const AnalysisResult& r) {
  std::multiset<FindingKind> out;
  for (const oracles::Finding& f : r.findings) out.insert(f.kind);
  return out;
}

}  // namespace

TEST_CASE("strategy targets come from the static marks") {
  Fixture f = fixtures::dispatcher();
  sbpf::ProgramImage image = sbpf::load_program(f.elf);
  sbpf::Cfg cfg = sbpf::build_cfg(image);
  sbpf::StaticMarks marks = sbpf::compute_marks(image, cfg);
  CHECK(explore::compute_targets(Strategy::Cpi, marks) ==
        std::set<uint64_t>{f.sites.at("cpi")});
  std::set<uint64_t> main_targets =
      explore::compute_targets(Strategy::Main, marks);
  CHECK(main_targets.count(f.sites.at("pay")) == 1);
  CHECK(main_targets.count(f.sites.at("h_cpi")) == 1);
  CHECK(main_targets.count(f.sites.at("h_log")) == 1);
  CHECK(explore::compute_targets(Strategy::Random, marks).empty());
}

TEST_CASE("reachability covers direct, call, and return paths") {
  sbpf::AsmBuilder b;
  b.function("entrypoint");
  b.call("helper");
  b.call("wrapper");  // the target's function, reached after return
  b.exit();
  b.function("helper");
  b.mov64_imm(0, 0);
  b.exit();
  b.function("wrapper");
  b.label("target");
  b.mov64_imm(0, 1);
  b.exit();
  b.function("panic");
  b.syscall("sol_log_");
  b.syscall("abort");
  b.exit();
  uint64_t target = b.label_offset("target");
  uint64_t helper = b.label_offset("helper");
  uint64_t panic = b.label_offset("panic");
  sbpf::ProgramImage image = sbpf::load_program(b.finalize());
  sbpf::Cfg cfg = sbpf::build_cfg(image);
  explore::ReachabilityIndex idx = explore::build_reachability(cfg, {target});

  sym::SymState s;
  s.pc = 0;  // entry block calls into the target's function
  CHECK(explore::still_reachable(cfg, idx, s));
  s.pc = panic;  // aborting leaf, no path back
  CHECK(!explore::still_reachable(cfg, idx, s));
  // inside the helper the target is only reachable through the frame
  s.pc = helper;
  CHECK(!explore::still_reachable(cfg, idx, s));
  s.call_stack.push_back({8, {}, sym::kNoExpr});  // returns before call #2
  CHECK(explore::still_reachable(cfg, idx, s));
}

TEST_CASE("wallet with unchecked owner yields exactly one owner finding") {
  Fixture f = fixtures::level0_moc();
  AnalysisResult r = analyze(f);
  REQUIRE(r.findings.size() == 1);
  const oracles::Finding& fd = r.findings[0];
  CHECK(fd.kind == FindingKind::Moc);
  CHECK(fd.site == f.sites.at("transfer"));
  CHECK(fd.unchecked_accounts == std::vector<uint32_t>{0});
  REQUIRE(fd.exploit.has_value());
  CHECK(fd.exploit->replay_ok);
  CHECK(r.termination_reason == "exploration-complete");
}

TEST_CASE("vault without signer gate yields exactly one signer finding") {
  Fixture f = fixtures::level1_msc();
  AnalysisResult r = analyze(f);
  REQUIRE(r.findings.size() == 1);
  const oracles::Finding& fd = r.findings[0];
  CHECK(fd.kind == FindingKind::Msc);
  CHECK(fd.site == f.sites.at("withdraw"));
  REQUIRE(fd.exploit.has_value());
  CHECK(fd.exploit->replay_ok);
  // the exploit transaction carries no signature
  CHECK(fd.exploit->input[9] == 0);
}

TEST_CASE("raw proxy yields exactly one arbitrary-cpi finding") {
  Fixture f = fixtures::level4_acpi();
  AnalysisResult r = analyze(f);
  REQUIRE(r.findings.size() == 1);
  CHECK(r.findings[0].kind == FindingKind::Acpi);
  CHECK(r.findings[0].site == f.sites.at("cpi"));
  REQUIRE(r.findings[0].exploit.has_value());
  CHECK(r.findings[0].exploit->replay_ok);
}

TEST_CASE("fully-checked contract yields no findings") {
  AnalysisResult r = analyze(fixtures::clean());
  CHECK(r.findings.empty());
  CHECK(r.termination_reason == "exploration-complete");
}

TEST_CASE("rejoining signer branch is flagged; a genuine gate is not") {
  AnalysisResult vulnerable = analyze(fixtures::signer_rejoin(false));
  REQUIRE(vulnerable.findings.size() == 1);
  CHECK(vulnerable.findings[0].kind == FindingKind::Msc);

  AnalysisResult gated = analyze(fixtures::signer_rejoin(true));
  CHECK(gated.findings.empty());
}

TEST_CASE("a write to the account acts as an implicit owner check") {
  CHECK(analyze(fixtures::implicit_owner(true)).findings.empty());
  CHECK(analyze(fixtures::implicit_owner(false)).findings.empty());
}

TEST_CASE("cpi guard matrix") {
  CHECK(analyze(fixtures::acpi_constant_target()).findings.empty());

  AnalysisResult checked = analyze(fixtures::acpi_checked_data_target());
  CHECK(checked.findings.empty());
  bool noted = false;
  for (const std::string& n : checked.notes)
    if (n.find("guarded by only") != std::string::npos) noted = true;
  CHECK(noted);

  AnalysisResult raw = analyze(fixtures::level4_acpi());
  CHECK(kinds_of(raw) == std::multiset<FindingKind>{FindingKind::Acpi});
}

TEST_CASE("merge barrier folds the deserialization fan-out") {
  Fixture f = fixtures::merge_loop();
  for (uint32_t n : {1u, 3u}) {
    AnalysisConfig c = config_for(f);
    c.max_accounts = n;
    AnalysisResult merged = analyze(f, c);
    CHECK(merged.merge_stats.post_merge_states == 1);
    CHECK(merged.merge_stats.merge_peak == 8);  // folded every iteration

    c.merge = false;
    AnalysisResult unmerged = analyze(f, c);
    size_t expect = 1;
    for (uint32_t i = 0; i < n; ++i) expect *= 8;
    CHECK(unmerged.merge_stats.merge_peak == expect);
  }
}

TEST_CASE("pruned and unpruned runs find the same bugs") {
  for (const Fixture& f :
       {fixtures::dispatcher(), fixtures::level4_acpi(),
        fixtures::level1_msc()}) {
    AnalysisConfig c = config_for(f);
    AnalysisResult pruned = analyze(f, c);
    c.prune = false;
    AnalysisResult full = analyze(f, c);
    CHECK(kinds_of(pruned) == kinds_of(full));
    CHECK(pruned.total_steps <= full.total_steps);
  }
}

TEST_CASE("dispatcher arms are classified independently") {
  Fixture f = fixtures::dispatcher();
  AnalysisResult r = analyze(f);
  CHECK(kinds_of(r) ==
        std::multiset<FindingKind>{FindingKind::Msc, FindingKind::Acpi});
  for (const oracles::Finding& fd : r.findings) {
    uint64_t want =
        fd.kind == FindingKind::Msc ? f.sites.at("pay") : f.sites.at("cpi");
    CHECK(fd.site == want);
  }
}

TEST_CASE("formatted logging is skipped, branch-fed results are not") {
  Fixture pos = fixtures::format_log(false);
  sbpf::ProgramImage image = sbpf::load_program(pos.elf);
  sbpf::Cfg cfg = sbpf::build_cfg(image);
  CHECK(sbpf::compute_marks(image, cfg).skip_sites ==
        std::set<uint64_t>{pos.sites.at("fmtsite")});

  Fixture neg = fixtures::format_log(true);
  sbpf::ProgramImage nimage = sbpf::load_program(neg.elf);
  sbpf::Cfg ncfg = sbpf::build_cfg(nimage);
  CHECK(sbpf::compute_marks(nimage, ncfg).skip_sites.empty());

  AnalysisResult r = analyze(pos);  // completes because the call is stubbed
  REQUIRE(r.findings.size() == 1);
  CHECK(r.findings[0].kind == FindingKind::Msc);
  CHECK(r.findings[0].site == pos.sites.at("withdraw"));
}

TEST_CASE("identical seeds produce byte-identical reports") {
  Fixture f = fixtures::level0_moc();
  namespace fs = std::filesystem;
  fs::path base = fs::temp_directory_path() / "solscan_report_test";
  fs::remove_all(base);
  std::string hash = report::bytes_hash_hex(f.elf);
  for (int i = 0; i < 2; ++i) {
    AnalysisResult r = analyze(f);
    report::emit(base / std::to_string(i), f.name + ".so", hash,
                 config_for(f), r);
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string a = slurp(base / "0" / "report.json");
  CHECK(a == slurp(base / "1" / "report.json"));
  CHECK(a.find("missing-owner-check") != std::string::npos);
  CHECK(slurp(base / "0" / "exploit_0.bin") ==
        slurp(base / "1" / "exploit_0.bin"));

  std::string tsv = report::summarize(
      {base / "0" / "report.json", base / "1" / "report.json"});
  CHECK(tsv.find("missing-owner-check\t2") != std::string::npos);
  CHECK(tsv.find("clean\t0") != std::string::npos);
  fs::remove_all(base);
}
