// Command-line front end: single-contract and corpus analysis, plus a
// fixture emitter for testing and demos.
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "solscan/explore.hpp"
#include "solscan/fixtures.hpp"
#include "solscan/program.hpp"
#include "solscan/report.hpp"

namespace fs = std::filesystem;
using solscan::explore::AnalysisConfig;
using solscan::explore::AnalysisResult;

namespace {

std::vector<uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

bool looks_like_elf(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in && magic[0] == 0x7f && magic[1] == 'E' && magic[2] == 'L' &&
         magic[3] == 'F';
}

struct ContractOutcome {
  fs::path report_file;
  size_t findings = 0;
  bool load_failed = false;
  std::string error;
};

ContractOutcome analyze_one(const fs::path& contract, const fs::path& out_dir,
                            const AnalysisConfig& config) {
  ContractOutcome outcome;
  std::vector<uint8_t> bytes;
  try {
    bytes = read_file(contract);
    solscan::sym::ExprArena arena;
    solscan::sbpf::ProgramImage image = solscan::sbpf::load_program(bytes);
    AnalysisResult result = solscan::explore::run_analysis(arena, image,
                                                           config);
    solscan::report::emit(out_dir, contract.string(),
                          solscan::report::bytes_hash_hex(bytes), config,
                          result);
    outcome.report_file = out_dir / "report.json";
    outcome.findings = result.findings.size();
  } catch (const std::exception& e) {
    outcome.load_failed = true;
    outcome.error = e.what();
  }
  return outcome;
}

int run_analyze(const fs::path& path, const fs::path& out, unsigned jobs,
                const AnalysisConfig& config) {
  if (!fs::exists(path)) {
    std::cerr << "solscan: no such path: " << path << '\n';
    return 2;
  }

  if (fs::is_regular_file(path)) {
    ContractOutcome o = analyze_one(path, out, config);
    if (o.load_failed) {
      std::cerr << "solscan: " << path << ": " << o.error << '\n';
      return 2;
    }
    std::cout << "report: " << o.report_file.string() << " (" << o.findings
              << " finding" << (o.findings == 1 ? "" : "s") << ")\n";
    return o.findings ? 1 : 0;
  }

  // Directory mode: share-nothing worker pool over the corpus.
  std::vector<fs::path> contracts;
  for (const fs::directory_entry& e : fs::directory_iterator(path))
    if (e.is_regular_file() && looks_like_elf(e.path()))
      contracts.push_back(e.path());
  std::sort(contracts.begin(), contracts.end());
  if (contracts.empty()) {
    std::cerr << "solscan: no ELF files in " << path << '\n';
    return 2;
  }

  std::vector<ContractOutcome> outcomes(contracts.size());
  std::atomic<size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < contracts.size();
         i = next.fetch_add(1)) {
      outcomes[i] = analyze_one(contracts[i],
                                out / contracts[i].stem(), config);
      std::lock_guard<std::mutex> lk(io);
      if (outcomes[i].load_failed)
        std::cerr << "solscan: " << contracts[i] << ": "
                  << outcomes[i].error << '\n';
      else
        std::cout << contracts[i].filename().string() << ": "
                  << outcomes[i].findings << " finding"
                  << (outcomes[i].findings == 1 ? "" : "s") << '\n';
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::max(1u, jobs); ++t)
    pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::vector<fs::path> reports;
  size_t total_findings = 0;
  bool any_failed = false;
  for (const ContractOutcome& o : outcomes) {
    if (o.load_failed) {
      any_failed = true;
      continue;
    }
    reports.push_back(o.report_file);
    total_findings += o.findings;
  }
  if (!reports.empty()) {
    std::string table = solscan::report::summarize(reports);
    std::ofstream(out / "summary.tsv", std::ios::binary) << table;
    std::cout << table;
  }
  if (any_failed) return 2;
  return total_findings ? 1 : 0;
}

int run_fixtures(const fs::path& out) {
  fs::create_directories(out);
  for (const solscan::fixtures::Fixture& f : solscan::fixtures::all()) {
    fs::path p = out / (f.name + ".so");
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(f.elf.data()),
             std::streamsize(f.elf.size()));
    std::cout << p.string() << "\taccounts=" << f.accounts
              << "\tmax_data=" << f.max_data << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solscan: symbolic vulnerability scanner for Solana sBPF "
               "contracts"};
  app.require_subcommand(1);

  AnalysisConfig config;
  if (const char* solver = std::getenv("SOLSCAN_SOLVER"))
    config.solver = solver;

  std::string path, out = "solscan-out";
  unsigned jobs = 8;
  bool no_merge = false, no_prune = false, no_format_skip = false;

  CLI::App* analyze =
      app.add_subcommand("analyze", "analyze a contract or a corpus directory");
  analyze->add_option("path", path, "ELF file or directory of ELF files")
      ->required();
  analyze->add_option("--jobs", jobs, "parallel workers in directory mode")
      ->capture_default_str();
  analyze->add_option("--global-timeout", config.global_timeout_s,
                      "per-contract wall clock budget, seconds")->capture_default_str();
  analyze->add_option("--strategy-budget", config.strategy_budget_s,
                      "per-strategy slice budget, seconds")->capture_default_str();
  analyze->add_option("--max-accounts", config.max_accounts,
                      "account capacity of the symbolic transaction")->capture_default_str();
  analyze->add_option("--max-data", config.max_data,
                      "per-account data capacity, bytes")->capture_default_str();
  analyze->add_option("--seed", config.seed, "RNG seed; fixes all randomness")
      ->capture_default_str();
  analyze->add_option("--out", out, "report output directory")->capture_default_str();
  analyze->add_flag("--no-merge", no_merge, "disable state merging");
  analyze->add_flag("--no-prune", no_prune, "disable reachability pruning");
  analyze->add_flag("--no-format-skip", no_format_skip,
                    "disable formatted-logging call skipping");
  app.set_config("--config", "",
                 "config file with an [analyze] section of key = value "
                 "pairs; command-line flags take precedence");

  std::string fixture_out = "fixtures";
  CLI::App* fixtures =
      app.add_subcommand("fixtures", "emit the built-in fixture corpus");
  fixtures->add_option("out", fixture_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fixtures->parsed()) return run_fixtures(fixture_out);
    config.merge = !no_merge;
    config.prune = !no_prune;
    config.format_skip = !no_format_skip;
    return run_analyze(path, out, jobs, config);
  } catch (const std::exception& e) {
    std::cerr << "solscan: " << e.what() << '\n';
    return 2;
  }
}
