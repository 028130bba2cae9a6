#include "solscan/report.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace solscan::report {

using nlohmann::json;

std::string bytes_hash_hex(const std::vector<uint8_t>& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string hex(const std::vector<uint8_t>& bytes) {
  static const char* d = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s += d[b >> 4];
    s += d[b & 15];
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(data.data(), std::streamsize(data.size()));
}

json config_json(const explore::AnalysisConfig& c) {
  return json{{"max_accounts", c.max_accounts},
              {"max_data", c.max_data},
              {"strategy_budget_s", c.strategy_budget_s},
              {"global_timeout_s", c.global_timeout_s},
              {"merge", c.merge},
              {"prune", c.prune},
              {"format_skip", c.format_skip},
              {"solver", c.solver}};
}

}  // namespace

void emit(const std::filesystem::path& dir, const std::string& contract_path,
          const std::string& contract_hash,
          const explore::AnalysisConfig& config,
          const explore::AnalysisResult& result) {
  std::filesystem::create_directories(dir);

  json findings = json::array();
  size_t exploit_idx = 0;
  for (const oracles::Finding& f : result.findings) {
    json jf{{"kind", oracles::finding_kind_name(f.kind)},
            {"site", f.site},
            {"unchecked_accounts", f.unchecked_accounts},
            {"evidence", f.evidence},
            {"confidence", f.confidence}};
    if (f.exploit) {
      std::string stem = "exploit_" + std::to_string(exploit_idx++);
      jf["exploit_file"] = stem + ".bin";
      write_file(dir / (stem + ".bin"),
                 std::string(f.exploit->input.begin(),
                             f.exploit->input.end()));
      json sidecar{{"site", f.site},
                   {"replay_verified", f.exploit->replay_ok},
                   {"pda_results", json::array()},
                   {"cpi_effects", json::array()}};
      for (const auto& pda : f.exploit->script.pda_results)
        sidecar["pda_results"].push_back(
            hex({pda.begin(), pda.end()}));
      for (const auto& invoke : f.exploit->script.cpi_effects) {
        json writes = json::array();
        for (const auto& w : invoke)
          writes.push_back({{"address", w.address}, {"bytes", hex(w.bytes)}});
        sidecar["cpi_effects"].push_back(writes);
      }
      write_file(dir / (stem + ".json"), sidecar.dump(2) + "\n");
    } else {
      jf["evidence"].push_back("exploit unsynthesized (solver timeout)");
    }
    findings.push_back(std::move(jf));
  }

  json root{{"schema_version", 1},
            {"contract", {{"path", contract_path}, {"hash", contract_hash}}},
            {"config", config_json(config)},
            {"seed", config.seed},
            {"findings", findings},
            {"notes", result.notes},
            {"coverage_final", result.coverage_final},
            {"termination_reason", result.termination_reason}};
  write_file(dir / "report.json", root.dump(2) + "\n");

  std::ostringstream tsv;
  tsv << "elapsed_seconds\tinstructions_covered\tratio\n";
  for (const explore::CoveragePoint& p : result.coverage)
    tsv << p.elapsed_seconds << '\t' << p.instructions_covered << '\t'
        << p.ratio << '\n';
  write_file(dir / "coverage.tsv", tsv.str());
}

std::string summarize(
    const std::vector<std::filesystem::path>& report_files) {
  const char* kinds[] = {"missing-signer-check", "missing-owner-check",
                         "missing-owner-and-signer-check", "arbitrary-cpi"};
  std::map<std::string, size_t> per_kind;
  for (const char* k : kinds) per_kind[k] = 0;
  size_t clean = 0, total = 0;
  for (const std::filesystem::path& p : report_files) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    json r = json::parse(in);
    ++total;
    std::set<std::string> seen;
    for (const json& f : r.at("findings"))
      seen.insert(f.at("kind").get<std::string>());
    if (seen.empty()) ++clean;
    for (const std::string& k : seen) ++per_kind[k];  // overlap semantics
  }
  std::ostringstream tsv;
  tsv << "kind\tcontracts\n";
  for (const char* k : kinds) tsv << k << '\t' << per_kind[k] << '\n';
  tsv << "clean\t" << clean << '\n';
  tsv << "total\t" << total << '\n';
  return tsv.str();
}

}  // namespace solscan::report
