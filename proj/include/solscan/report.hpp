#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "solscan/explore.hpp"

namespace solscan::report {

// FNV-1a 64 of the contract bytes, hex-encoded; the contract identity.
std::string bytes_hash_hex(const std::vector<uint8_t>& bytes);

// Writes report.json, coverage.tsv, and exploit_N.bin/.json files into
// dir (created if needed). Byte-identical for identical inputs.
void emit(const std::filesystem::path& dir, const std::string& contract_path,
          const std::string& contract_hash,
          const explore::AnalysisConfig& config,
          const explore::AnalysisResult& result);

// Corpus roll-up with overlap semantics (a contract counts once per kind
// it exhibits); consumes report.json files produced by emit.
std::string summarize(const std::vector<std::filesystem::path>& report_files);

}  // namespace solscan::report
