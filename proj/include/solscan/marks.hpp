#pragma once

#include <cstdint>
#include <optional>
#include <set>

#include "solscan/cfg.hpp"
#include "solscan/program.hpp"

namespace solscan::sbpf {

// CPI syscalls treated as critical-action sinks.
bool is_cpi_syscall(const std::string& name);
bool is_log_syscall(const std::string& name);

struct StaticMarks {
  // start address of the deserialization loop's exit-condition block
  std::optional<uint64_t> merge_point;
  std::set<uint64_t> dispatch_leaves;  // block start addresses
  std::set<uint64_t> cpi_sites;        // CPI syscall call-site addresses
  std::set<uint64_t> skip_sites;       // skippable format call-sites
};

// Search depth (callee levels below entry) for the 0xff comparison; the
// bound is tunable, deeper nests disable merging.
inline constexpr int kMergeSearchDepth = 3;

std::optional<uint64_t> find_deserialization_merge_point(
    const ProgramImage& image, const Cfg& cfg,
    int depth = kMergeSearchDepth);

std::set<uint64_t> find_dispatch_leaves(const ProgramImage& image,
                                        const Cfg& cfg);

std::set<uint64_t> find_cpi_sites(const ProgramImage& image);

std::set<uint64_t> find_format_skip_sites(const ProgramImage& image,
                                          const Cfg& cfg);

StaticMarks compute_marks(const ProgramImage& image, const Cfg& cfg);

}  // namespace solscan::sbpf
