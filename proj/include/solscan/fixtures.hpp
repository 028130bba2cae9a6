#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace solscan::fixtures {

// A self-contained test contract plus the analysis configuration it was
// authored against (offsets in the program text assume exactly this account
// count and data capacity).
struct Fixture {
  std::string name;
  std::vector<uint8_t> elf;
  uint32_t accounts = 2;
  uint32_t max_data = 16;
  // named program-text offsets (branch targets, action sites) for tests
  std::map<std::string, uint64_t> sites;
};

// Vulnerability-level analogues ----------------------------------------
// wallet: balance read from an owner-unchecked account feeds a payout
Fixture level0_moc();
// vault: owner-checked lamport withdrawal with no signer constraint
Fixture level1_msc();
// proxy: CPI whose target key comes straight from instruction data
Fixture level4_acpi();
// the same wallet/vault logic with every check in place
Fixture clean();

// Behavioural fixtures --------------------------------------------------
// deserialization loop forking on 3 boolean flags per account; run it
// with --max-accounts 1/3/10 to scale the pre-merge state count
Fixture merge_loop();
// branch on the signer flag that rejoins before the withdrawal (gated:
// the unsigned side aborts instead of rejoining)
Fixture signer_rejoin(bool gated);
// level0-style wallet that also writes the wallet account's data, either
// before or after the flagged read
Fixture implicit_owner(bool write_before);
// CPI guard matrix
Fixture acpi_constant_target();
Fixture acpi_checked_data_target();  // needs max_data >= 32
// digit-formatting helper on a symbolic value ahead of a planted
// missing-signer write; feeds_branch makes the caller inspect the result
Fixture format_log(bool feeds_branch);
// instruction-tag dispatcher with benign / missing-signer / raw-CPI arms
Fixture dispatcher();

std::vector<Fixture> all();

}  // namespace solscan::fixtures
