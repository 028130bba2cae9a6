#include "solscan/ledger.hpp"

#include <set>

#include "solscan/state.hpp"

namespace solscan::vm {

std::string check_kind_name(CheckKind kind) {
  switch (kind) {
    case CheckKind::OwnerCompared: return "owner-compared";
    case CheckKind::KeyVsConstant: return "key-vs-constant";
    case CheckKind::DataWritten: return "data-written";
    case CheckKind::PdaDerived: return "pda-derived";
  }
  return "?";
}

FieldRef InputLayout::locate(uint64_t offset) const {
  if (offset < kHeaderSize) return {-1, AccountField::None, uint32_t(offset)};
  if (offset >= instr_len_offset()) {
    if (offset < instr_data_offset())
      return {-1, AccountField::InstrLen,
              uint32_t(offset - instr_len_offset())};
    if (offset < program_id_offset())
      return {-1, AccountField::InstrData,
              uint32_t(offset - instr_data_offset())};
    if (offset < total_size())
      return {-1, AccountField::ProgramId,
              uint32_t(offset - program_id_offset())};
    return {-1, AccountField::None, 0};
  }
  uint64_t rel = offset - kHeaderSize;
  int32_t account = int32_t(rel / account_footprint());
  rel %= account_footprint();
  auto at = [&](AccountField f, uint64_t field_off) {
    return FieldRef{account, f, uint32_t(rel - field_off)};
  };
  if (rel == kMarkerOff) return at(AccountField::Marker, kMarkerOff);
  if (rel == kSignerOff) return at(AccountField::Signer, kSignerOff);
  if (rel == kWritableOff) return at(AccountField::Writable, kWritableOff);
  if (rel == kExecutableOff)
    return at(AccountField::Executable, kExecutableOff);
  if (rel < kKeyOff) return at(AccountField::Pad, 4);
  if (rel < kOwnerOff) return at(AccountField::Key, kKeyOff);
  if (rel < kLamportsOff) return at(AccountField::Owner, kOwnerOff);
  if (rel < kDataLenOff) return at(AccountField::Lamports, kLamportsOff);
  if (rel < kDataOff) return at(AccountField::DataLen, kDataLenOff);
  if (rel < kDataOff + max_data) return at(AccountField::Data, kDataOff);
  if (rel >= account_footprint() - 8)
    return at(AccountField::RentEpoch, account_footprint() - 8);
  return at(AccountField::Pad, kDataOff + max_data);
}

void on_memory_event(const InputLayout& layout, sym::SymState& state,
                     uint64_t offset, uint32_t width, bool is_write,
                     uint64_t site) {
  AccountLedger& ledger = state.ledger;
  ++ledger.seq;
  // one event per touched (account, field) pair
  std::set<std::pair<int32_t, AccountField>> touched;
  for (uint32_t i = 0; i < width; ++i) {
    FieldRef ref = layout.locate(offset + i);
    if (ref.account < 0 || ref.account >= int32_t(ledger.n_accounts))
      continue;
    touched.insert({ref.account, ref.field});
  }
  for (auto [account, field] : touched) {
    if (!is_write) {
      uint8_t flag = 0;
      switch (field) {
        case AccountField::Key: flag = kReadKey; break;
        case AccountField::Owner: flag = kReadOwner; break;
        case AccountField::Data: flag = kReadData; break;
        case AccountField::Lamports: flag = kReadLamports; break;
        default: break;
      }
      ledger.read_flags[account] |= flag;
      continue;
    }
    ledger.writes.push_back(
        {uint32_t(account), field, site, ledger.seq});
    if (field != AccountField::Data && field != AccountField::Lamports)
      continue;
    if (field == AccountField::Data)
      ledger.add_check(uint32_t(account), CheckKind::DataWritten, site);
    bool already = false;  // one action per (site, path)
    for (const CriticalAction& a : state.actions)
      if (a.kind == CriticalAction::Kind::AccountWrite && a.site == site &&
          a.account == account)
        already = true;
    if (already) continue;
    CriticalAction action;
    action.kind = CriticalAction::Kind::AccountWrite;
    action.site = site;
    action.account = account;
    action.field = field;
    action.seq = ledger.seq;
    action.trace_len = state.trace.size();
    state.actions.push_back(std::move(action));
  }
}

void on_branch_event(sym::ExprArena& arena, sym::SymState& state,
                     sym::ExprRef cond, uint64_t site) {
  AccountLedger& ledger = state.ledger;
  std::vector<uint32_t> vars;
  arena.collect_vars(cond, vars);
  if (vars.empty()) return;

  std::set<int32_t> key_accounts, owner_accounts, data_accounts;
  bool pda_present = false;
  bool other_present = false;
  for (uint32_t id : vars) {
    const sym::VarInfo& info = arena.var_info(id);
    switch (info.field) {
      case sym::VarField::Owner: owner_accounts.insert(info.account); break;
      case sym::VarField::Key: key_accounts.insert(info.account); break;
      case sym::VarField::Data: data_accounts.insert(info.account); break;
      case sym::VarField::Pda: pda_present = true; break;
      case sym::VarField::Signer:
        if (info.account >= 0 &&
            info.account < int32_t(ledger.n_accounts))
          ledger.signer_seen[info.account] = 1;
        break;
      default: other_present = true; break;
    }
  }

  for (int32_t a : owner_accounts)
    if (a >= 0 && a < int32_t(ledger.n_accounts))
      ledger.add_check(uint32_t(a), CheckKind::OwnerCompared, site);

  for (int32_t a : key_accounts) {
    if (a < 0 || a >= int32_t(ledger.n_accounts)) continue;
    if (pda_present) {
      ledger.add_check(uint32_t(a), CheckKind::PdaDerived, site);
      continue;
    }
    bool vs_other_key = key_accounts.size() > 1;
    if (!vs_other_key && data_accounts.empty() && owner_accounts.empty() &&
        !other_present) {
      // key against constants only
      ledger.add_check(uint32_t(a), CheckKind::KeyVsConstant, site);
      continue;
    }
    bool trusted_source = false;
    for (int32_t d : data_accounts)
      if (d >= 0 && ledger.has_check(uint32_t(d), CheckKind::OwnerCompared))
        trusted_source = true;
    if (trusted_source) {
      ledger.add_check(uint32_t(a), CheckKind::KeyVsConstant, site);
    } else {
      ledger.notes.push_back("weak key check: account " + std::to_string(a) +
                             " key compared against untrusted data at site " +
                             std::to_string(site));
    }
  }
  ++ledger.seq;
}

}  // namespace solscan::vm
