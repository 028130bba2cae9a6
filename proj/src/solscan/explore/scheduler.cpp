#include <algorithm>

#include "solscan/explore.hpp"
#include "solscan/input.hpp"

namespace solscan::explore {

using sym::SymState;

Scheduler::Scheduler(sym::Machine& machine, const sbpf::Cfg& cfg,
                     const vm::TxContext& ctx, SchedulerConfig config,
                     std::set<uint64_t>& covered)
    : machine_(machine),
      cfg_(cfg),
      ctx_(ctx),
      config_(std::move(config)),
      covered_(covered),
      rng_(config_.seed) {
  if (!config_.targets.empty())
    index_ = build_reachability(cfg_, config_.targets);
}

void Scheduler::seed_state(SymState entry) {
  current_ = std::move(entry);
}

bool Scheduler::exhausted() const {
  return !current_ && deferred_.empty() && barrier_.empty();
}

size_t Scheduler::active_states() const {
  return (current_ ? 1 : 0) + deferred_.size() + barrier_.size();
}

// Five selection rules, in order: (1) keep the current state while its
// next instruction is uncovered; (2) take any deferred state sitting on
// uncovered code; (3) keep the current state while it is alive; (4) take
// the most recently forked deferred state; (5) take one at random.
std::optional<SymState> Scheduler::select_next() {
  if (current_ && !covered_.count(current_->pc)) return std::move(current_);
  auto take = [&](size_t i) {
    SymState s = std::move(deferred_[i]);
    deferred_.erase(deferred_.begin() + ptrdiff_t(i));
    if (current_) deferred_.push_back(std::move(*current_));
    current_.reset();
    return s;
  };
  for (size_t i = 0; i < deferred_.size(); ++i)
    if (!covered_.count(deferred_[i].pc)) return take(i);
  if (current_) return std::move(current_);
  if (deferred_.empty()) return std::nullopt;
  size_t newest = 0;
  for (size_t i = 1; i < deferred_.size(); ++i)
    if (deferred_[i].fork_ordinal > deferred_[newest].fork_ordinal)
      newest = i;
  if (deferred_[newest].fork_ordinal > 0) return take(newest);
  return take(rng_() % deferred_.size());
}

void Scheduler::flush_barrier() {
  stats_.merge_peak = std::max(stats_.merge_peak, barrier_.size());
  for (SymState& s : barrier_) vm::hybridize_lengths(machine_.arena(), s, ctx_);
  std::vector<SymState> released;
  if (config_.merge_enabled && barrier_.size() > 1) {
    if (auto merged = sym::merge_states(machine_.arena(), barrier_)) {
      released.push_back(std::move(*merged));
      ++stats_.merges;
    }
  }
  if (released.empty()) released = std::move(barrier_);
  barrier_.clear();
  stats_.post_merge_states = released.size();
  for (SymState& s : released) {
    if (current_)
      deferred_.push_back(std::move(s));
    else
      current_ = std::move(s);
  }
  enforce_cap();
}

void Scheduler::enforce_cap() {
  while (deferred_.size() > config_.deferred_cap) {
    size_t worst = 0;
    for (size_t i = 1; i < deferred_.size(); ++i)
      if (deferred_[i].constraints.size() > deferred_[worst].constraints.size())
        worst = i;
    deferred_.erase(deferred_.begin() + ptrdiff_t(worst));
    ++stats_.evicted;
  }
}

void Scheduler::dispose(SymState&& s) {
  if (config_.merge_point && s.pc == *config_.merge_point) {
    barrier_.push_back(std::move(s));
    return;
  }
  // states that already recorded an action are never pruned: their
  // classification still needs a graceful exit
  if (config_.prune_enabled && !config_.targets.empty() &&
      s.actions.empty() && !still_reachable(cfg_, index_, s)) {
    ++stats_.pruned;
    return;
  }
  if (current_)
    deferred_.push_back(std::move(s));
  else
    current_ = std::move(s);
}

void Scheduler::run_slice(std::function<bool()> out_of_time,
                          const TerminalFn& on_terminal) {
  bool keep_going = true;
  while (keep_going && !out_of_time()) {
    if (!current_ && deferred_.empty()) {
      if (barrier_.empty()) return;  // exhausted
      flush_barrier();
      continue;
    }
    std::optional<SymState> next = select_next();
    if (!next) {
      if (!barrier_.empty()) flush_barrier();
      continue;
    }
    covered_.insert(next->pc);
    ++stats_.steps;
    std::vector<SymState> succs = machine_.step(std::move(*next));
    current_.reset();
    if (succs.size() > 1) ++stats_.forks;
    for (SymState& s : succs) {
      if (!s.active()) {
        if (!on_terminal(std::move(s))) keep_going = false;
      } else {
        dispose(std::move(s));
      }
    }
    enforce_cap();
  }
}

}  // namespace solscan::explore
