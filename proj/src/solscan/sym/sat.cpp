#include "solscan/sat.hpp"

#include <algorithm>
#include <cmath>

namespace solscan::sat {

uint32_t SatSolver::new_var() {
  uint32_t v = static_cast<uint32_t>(assigns_.size());
  assigns_.push_back(kUndef);
  reason_.push_back(-1);
  level_.push_back(0);
  activity_.push_back(0);
  phase_.push_back(false);
  seen_.push_back(false);
  watches_.emplace_back();
  watches_.emplace_back();
  return v;
}

bool SatSolver::add_clause(std::vector<Lit> clause) {
  if (!ok_) return false;
  std::sort(clause.begin(), clause.end());
  clause.erase(std::unique(clause.begin(), clause.end()), clause.end());
  std::vector<Lit> out;
  for (size_t i = 0; i < clause.size(); ++i) {
    Lit l = clause[i];
    if (i + 1 < clause.size() && clause[i + 1] == neg_lit(l)) return true;
    if (value(l) == kTrue && level_[lit_var(l)] == 0) return true;
    if (value(l) == kFalse && level_[lit_var(l)] == 0) continue;
    out.push_back(l);
  }
  if (out.empty()) {
    ok_ = false;
    return false;
  }
  if (out.size() == 1) {
    if (value(out[0]) == kFalse) {
      ok_ = false;
      return false;
    }
    if (value(out[0]) == kUndef) enqueue(out[0], -1);
    if (propagate() != -1) {
      ok_ = false;
      return false;
    }
    return true;
  }
  clauses_.push_back(Clause{std::move(out), false, 0});
  attach(static_cast<uint32_t>(clauses_.size() - 1));
  return true;
}

void SatSolver::attach(uint32_t ci) {
  const Clause& c = clauses_[ci];
  watches_[neg_lit(c.lits[0])].push_back({ci, c.lits[1]});
  watches_[neg_lit(c.lits[1])].push_back({ci, c.lits[0]});
}

void SatSolver::enqueue(Lit l, int32_t reason) {
  uint32_t v = lit_var(l);
  assigns_[v] = lit_sign(l) ? kFalse : kTrue;
  reason_[v] = reason;
  level_[v] = decision_level();
  trail_.push_back(l);
}

int32_t SatSolver::propagate() {
  while (qhead_ < trail_.size()) {
    Lit p = trail_[qhead_++];
    std::vector<Watcher>& ws = watches_[p];
    size_t keep = 0;
    for (size_t i = 0; i < ws.size(); ++i) {
      Watcher w = ws[i];
      if (value(w.blocker) == kTrue) {
        ws[keep++] = w;
        continue;
      }
      Clause& c = clauses_[w.clause];
      Lit false_lit = neg_lit(p);
      if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
      if (value(c.lits[0]) == kTrue) {
        ws[keep++] = {w.clause, c.lits[0]};
        continue;
      }
      bool found = false;
      for (size_t k = 2; k < c.lits.size(); ++k) {
        if (value(c.lits[k]) != kFalse) {
          std::swap(c.lits[1], c.lits[k]);
          watches_[neg_lit(c.lits[1])].push_back({w.clause, c.lits[0]});
          found = true;
          break;
        }
      }
      if (found) continue;
      ws[keep++] = {w.clause, c.lits[0]};
      if (value(c.lits[0]) == kFalse) {
        // conflict: restore remaining watchers
        for (size_t j = i + 1; j < ws.size(); ++j) ws[keep++] = ws[j];
        ws.resize(keep);
        qhead_ = trail_.size();
        return static_cast<int32_t>(w.clause);
      }
      enqueue(c.lits[0], static_cast<int32_t>(w.clause));
    }
    ws.resize(keep);
  }
  return -1;
}

void SatSolver::bump_var(uint32_t v) {
  activity_[v] += var_inc_;
  if (activity_[v] > 1e100) {
    for (double& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
}

void SatSolver::decay_var_activity() { var_inc_ /= 0.95; }

void SatSolver::analyze(int32_t confl, std::vector<Lit>& learnt,
                        int& backtrack_level) {
  learnt.clear();
  learnt.push_back(0);  // placeholder for the asserting literal
  int path_count = 0;
  Lit p = UINT32_MAX;
  size_t index = trail_.size();

  do {
    Clause& c = clauses_[confl];
    if (c.learnt) c.activity += 1.0;
    for (size_t j = (p == UINT32_MAX ? 0 : 1); j < c.lits.size(); ++j) {
      Lit q = c.lits[j];
      uint32_t v = lit_var(q);
      if (!seen_[v] && level_[v] > 0) {
        seen_[v] = true;
        bump_var(v);
        if (level_[v] >= decision_level())
          ++path_count;
        else
          learnt.push_back(q);
      }
    }
    while (!seen_[lit_var(trail_[--index])]) {
    }
    p = trail_[index];
    confl = reason_[lit_var(p)];
    seen_[lit_var(p)] = false;
    --path_count;
  } while (path_count > 0);
  learnt[0] = neg_lit(p);

  if (learnt.size() == 1) {
    backtrack_level = 0;
  } else {
    size_t max_i = 1;
    for (size_t i = 2; i < learnt.size(); ++i)
      if (level_[lit_var(learnt[i])] > level_[lit_var(learnt[max_i])])
        max_i = i;
    std::swap(learnt[1], learnt[max_i]);
    backtrack_level = level_[lit_var(learnt[1])];
  }
  for (Lit l : learnt) seen_[lit_var(l)] = false;
}

void SatSolver::backtrack(int lvl) {
  if (decision_level() <= lvl) return;
  for (size_t i = trail_.size(); i > trail_lim_[lvl];) {
    --i;
    uint32_t v = lit_var(trail_[i]);
    phase_[v] = assigns_[v] == kTrue;
    assigns_[v] = kUndef;
    reason_[v] = -1;
  }
  trail_.resize(trail_lim_[lvl]);
  trail_lim_.resize(lvl);
  qhead_ = trail_.size();
}

Lit SatSolver::pick_branch() {
  uint32_t best = UINT32_MAX;
  double best_act = -1;
  for (uint32_t v = 0; v < assigns_.size(); ++v) {
    if (assigns_[v] == kUndef && activity_[v] > best_act) {
      best = v;
      best_act = activity_[v];
    }
  }
  if (best == UINT32_MAX) return UINT32_MAX;
  return mk_lit(best, !phase_[best]);
}

namespace {
// Luby sequence scaled by 64 conflicts.
int64_t luby(int64_t i) {
  int64_t x = i + 1;  // 1-based position in 1,1,2,1,1,2,4,...
  int64_t k = 1;
  while ((1ll << k) - 1 < x) ++k;  // smallest k with 2^k - 1 >= x
  while ((1ll << k) - 1 != x) {    // recurse into the repeated prefix
    x -= (1ll << (k - 1)) - 1;
    k = 1;
    while ((1ll << k) - 1 < x) ++k;
  }
  return 1ll << (k - 1);
}
}  // namespace

SatResult SatSolver::solve(int64_t conflict_budget,
                           const std::function<bool()>& should_stop) {
  if (!ok_) return SatResult::Unsat;
  if (propagate() != -1) return SatResult::Unsat;

  int64_t total_conflicts = 0;
  int64_t restart = 0;
  int64_t decisions = 0;
  while (true) {
    int64_t restart_budget = 64 * luby(restart++);
    if (should_stop && should_stop()) return SatResult::Unknown;
    int64_t local = 0;
    while (local < restart_budget) {
      if (should_stop && (total_conflicts & 0x1ff) == 0 && should_stop())
        return SatResult::Unknown;
      int32_t confl = propagate();
      if (confl != -1) {
        ++total_conflicts;
        ++local;
        if (conflict_budget >= 0 && total_conflicts > conflict_budget)
          return SatResult::Unknown;
        if (decision_level() == 0) return SatResult::Unsat;
        std::vector<Lit> learnt;
        int back_lvl = 0;
        analyze(confl, learnt, back_lvl);
        backtrack(back_lvl);
        if (learnt.size() == 1) {
          enqueue(learnt[0], -1);
        } else {
          clauses_.push_back(Clause{std::move(learnt), true, 0});
          uint32_t ci = static_cast<uint32_t>(clauses_.size() - 1);
          attach(ci);
          enqueue(clauses_[ci].lits[0], static_cast<int32_t>(ci));
        }
        decay_var_activity();
      } else {
        // Long conflict-free decision runs must also honor the deadline;
        // propagation over deep arithmetic circuits can dwarf conflicts.
        if (should_stop && (++decisions & 0xfff) == 0 && should_stop())
          return SatResult::Unknown;
        Lit next = pick_branch();
        if (next == UINT32_MAX) {
          model_.assign(assigns_.size(), false);
          for (uint32_t v = 0; v < assigns_.size(); ++v)
            model_[v] = assigns_[v] == kTrue;
          return SatResult::Sat;
        }
        trail_lim_.push_back(trail_.size());
        enqueue(next, -1);
      }
    }
    backtrack(0);
  }
}

}  // namespace solscan::sat
