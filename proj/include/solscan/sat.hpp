#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace solscan::sat {

// Literal encoding: var << 1 | sign (sign 1 = negated).
using Lit = uint32_t;
inline Lit mk_lit(uint32_t var, bool neg = false) { return (var << 1) | neg; }
inline Lit neg_lit(Lit l) { return l ^ 1; }
inline uint32_t lit_var(Lit l) { return l >> 1; }
inline bool lit_sign(Lit l) { return l & 1; }

enum class SatResult { Sat, Unsat, Unknown };

// Minimal CDCL solver: two-watched literals, VSIDS, phase saving,
// 1UIP learning, Luby restarts. One instance per query.
class SatSolver {
 public:
  uint32_t new_var();
  // Returns false if the clause is immediately conflicting at level 0.
  bool add_clause(std::vector<Lit> clause);

  // should_stop is polled periodically; a true return aborts with Unknown.
  SatResult solve(int64_t conflict_budget,
                  const std::function<bool()>& should_stop = {});

  bool model_value(uint32_t var) const { return model_[var]; }
  size_t num_vars() const { return assigns_.size(); }

 private:
  enum LBool : int8_t { kTrue = 1, kFalse = -1, kUndef = 0 };

  struct Clause {
    std::vector<Lit> lits;
    bool learnt = false;
    double activity = 0;
  };

  struct Watcher {
    uint32_t clause;
    Lit blocker;
  };

  LBool value(Lit l) const {
    LBool v = assigns_[lit_var(l)];
    if (v == kUndef) return kUndef;
    return lit_sign(l) ? LBool(-v) : v;
  }

  void enqueue(Lit l, int32_t reason);
  int32_t propagate();  // returns conflicting clause index or -1
  void analyze(int32_t confl, std::vector<Lit>& learnt, int& backtrack_level);
  void backtrack(int level);
  Lit pick_branch();
  void bump_var(uint32_t v);
  void decay_var_activity();
  void attach(uint32_t ci);

  std::vector<Clause> clauses_;
  std::vector<std::vector<Watcher>> watches_;  // indexed by literal
  std::vector<LBool> assigns_;
  std::vector<int32_t> reason_;   // clause index or -1
  std::vector<int32_t> level_;
  std::vector<Lit> trail_;
  std::vector<size_t> trail_lim_;
  size_t qhead_ = 0;
  std::vector<double> activity_;
  std::vector<bool> phase_;
  std::vector<bool> seen_;
  double var_inc_ = 1.0;
  bool ok_ = true;
  std::vector<bool> model_;

  int decision_level() const { return static_cast<int>(trail_lim_.size()); }
};

}  // namespace solscan::sat
