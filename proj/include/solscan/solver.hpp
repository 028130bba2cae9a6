#pragma once

#include <chrono>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "solscan/expr.hpp"
#include "solscan/sat.hpp"

namespace solscan::sym {

enum class SatVerdict { Yes, No, Timeout };

// Bit-blasting QF_BV solver. One check() builds a fresh SAT instance from
// the asserted width-1 terms; models are deterministic for a fixed
// constraint set.
class Solver {
 public:
  explicit Solver(ExprArena& arena, uint32_t timeout_ms = 5000)
      : arena_(arena), timeout_ms_(timeout_ms) {}

  void set_timeout_ms(uint32_t ms) { timeout_ms_ = ms; }
  uint32_t timeout_ms() const { return timeout_ms_; }

  SatVerdict check(const std::vector<ExprRef>& assertions);

  // Valid after a Yes verdict: model value of any expr under the last model.
  uint64_t model_value(ExprRef e);

  // Model values for every free variable of the last query; vars not
  // mentioned default to 0.
  const std::vector<uint64_t>& model_assignment() const { return model_asg_; }

  uint64_t queries = 0;
  uint64_t timeouts = 0;

 private:
  struct Blast {
    // one SAT literal per bit, LSB first
    std::vector<sat::Lit> bits;
  };

  std::vector<sat::Lit> blast(ExprRef e);
  sat::Lit fresh();
  sat::Lit lit_const(bool v);
  sat::Lit lit_and(sat::Lit a, sat::Lit b);
  sat::Lit lit_or(sat::Lit a, sat::Lit b);
  sat::Lit lit_xor(sat::Lit a, sat::Lit b);
  sat::Lit lit_mux(sat::Lit sel, sat::Lit t, sat::Lit f);
  std::vector<sat::Lit> add_bits(const std::vector<sat::Lit>& a,
                                 const std::vector<sat::Lit>& b,
                                 sat::Lit carry_in);
  std::vector<sat::Lit> mul_bits(const std::vector<sat::Lit>& a,
                                 const std::vector<sat::Lit>& b);
  void divmod_bits(const std::vector<sat::Lit>& a,
                   const std::vector<sat::Lit>& b,
                   std::vector<sat::Lit>& quot, std::vector<sat::Lit>& rem);
  std::vector<sat::Lit> shift_bits(const std::vector<sat::Lit>& a,
                                   const std::vector<sat::Lit>& amount,
                                   int dir_right, bool arith);
  sat::Lit ult_bits(const std::vector<sat::Lit>& a,
                    const std::vector<sat::Lit>& b, bool or_equal);
  sat::Lit eq_bits(const std::vector<sat::Lit>& a,
                   const std::vector<sat::Lit>& b);

  ExprArena& arena_;
  uint32_t timeout_ms_;
  sat::SatSolver* sat_ = nullptr;
  std::unordered_map<ExprRef, Blast> cache_;
  std::unordered_map<uint32_t, Blast> var_bits_;
  sat::Lit true_lit_ = 0;
  std::vector<uint64_t> model_asg_;
  sat::SatSolver sat_instance_;
  bool have_model_ = false;
};

}  // namespace solscan::sym
