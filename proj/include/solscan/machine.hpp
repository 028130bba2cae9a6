#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "solscan/expr.hpp"
#include "solscan/ledger.hpp"
#include "solscan/program.hpp"
#include "solscan/solver.hpp"
#include "solscan/state.hpp"

namespace solscan::sym {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MachineConfig {
  std::set<uint64_t> skip_sites;  // format call sites to stub out
  bool record_ledger = true;
};

// Single-instruction symbolic stepper over a loaded program image. Owns
// fork bookkeeping (state ids, fork ordinals) but no states; states move
// through step() by value.
class Machine {
 public:
  Machine(ExprArena& arena, Solver& solver, const sbpf::ProgramImage& image,
          vm::InputLayout layout, MachineConfig config = {})
      : arena_(arena),
        solver_(solver),
        image_(image),
        layout_(layout),
        config_(std::move(config)) {}

  // Executes the instruction at state.pc; conditional branches and
  // possibly-zero divisions return up to two successors.
  std::vector<SymState> step(SymState state);

  SatVerdict is_sat(const SymState& state, ExprRef extra = kNoExpr);

  // One satisfying assignment restricted to exprs; nullopt on unsat or
  // solver timeout.
  std::optional<std::vector<uint64_t>> concretize(
      const SymState& state, const std::vector<ExprRef>& exprs);

  // Full model over every variable of the arena (absent vars read as 0).
  std::optional<std::vector<uint64_t>> model(const SymState& state);

  // Resolves a possibly-symbolic address to one concrete value, adding an
  // equality constraint when the address has several models. nullopt means
  // the solver could not produce a value (unsat path or timeout).
  std::optional<uint64_t> resolve_value(SymState& state, ExprRef expr);

  ExprArena& arena() { return arena_; }
  Solver& solver() { return solver_; }
  const sbpf::ProgramImage& image() const { return image_; }
  const vm::InputLayout& layout() const { return layout_; }
  MachineConfig& config() { return config_; }

  uint32_t fresh_state_id() { return next_state_id_++; }
  uint64_t next_fork_ordinal() { return ++fork_counter_; }

  uint64_t steps = 0;

 private:
  std::vector<SymState> exec_alu(SymState state, const sbpf::Instruction& insn,
                                 uint8_t op_width);
  std::vector<SymState> exec_jump(SymState state,
                                  const sbpf::Instruction& insn,
                                  uint8_t cmp_width);
  std::vector<SymState> exec_call(SymState state,
                                  const sbpf::Instruction& insn);
  SymState exec_load(SymState state, const sbpf::Instruction& insn);
  SymState exec_store(SymState state, const sbpf::Instruction& insn);
  SymState do_exit(SymState state);
  void enter_function(SymState& state, uint64_t target, uint64_t return_to);

  ExprRef reg_operand(const SymState& state, const sbpf::Instruction& insn,
                      uint8_t width) const;
  ExprRef build_condition(const SymState& state,
                          const sbpf::Instruction& insn, uint8_t width);

  ExprArena& arena_;
  Solver& solver_;
  const sbpf::ProgramImage& image_;
  vm::InputLayout layout_;
  MachineConfig config_;
  uint32_t next_state_id_ = 1;
  uint64_t fork_counter_ = 0;
};

// Folds states stopped at one program point into a single state whose
// differing registers and memory bytes become guarded if-then-else terms.
// nullopt when the states disagree on program counter, stack, regions, or
// recorded critical actions.
std::optional<SymState> merge_states(ExprArena& arena,
                                     const std::vector<SymState>& states);

}  // namespace solscan::sym
