#pragma once

#include <string>
#include <vector>

#include "solscan/machine.hpp"
#include "solscan/state.hpp"

namespace solscan::vm {

bool syscall_modeled(const std::string& name);

// Models one syscall invocation: logging is a no-op, CPI records a
// critical action and havocs handed writable accounts, PDA derivation
// yields fresh tagged bytes, abort/panic terminate the path.
std::vector<sym::SymState> handle_syscall(sym::Machine& machine,
                                          sym::SymState state,
                                          const std::string& name);

}  // namespace solscan::vm
