#pragma once

namespace lockstep {

/// Number of OpenMP threads used by kernels and probe phases. Defaults to
/// LOCKSTEP_THREADS when set to a positive integer, otherwise the number of
/// available execution units.
int thread_budget();

/// Overrides the budget for the rest of the process; n <= 0 restores the
/// environment/default value.
void set_thread_budget(int n);

}  // namespace lockstep
