#include "lockstep/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace lockstep {
namespace {

int default_budget() {
  if (const char* env = std::getenv("LOCKSTEP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // fall through to the default
    }
  }
  return omp_get_num_procs();
}

std::atomic<int> override_budget{0};

}  // namespace

int thread_budget() {
  const int forced = override_budget.load(std::memory_order_relaxed);
  if (forced > 0) return forced;
  static const int budget = default_budget();
  return budget;
}

void set_thread_budget(int n) { override_budget.store(n > 0 ? n : 0, std::memory_order_relaxed); }

}  // namespace lockstep
