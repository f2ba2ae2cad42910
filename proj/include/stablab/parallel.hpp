#pragma once

#include <cstdlib>
#include <thread>

namespace stablab {

/// Worker count for parallel regions.  Reads STABLAB_THREADS on every call
/// (0 or unset means "use hardware concurrency"), so tests can flip it
/// between runs of the same process image.  Parallel reductions in this
/// project are written to give byte-identical results for any positive
/// thread count.
inline int thread_budget() {
  if (const char* env = std::getenv("STABLAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace stablab
