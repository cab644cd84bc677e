#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace exa {

// Worker count used by all data-parallel loops. Outputs never depend on it.
inline int& thread_setting() {
  static int threads = 0;
  return threads;
}

inline void set_threads(int n) {
  thread_setting() = n;
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

inline int num_threads() {
#ifdef _OPENMP
  return thread_setting() > 0 ? thread_setting() : omp_get_max_threads();
#else
  return 1;
#endif
}

// Static-schedule loop over [begin, end). The body must only write to
// locations owned by its index.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::int64_t i = begin; i < end; ++i) fn(i);
#else
  for (std::int64_t i = begin; i < end; ++i) fn(i);
#endif
}

// Same as parallel_for but hands out contiguous blocks [lo, hi).
template <typename Fn>
void parallel_blocks(std::int64_t count, std::int64_t block, Fn&& fn) {
  const std::int64_t nblocks = (count + block - 1) / block;
  parallel_for(0, nblocks, [&](std::int64_t b) {
    const std::int64_t lo = b * block;
    const std::int64_t hi = lo + block < count ? lo + block : count;
    fn(b, lo, hi);
  });
}

}  // namespace exa
