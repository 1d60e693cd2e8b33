#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bbvi {

// Every OpenMP kernel in this library has a serial twin selected by this
// policy. Serial is the reference implementation; both must produce
// bit-identical output for any thread count.
enum class ExecPolicy { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace bbvi
