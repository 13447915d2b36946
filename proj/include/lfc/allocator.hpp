#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lfc {

// The training loop allocates and frees multi-megabyte activation matrices
// every step. glibc hands those back to the kernel each time, which costs
// about a third of the runtime in page faults. Keep them on the heap.
inline void keep_heap_resident() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace lfc
