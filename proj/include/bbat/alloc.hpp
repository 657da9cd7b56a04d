#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bbat {

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS after every step. Without this, batches past glibc's default
/// mmap/trim thresholds page-fault their buffers back in on every call.
inline void keep_heap_resident() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

}  // namespace bbat
