#pragma once

namespace lodsplat {

/// Worker count for parallel loops: LODSPLAT_THREADS when set to a positive
/// integer, otherwise the OpenMP default. Always at least 1.
int worker_threads();

/// Override for the current process (0 restores the environment default).
void set_worker_threads(int n);

}  // namespace lodsplat
