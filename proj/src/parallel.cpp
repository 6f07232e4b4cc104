#include "lodsplat/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace lodsplat {

namespace {
std::atomic<int> g_override{0};

int from_environment() {
  if (const char* env = std::getenv("LODSPLAT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}
}  // namespace

int worker_threads() {
  const int o = g_override.load();
  if (o > 0) return o;
  static const int env = from_environment();
  return env > 0 ? env : 1;
}

void set_worker_threads(int n) { g_override.store(n > 0 ? n : 0); }

}  // namespace lodsplat
