#pragma once
// Deterministic index-parallel helper.  Results must be written by index;
// chunk boundaries never affect values, so any EVTOL_THREADS setting yields
// identical output.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace evtol {

inline int max_threads() {
  if (const char* e = std::getenv("EVTOL_THREADS")) {
    const int v = std::atoi(e);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace evtol
