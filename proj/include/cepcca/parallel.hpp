#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cepcca {

/// Worker count for a requested thread setting: 0 means "all cores",
/// and the CEPSTRA_CCA_THREADS environment variable overrides everything.
inline unsigned resolve_threads(unsigned requested) {
  if (const char* env = std::getenv("CEPSTRA_CCA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  if (requested >= 1) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? hw : 1;
}

/// Runs body(i) for i in [0, count). Each index writes only its own output
/// slot, so results do not depend on the worker count. The first exception
/// thrown by any worker is rethrown after all workers join.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  if (threads > count) threads = static_cast<unsigned>(count);

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < count; i += threads) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cepcca
