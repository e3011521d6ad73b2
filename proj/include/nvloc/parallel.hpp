#ifndef NVLOC_PARALLEL_HPP
#define NVLOC_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace nvloc {

/// Worker count: NVLOC_THREADS if set and positive, else hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("NVLOC_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(k) for k in [0, n) over `threads` workers (0 = default).
/// Each index is visited exactly once; results must be written to
/// per-index slots so the outcome does not depend on scheduling. The
/// exception from the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = default_thread_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t k = t; k < n; k += threads) {
        try {
          body(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// splitmix64 finalizer, used to derive independent per-index seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// RNG stream k of a run seeded with `seed`; depends only on (seed, k).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(mix64(seed) >> 32), static_cast<std::uint32_t>(mix64(seed)),
                    static_cast<std::uint32_t>(mix64(seed ^ mix64(k)) >> 32),
                    static_cast<std::uint32_t>(mix64(seed ^ mix64(k)))};
  return std::mt19937_64(seq);
}

/// mean + sigma * N(0, 1); sigma may be zero.
template <class Rng>
double draw_normal(Rng& rng, double mean, double sigma) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double z = unit(rng);
  return mean + sigma * z;
}

}  // namespace nvloc

#endif  // NVLOC_PARALLEL_HPP
