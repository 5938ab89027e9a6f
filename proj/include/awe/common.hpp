#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace awe {

// Bad input: malformed files, invalid parameters, failed preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure during computation: cost guards, divergence, non-convergence.
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NodeId = std::uint32_t;
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of an independent stream, e.g. derive_seed(master, graph_id, node_id).
template <typename... Ts>
constexpr std::uint64_t derive_seed(std::uint64_t master, Ts... keys) noexcept {
  std::uint64_t h = mix64(master);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(keys) + 0x632be59bd9b4e019ULL))), ...);
  return h;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Hands out the two 32-bit halves of each 64-bit draw in turn.
class HalfWords {
 public:
  explicit HalfWords(Rng& rng) noexcept : rng_(rng) {}

  std::uint32_t next() noexcept {
    if (have_) {
      have_ = false;
      return static_cast<std::uint32_t>(word_ >> 32);
    }
    word_ = rng_();
    have_ = true;
    return static_cast<std::uint32_t>(word_);
  }

  // Unbiased integer in [0, n), 1 <= n < 2^32.
  std::uint32_t below(std::uint32_t n) noexcept {
    auto product = static_cast<std::uint64_t>(next()) * n;
    auto low = static_cast<std::uint32_t>(product);
    if (low < n) {
      const std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
      while (low < threshold) {
        product = static_cast<std::uint64_t>(next()) * n;
        low = static_cast<std::uint32_t>(product);
      }
    }
    return static_cast<std::uint32_t>(product >> 32);
  }

  Rng& engine() noexcept { return rng_; }

 private:
  Rng& rng_;
  std::uint64_t word_ = 0;
  bool have_ = false;
};

// Unbiased integer in [0, n), n >= 1 (multiply-shift with rejection).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) noexcept {
  auto product = static_cast<unsigned __int128>(rng()) * n;
  auto low = static_cast<std::uint64_t>(product);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

// Runs body(i) for i in [0, n) on up to `threads` workers with static
// contiguous chunks. Callers write results into per-index slots so the
// outcome never depends on the worker count.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline unsigned default_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace awe
