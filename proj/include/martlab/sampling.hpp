#pragma once

// Deterministic random streams and the path-parallel driver.
//
// Bit-level contract (any implementation reproducing it gets identical paths):
//   mix(z):   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//             z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//   SplitMix64::next():  state += 0x9E3779B97F4A7C15; return mix(state)
//   path_seed(master, i) = mix(master + (i + 1) * 0x9E3779B97F4A7C15)
//   substream(seed, s)   = SplitMix64 with state mix(seed ^ ((s + 1) * 0xD1B54A32D192ED03))
//   uniform01            = (next() >> 11) * 2^-53
//   uniform_below(m)     = r % m for the first r = next() with r >= 2^64 mod m
//   bits                 = next() consumed least-significant bit first, 64 per word

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace martlab {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}

  constexpr std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on {0, ..., m - 1}; m >= 1.
  std::uint64_t uniform_below(std::uint64_t m) {
    const std::uint64_t threshold = (0 - m) % m;  // 2^64 mod m
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % m;
    }
  }

 private:
  std::uint64_t state_;
};

struct SeedPlan {
  std::uint64_t master_seed = 0;

  constexpr std::uint64_t path_seed(std::uint64_t path_index) const {
    return mix64(master_seed + (path_index + 1) * 0x9E3779B97F4A7C15ULL);
  }
};

/// Independent stream `s` of a path seed. Stream 0 drives walk steps and
/// kernel moves, stream 1 drives auxiliary draws (events, delays).
constexpr SplitMix64 substream(std::uint64_t seed, std::uint64_t s) {
  return SplitMix64(mix64(seed ^ ((s + 1) * 0xD1B54A32D192ED03ULL)));
}

/// Fair coin flips, 64 per generator call.
class BitSource {
 public:
  explicit BitSource(SplitMix64 rng) : rng_(rng) {}

  bool next() {
    if (left_ == 0) {
      word_ = rng_.next();
      left_ = 64;
    }
    const bool bit = (word_ & 1U) != 0;
    word_ >>= 1;
    --left_;
    return bit;
  }

  int step() { return next() ? 1 : -1; }

 private:
  SplitMix64 rng_;
  std::uint64_t word_ = 0;
  int left_ = 0;
};

/// Worker count: MARTLAB_THREADS when set and positive, else hardware concurrency.
unsigned default_workers();

/// Runs make_worker()(acc, i) for every path index i in [0, paths), spread
/// over `workers` threads, each with its own copy of `proto`, then merges the
/// copies with Acc::merge. Acc::merge must be commutative and associative so
/// the result does not depend on scheduling.
template <class Acc, class MakeWorker>
Acc accumulate_paths(std::uint64_t paths, unsigned workers, const Acc& proto, MakeWorker make_worker) {
  workers = std::max(1U, workers);
  if (workers == 1 || paths < 2) {
    Acc acc = proto;
    auto work = make_worker();
    for (std::uint64_t i = 0; i < paths; ++i) work(acc, i);
    return acc;
  }
  constexpr std::uint64_t kChunk = 256;
  std::vector<Acc> accs(workers, proto);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          auto work = make_worker();
          for (;;) {
            const std::uint64_t begin = next.fetch_add(kChunk);
            if (begin >= paths) break;
            const std::uint64_t end = std::min(paths, begin + kChunk);
            for (std::uint64_t i = begin; i < end; ++i) work(accs[w], i);
          }
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(paths);
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  Acc total = proto;
  for (const Acc& a : accs) total.merge(a);
  return total;
}

}  // namespace martlab
