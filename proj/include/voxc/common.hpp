#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace voxc {

using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using PointCloud = std::vector<Vec3>;

// Thrown when an algorithm fails numerically (solver divergence, gradient
// overflow). The CLI maps this to exit code 3; bad inputs map to 2.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on malformed or unreadable files.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker count for parallel sections: VOXC_THREADS caps it, 0 or unset
// means hardware default. Always >= 1.
int worker_count();

// Splits [0, n) into per-index tasks executed by worker_count() threads.
// Chunk boundaries depend only on n, so output written to disjoint slots
// is identical regardless of how many workers run.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);

// Writes to path atomically: full content lands via a temp file + rename,
// so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& bytes);

// SplitMix64 hash step; the basis of every counter-keyed RNG in voxc.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic keyed RNG: values depend only on (key, counter), never on
// call order, so parallel consumers stay reproducible.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ ^ splitmix64(counter ^ 0x5851f42d4c957f2dULL));
  }
  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }
  std::uint64_t index(std::uint64_t counter, std::uint64_t n) const {
    return bits(counter) % n;
  }

 private:
  std::uint64_t key_;
};

// Sequential RNG used where a stream is more natural than a counter.
class SeqRng {
 public:
  explicit SeqRng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

  std::uint64_t bits() {
    state_ = splitmix64(state_);
    return state_;
  }
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; self-contained so streams never depend
  // on the standard library's distribution internals.
  double normal();
  std::uint64_t index(std::uint64_t n) { return bits() % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace voxc
