#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace dt {

// All recoverable failures in the library surface as dt::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Worker budget shared by every parallel loop in the library. Zero means
// "use the hardware concurrency".
void set_worker_count(unsigned workers);
unsigned worker_count();

// Runs fn(i) for i in [0, n) on at most worker_count() threads. Iterations
// are split into contiguous chunks so results are independent of the
// schedule as long as fn(i) only writes state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Progress sink used by long-running stages. Off by default.
void set_verbose(bool on);
bool verbose();
void log_progress(const std::string& message);

// Decreasing logistic (1 + e^{(x - midpoint)/slope})^-1: near 1 for small x.
double soft_threshold(double x, double midpoint, double slope);

template <typename T>
constexpr T clamp_value(T v, T lo, T hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace dt
