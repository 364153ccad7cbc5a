#include "depthtransfer/common.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace dt {

namespace {
std::atomic<unsigned> g_workers{0};
std::atomic<bool> g_verbose{false};
std::mutex g_log_mutex;
}  // namespace

void set_worker_count(unsigned workers) { g_workers = workers; }

unsigned worker_count() {
  unsigned w = g_workers.load();
  if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
  return w;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end, w] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double soft_threshold(double x, double midpoint, double slope) {
  const double z = (x - midpoint) / slope;
  if (z > 700.0) return 0.0;
  return 1.0 / (1.0 + std::exp(z));
}

void set_verbose(bool on) { g_verbose = on; }
bool verbose() { return g_verbose.load(); }

void log_progress(const std::string& message) {
  if (!g_verbose) return;
  std::lock_guard lock(g_log_mutex);
  std::cerr << "[depthtransfer] " << message << '\n';
}

}  // namespace dt
