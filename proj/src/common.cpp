#include "tlra/common.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace tlra {

namespace {
std::atomic<bool> g_reproducible{false};
}

void set_reproducible(bool on) { g_reproducible.store(on); }
bool reproducible() { return g_reproducible.load(); }

void log_warning(const std::string& msg) { std::cerr << "tlra: warning: " << msg << '\n'; }

double log_or_zero(double x) { return x > 1.0 ? std::log(x) : 0.0; }

}  // namespace tlra

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tlra {

void parallel_for(int n, const std::function<void(int)>& body) {
  unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  if (n <= 1 || reproducible() || hw == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n));
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tlra
