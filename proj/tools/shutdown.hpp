#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <functional>
#include <thread>

namespace stella::tools {

inline std::atomic<bool> g_stop{false};

/// Blocks until SIGINT or SIGTERM, calling `tick` about every `period`.
inline void wait_for_signal(std::chrono::milliseconds period, const std::function<void()>& tick = {}) {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  auto next = std::chrono::steady_clock::now() + period;
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (tick && std::chrono::steady_clock::now() >= next) {
      tick();
      next += period;
    }
  }
}

}  // namespace stella::tools
