#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>

namespace jms {

using Timestamp = std::chrono::system_clock::time_point;

inline std::int64_t to_millis(Timestamp t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

inline Timestamp from_millis(std::int64_t ms) {
  return Timestamp{std::chrono::milliseconds{ms}};
}

inline double seconds_between(Timestamp from, Timestamp to) {
  return std::chrono::duration<double>(to - from).count();
}

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override { return std::chrono::system_clock::now(); }
};

// Test clock; only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = from_millis(1'700'000'000'000)) : now_(start) {}

  Timestamp now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }

  void advance(std::chrono::milliseconds d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }

 private:
  mutable std::mutex mu_;
  Timestamp now_;
};

}  // namespace jms
