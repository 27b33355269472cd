#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace oransec {

using Json = nlohmann::json;

// Microseconds since the Unix epoch.
using TimestampUs = std::int64_t;

// Wall-clock source for event and audit timestamps. Tests substitute a
// ManualClock so persisted artifacts are reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimestampUs now_us() = 0;
};

class SystemClock final : public Clock {
 public:
  TimestampUs now_us() override;
};

// Starts at `start` and advances by `step` on every read.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimestampUs start = 1'700'000'000'000'000, TimestampUs step = 1)
      : next_(start), step_(step) {}
  TimestampUs now_us() override { return next_.fetch_add(step_); }

 private:
  std::atomic<TimestampUs> next_;
  TimestampUs step_;
};

std::shared_ptr<Clock> system_clock();

// Monotonic stopwatch in fractional milliseconds.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Throws Error{FileUnreadable} when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

Json read_json_file(const std::filesystem::path& path);

bool is_hex_string(std::string_view s) noexcept;

std::string to_lower_ascii(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace oransec
