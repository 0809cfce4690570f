#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace moyal {

namespace detail {

struct WarningSink {
  std::mutex mutex;
  std::function<void(std::string_view)> handler;
};

inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace detail

/// Emit a non-fatal diagnostic. Goes to stderr unless a capture is active.
inline void warn(std::string_view message) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  if (sink.handler) {
    sink.handler(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

/// Redirects warnings into a vector for the lifetime of the object.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture() {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    previous_ = std::exchange(sink.handler, [this](std::string_view m) { messages_.emplace_back(m); });
  }
  ~ScopedWarningCapture() {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    sink.handler = std::move(previous_);
  }
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

  bool contains(std::string_view needle) const {
    for (const auto& m : messages_) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

 private:
  std::function<void(std::string_view)> previous_;
  std::vector<std::string> messages_;
};

}  // namespace moyal
