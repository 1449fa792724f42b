#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace floodsense {

/// Fatal error raised by any pipeline stage. `stage()` names the component
/// that failed so orchestrators can report it without string parsing.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

using WarningSink = std::function<void(std::string_view stage, std::string_view message)>;

namespace detail {
inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view stage, std::string_view message) {
    std::cerr << "warning: " << stage << ": " << message << '\n';
  };
  return sink;
}
}  // namespace detail

/// Replaces the process-wide warning sink. Returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(std::string_view stage, std::string_view message) {
  if (auto& sink = detail::warning_sink()) sink(stage, message);
}

}  // namespace floodsense
