#include "bregcon/log.hpp"

#include <iostream>
#include <mutex>

namespace bregcon {

namespace {
std::mutex sink_mutex;
LogSink& sink() {
  static LogSink s = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}
}  // namespace

LogSink set_warning_sink(LogSink s) {
  std::lock_guard lock(sink_mutex);
  LogSink prev = std::move(sink());
  sink() = std::move(s);
  return prev;
}

void log_warning(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (sink()) sink()(message);
}

}  // namespace bregcon
