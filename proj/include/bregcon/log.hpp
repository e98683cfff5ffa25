#pragma once

#include <functional>
#include <string>

namespace bregcon {

using LogSink = std::function<void(const std::string&)>;

// Default sink writes "warning: ..." to stderr. Returns the previous sink.
LogSink set_warning_sink(LogSink sink);
void log_warning(const std::string& message);

}  // namespace bregcon
