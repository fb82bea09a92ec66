#pragma once

#include <functional>
#include <string_view>

namespace mvsens {

using WarningSink = std::function<void(std::string_view)>;

/// Replaces the warning destination (default: stderr). An empty sink
/// restores the default. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

/// Thread-safe; one line per call.
void warn(std::string_view message);

}  // namespace mvsens
