#pragma once

#include <string>
#include <vector>

namespace okcusum {

/// Entry point behind the okcusum binary; split out so tests can drive it.
/// Exit codes: 0 alarm (detect) / success, 1 config error, 2 data error,
/// 3 detect stream ended without alarm.
int cli_main(const std::vector<std::string>& args);

}  // namespace okcusum
