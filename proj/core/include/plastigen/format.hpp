#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace plastigen {

/// Shortest decimal string that re-parses to exactly the same double.
std::string format_double(double v);

/// Strict double parse of the whole string; nullopt on failure or overflow.
std::optional<double> parse_double(std::string_view text);

}  // namespace plastigen
