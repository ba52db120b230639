#pragma once

#include <string>
#include <string_view>

namespace morl::harness {

/// Decimal rendering at 17 significant digits: enough for doubles to
/// round-trip bit-exactly through format_double/parse_double_exact.
std::string format_double(double value);

/// Locale-independent parse of a full token; throws InvalidInput on
/// trailing garbage or empty input.
double parse_double_exact(std::string_view token);

}  // namespace morl::harness
