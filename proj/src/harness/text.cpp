#include "morl/harness/text.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

#include "morl/errors.hpp"

namespace morl::harness {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double_exact(std::string_view token) {
  if (token.empty()) throw InvalidInput("empty numeric token");
  if (token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  double out = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw InvalidInput("bad numeric token: '" + std::string(token) + "'");
  return out;
}

}  // namespace morl::harness
