#pragma once

#include <string>

namespace stochint {

/// Shortest-stable decimal form with 17 significant digits ("%.17g").
std::string format_double(double value);

}  // namespace stochint
