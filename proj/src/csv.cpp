#include "stochint/csv.hpp"

#include <cstdio>

namespace stochint {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

}  // namespace stochint
