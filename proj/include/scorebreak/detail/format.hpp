#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace scorebreak::detail {

/// Shortest decimal string that parses back to exactly the same double.
/// Golden-file tests diff emitted reports byte for byte, so the rendering
/// must be stable and free of trailing noise digits.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace scorebreak::detail
