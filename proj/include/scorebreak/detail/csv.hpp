#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace scorebreak::detail {

/// Splits one CSV line on commas. Cells are plain (no quoting): every field
/// this tool writes is an identifier or a number, and system ids with commas
/// in them would break the wide header anyway.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace scorebreak::detail
