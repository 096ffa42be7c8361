#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace colearn {

/// Fixed CSV dialect for golden-file comparison: comma separator, decimal
/// point, 12 significant digits, header row, LF line endings.
inline std::string format_sig(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct CsvBuilder {
    std::string body;

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body += ',';
            body += cells[i];
        }
        body += '\n';
    }
};

}  // namespace colearn
