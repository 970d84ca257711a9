#pragma once

#include <cstdio>
#include <string>

namespace tcsim {

/// %.9g, the number format of every CSV and model file.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace tcsim
