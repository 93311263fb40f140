#pragma once

#include <cstdio>
#include <string>

namespace pfc {

// Every CSV surface prints numbers with 6 significant digits so golden-file
// comparisons are byte-stable.
inline std::string fmt_sig6(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

}  // namespace pfc
