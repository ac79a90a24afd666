#include "mcorr/format.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace mcorr {

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "NA";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

bool parse_double(const std::string& text, double& out) {
    if (text == "NA") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc() && result.ptr == last;
}

}  // namespace mcorr
