#pragma once

#include <string>

namespace mcorr {

/// Shortest round-trip decimal form of `value`; "NA" for NaN, "inf"/"-inf"
/// for infinities.
std::string format_double(double value);

/// Parses a decimal number, accepting "NA" (case-sensitive) as NaN. Returns
/// false on anything else that is not a complete number.
bool parse_double(const std::string& text, double& out);

}  // namespace mcorr
