#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cglmix {

/// Shortest-safe round-trip text for a double: printf "%.17g".
std::string fmt17(double v);

/// Splits a comma-separated line of numbers; throws IoError on bad fields.
std::vector<double> parse_csv_doubles(std::string_view line);

}  // namespace cglmix
