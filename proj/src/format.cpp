#include "cglmix/format.hpp"

#include <cstdio>
#include <cstdlib>

#include "cglmix/errors.hpp"

namespace cglmix {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_csv_doubles(std::string_view line) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= line.size()) {
        const std::size_t end = std::min(line.find(',', start), line.size());
        const std::string field(line.substr(start, end - start));
        char* stop = nullptr;
        const double v = std::strtod(field.c_str(), &stop);
        if (field.empty() || stop != field.c_str() + field.size()) {
            throw IoError("malformed numeric field '" + field + "'");
        }
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

}  // namespace cglmix
