#pragma once

// CSV helpers shared by the report writers. Numbers use the classic locale
// and round-trip precision so reruns produce identical bytes.

#include <locale>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaseg::csv {

inline std::string format_value(double v)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string format_value(const std::optional<double>& v)
{
    return v ? format_value(*v) : std::string();
}

inline std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& cell)
{
    std::istringstream in(cell);
    in.imbue(std::locale::classic());
    double v = 0.0;
    if (!(in >> v) || !(in >> std::ws).eof()) throw std::runtime_error("non-numeric CSV value '" + cell + "'");
    return v;
}

inline std::optional<double> parse_optional(const std::string& cell)
{
    if (cell.empty()) return std::nullopt;
    return parse_double(cell);
}

}  // namespace adaseg::csv
