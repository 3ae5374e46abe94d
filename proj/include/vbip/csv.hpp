#ifndef VBIP_CSV_HPP
#define VBIP_CSV_HPP

#include <string>
#include <vector>

namespace vbip::csv {

/// Decimal rendering with 17 significant digits (round-trip exact for doubles).
std::string format_double(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void write(const std::string& path) const;
    static Table read(const std::string& path);

    int column_index(const std::string& name) const; // -1 when absent
};

/// Reads a two-column (x, value) CSV, with or without a header row.
std::vector<std::pair<double, double>> read_xy(const std::string& path);

} // namespace vbip::csv

#endif
