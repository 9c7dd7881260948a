#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlbo/dataset.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

// Comma-separated configuration tables: optional '#' provenance lines, then
// one header row naming every space variable plus an "objective" column,
// then one row per pre-evaluated configuration. Used for grid benchmark
// files and persisted historic datasets alike.

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // Trim surrounding whitespace.
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_number(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": cannot parse number '" + s + "'");
    }
}

}  // namespace detail

struct ConfigTable {
    std::vector<std::string> provenance;  // leading '#' lines, markers stripped
    std::vector<Configuration> inputs;
    std::vector<double> objectives;
};

inline ConfigTable read_config_table(std::istream& in, const SearchSpace& space,
                                     const std::string& name) {
    ConfigTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            table.provenance.push_back(line.substr(line.find_first_not_of("# ")));
            continue;
        }
        const auto cells = detail::split_csv(line);
        const std::string ctx = name + ":" + std::to_string(line_no);
        if (header.empty()) {
            header = cells;
            if (header.size() != space.dim() + 1)
                throw std::runtime_error(ctx + ": expected " + std::to_string(space.dim() + 1) +
                                         " columns, got " + std::to_string(header.size()));
            for (std::size_t i = 0; i < space.dim(); ++i)
                if (header[i] != space.variable(i).name)
                    throw std::runtime_error(ctx + ": column '" + header[i] +
                                             "' does not match variable '" +
                                             space.variable(i).name + "'");
            if (header.back() != "objective")
                throw std::runtime_error(ctx + ": last column must be named 'objective'");
            continue;
        }
        if (cells.size() != header.size())
            throw std::runtime_error(ctx + ": expected " + std::to_string(header.size()) +
                                     " cells, got " + std::to_string(cells.size()));
        std::vector<double> values(space.dim());
        for (std::size_t i = 0; i < space.dim(); ++i) {
            const auto& v = space.variable(i);
            if (v.kind == VarKind::categorical) {
                const auto it = std::find(v.categories.begin(), v.categories.end(), cells[i]);
                if (it == v.categories.end())
                    throw std::runtime_error(ctx + ": unknown category '" + cells[i] +
                                             "' for variable '" + v.name + "'");
                values[i] = double(it - v.categories.begin());
            } else {
                values[i] = detail::parse_number(cells[i], ctx);
            }
        }
        Configuration config(std::move(values));
        try {
            space.check(config);
        } catch (const std::exception& e) {
            throw std::runtime_error(ctx + ": " + e.what());
        }
        table.inputs.push_back(std::move(config));
        table.objectives.push_back(detail::parse_number(cells.back(), ctx));
    }
    if (header.empty()) throw std::runtime_error(name + ": missing header row");
    if (table.inputs.empty()) throw std::runtime_error(name + ": no data rows");
    return table;
}

inline ConfigTable read_config_table_file(const std::string& path, const SearchSpace& space) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_config_table(in, space, path);
}

// Numbers are written round-trip exact so persisted tables reload
// bit-identically.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_config_table(std::ostream& out, const SearchSpace& space,
                               const std::vector<Configuration>& inputs,
                               const std::vector<double>& objectives,
                               const std::vector<std::string>& provenance = {}) {
    for (const auto& p : provenance) out << "# " << p << "\n";
    for (std::size_t i = 0; i < space.dim(); ++i) out << space.variable(i).name << ",";
    out << "objective\n";
    for (std::size_t r = 0; r < inputs.size(); ++r) {
        for (std::size_t i = 0; i < space.dim(); ++i) {
            const auto& v = space.variable(i);
            if (v.kind == VarKind::categorical)
                out << v.categories[inputs[r].category_index(i)];
            else
                out << format_double(inputs[r][i]);
            out << ",";
        }
        out << format_double(objectives[r]) << "\n";
    }
}

}  // namespace tlbo
