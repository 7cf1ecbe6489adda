#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace stochint {

using Cell = std::variant<std::string, std::int64_t, double, bool>;

/// A flat table shared by the CSV and JSON writers, so both carry the same numbers.
struct Report {
    std::string command;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    bool pass = true;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("report row width does not match header");
        rows.push_back(std::move(row));
    }
};

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c) {
    struct {
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
    } visit;
    return std::visit(visit, c);
}

inline void write_csv(std::ostream& os, const Report& r) {
    for (std::size_t c = 0; c < r.columns.size(); ++c) os << (c ? "," : "") << r.columns[c];
    os << '\n';
    for (const auto& row : r.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_cell(row[c]);
        os << '\n';
    }
}

/// Doubles go out as shortest round-trip JSON numbers: the same binary values as the CSV.
inline void write_json(std::ostream& os, const Report& r) {
    using nlohmann::ordered_json;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json obj = ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::string& key = r.columns[c];
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        if (std::isfinite(v))
                            obj[key] = v;
                        else
                            obj[key] = format_double(v);
                    } else {
                        obj[key] = v;
                    }
                },
                row[c]);
        }
        rows.push_back(std::move(obj));
    }
    ordered_json doc = ordered_json::object();
    doc["command"] = r.command;
    doc["pass"] = r.pass;
    doc["columns"] = r.columns;
    doc["rows"] = std::move(rows);
    os << doc.dump(2) << '\n';
}

} // namespace stochint
