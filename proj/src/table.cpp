#include "burnsem/table.hpp"

#include "burnsem/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace burnsem {

std::optional<Eigen::Index> Table::find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Eigen::Index>(i);
    }
    return std::nullopt;
}

Eigen::Index Table::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("missing column '" + std::string(name) + "'");
}

Table Table::select(const std::vector<std::string>& columns) const {
    Table out;
    out.names = columns;
    out.values.resize(rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = column(columns[j]);
    return out;
}

void Table::append(const std::string& name, const Eigen::VectorXd& col) {
    if (values.cols() > 0 && col.size() != rows()) throw ValidationError("column '" + name + "' has the wrong length");
    if (auto i = find(name)) {
        values.col(*i) = col;
        return;
    }
    Eigen::MatrixXd grown(col.size(), values.cols() + 1);
    if (values.cols() > 0) grown.leftCols(values.cols()) = values;
    grown.col(values.cols()) = col;
    values = std::move(grown);
    names.push_back(name);
}

std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
    return fmt::format("{:.17g}", v);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view cell, std::size_t line_no) {
    cell = trim(cell);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, cell));
    }
    return v;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        auto line = trim(text.substr(start, pos - start));
        if (!line.empty()) lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

}  // namespace

std::string format_csv(const Table& t) {
    std::string out = fmt::format("{}\n", fmt::join(t.names, ","));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
            if (j) out += ',';
            out += format_number(t.values(i, j));
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError("CSV is empty");
    Table t;
    for (auto h : split(lines[0])) t.names.emplace_back(trim(h));
    const auto cols = static_cast<Eigen::Index>(t.names.size());
    t.values.resize(static_cast<Eigen::Index>(lines.size() - 1), cols);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r]);
        if (static_cast<Eigen::Index>(cells.size()) != cols) {
            throw ParseError(fmt::format("line {}: expected {} fields, found {}", r + 1, cols, cells.size()));
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            t.values(static_cast<Eigen::Index>(r - 1), c) = parse_double(cells[static_cast<std::size_t>(c)], r + 1);
        }
    }
    return t;
}

std::string format_covariance_csv(const CovMatrix& c) {
    std::string out = fmt::format("variable,{}\n", fmt::join(c.order(), ","));
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        out += c.order()[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < c.size(); ++j) out += fmt::format(",{:.17g}", c(i, j));
        out += '\n';
    }
    return out;
}

CovMatrix parse_covariance_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError("covariance CSV is empty");
    const auto header = split(lines[0]);
    std::vector<std::string> names;
    for (std::size_t i = 1; i < header.size(); ++i) names.emplace_back(trim(header[i]));
    const auto n = static_cast<Eigen::Index>(names.size());
    if (static_cast<Eigen::Index>(lines.size()) != n + 1) {
        throw ParseError(fmt::format("covariance CSV: expected {} rows, found {}", n, lines.size() - 1));
    }
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto cells = split(lines[static_cast<std::size_t>(r + 1)]);
        if (static_cast<Eigen::Index>(cells.size()) != n + 1) {
            throw ParseError(fmt::format("covariance CSV line {}: wrong field count", r + 2));
        }
        if (trim(cells[0]) != names[static_cast<std::size_t>(r)]) {
            throw ParseError(fmt::format("covariance CSV line {}: row label '{}' does not match column '{}'", r + 2,
                                         trim(cells[0]), names[static_cast<std::size_t>(r)]));
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            m(r, c) = parse_double(cells[static_cast<std::size_t>(c + 1)], static_cast<std::size_t>(r + 2));
        }
    }
    if (!m.isApprox(m.transpose(), 1e-12)) throw ValidationError("covariance CSV is not symmetric");
    return CovMatrix(std::move(names), m);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view contents) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace burnsem
