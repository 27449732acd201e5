#pragma once

#include "burnsem/covariance.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace burnsem {

// Column-named numeric table, rows = respondents.
struct Table {
    std::vector<std::string> names;
    Eigen::MatrixXd values;

    Eigen::Index rows() const { return values.rows(); }
    std::optional<Eigen::Index> find(std::string_view name) const;
    Eigen::Index index(std::string_view name) const;  // throws ValidationError
    Eigen::VectorXd column(std::string_view name) const { return values.col(index(name)); }
    bool has(std::string_view name) const { return find(name).has_value(); }

    Table select(const std::vector<std::string>& columns) const;
    void append(const std::string& name, const Eigen::VectorXd& column);
};

// Header row of names, one numeric row per record. Integral values print
// without a decimal point, everything else with round-trip precision.
std::string format_csv(const Table& t);
Table parse_csv(std::string_view text);

// Square covariance CSV: header "variable,<names...>", then one row per
// variable.
std::string format_covariance_csv(const CovMatrix& c);
CovMatrix parse_covariance_csv(std::string_view text);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view contents);

std::string format_number(double v);

}  // namespace burnsem
