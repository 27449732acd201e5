#include "burnsem/cohort.hpp"

#include "burnsem/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace burnsem {

double PortableRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double PortableRng::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
}

const std::vector<Subscale>& subscales() {
    static const std::vector<Subscale> all = [] {
        auto numbered = [](const std::string& prefix, int count) {
            std::vector<std::string> out;
            for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
            return out;
        };
        return std::vector<Subscale>{
            {"SF_EE", "EE", numbered("EE", 9)},
            {"SF_DP", "DP", numbered("DP", 5)},
            {"SF_PA", "PA", numbered("PA", 8)},
        };
    }();
    return all;
}

const std::vector<std::string>& ordinal_columns() {
    static const std::vector<std::string> cols = {"CT1", "CT2", "CT3", "CT4", "RT1", "RT2", "RC1"};
    return cols;
}

std::vector<std::string> item_columns() {
    std::vector<std::string> out;
    for (const auto& s : subscales()) out.insert(out.end(), s.items.begin(), s.items.end());
    return out;
}

std::vector<std::string> cohort_columns(bool with_composites) {
    std::vector<std::string> out = ordinal_columns();
    const auto items = item_columns();
    out.insert(out.end(), items.begin(), items.end());
    if (with_composites) {
        for (const auto& s : subscales()) out.push_back(s.composite);
    }
    return out;
}

ParameterVector default_true_parameters() {
    ParameterVector theta(23);
    theta << 0.35, -0.30, -0.25,                  // BO ~ CT, RT, RC
        0.8, 0.7, 0.5, 0.9, 0.8, -0.6,            // CT2, CT3, CT4, RT2, SF_DP, SF_PA
        0.6, 0.5, 0.4, 0.5,                       // var CT, RT, RC; resid BO
        0.4, 0.3, 0.35, 0.5, 0.3, 0.35, 0.3,      // err CT1..RC1
        0.3, 0.4, 0.5;                            // err SF_EE, SF_DP, SF_PA
    return theta;
}

std::vector<double> equiprobable_thresholds(int levels, double variance) {
    if (levels < 2) throw ValidationError("need at least 2 levels");
    const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    const double sd = std::sqrt(variance);
    std::vector<double> cuts;
    for (int j = 1; j < levels; ++j) {
        cuts.push_back(sd * boost::math::quantile(std_normal, static_cast<double>(j) / levels));
    }
    return cuts;
}

namespace {

int ordinal_levels(const Model& model, const std::string& column) {
    const auto* v = model.spec().find_variable(column);
    return static_cast<int>(v->scale.levels.size());
}

}  // namespace

void CohortConfig::validate() const {
    if (n < 2) throw ValidationError("N ≥ 2 required");
    const Model model(builtin_identified_variant());
    if (true_parameters && true_parameters->size() != model.free_count()) {
        throw ValidationError(fmt::format("true_parameters must have {} entries for the identified variant",
                                          model.free_count()));
    }
    for (const auto& [column, cuts] : thresholds) {
        const auto& cols = ordinal_columns();
        if (std::find(cols.begin(), cols.end(), column) == cols.end()) {
            throw ValidationError("thresholds given for unknown ordinal column '" + column + "'");
        }
        const int levels = ordinal_levels(model, column);
        if (static_cast<int>(cuts.size()) != levels - 1) {
            throw ValidationError(fmt::format("threshold/level mismatch for {}: {} levels need {} cut points, got {}",
                                              column, levels, levels - 1, cuts.size()));
        }
        for (std::size_t i = 1; i < cuts.size(); ++i) {
            if (!(cuts[i] > cuts[i - 1])) throw ValidationError("thresholds for " + column + " must be strictly increasing");
        }
    }
    if (item_residual_variance < 0.0) throw ValidationError("item residual variance must be >= 0");
}

Cohort generate_cohort(const CohortConfig& config) {
    config.validate();
    const Model model(builtin_identified_variant());
    const ParameterVector theta = config.true_parameters.value_or(default_true_parameters());
    const SystemMatrices sys = model.unpack(theta);
    if ((sys.psi.diagonal().array() < 0.0).any() || (sys.theta.diagonal().array() < 0.0).any()) {
        throw ValidationError("true_parameters contain a negative variance");
    }
    const Eigen::MatrixXd reduced = reduced_form(sys.beta);
    const Eigen::MatrixXd sigma = implied_sigma(model, sys).values();
    const auto k = model.node_count();
    const auto m = model.observed_count();
    const Eigen::VectorXd node_sd = sys.psi.diagonal().cwiseSqrt();
    const Eigen::VectorXd obs_sd = sys.theta.diagonal().cwiseSqrt();

    const auto& ordinals = ordinal_columns();
    std::vector<std::vector<double>> cuts;
    for (const auto& c : ordinals) {
        auto it = config.thresholds.find(c);
        const auto i = *model.observed_index(c);
        cuts.push_back(it != config.thresholds.end() ? it->second
                                                     : equiprobable_thresholds(ordinal_levels(model, c), sigma(i, i)));
    }

    const auto& scales = subscales();
    const double item_sd = std::sqrt(config.item_residual_variance);
    const auto n = static_cast<Eigen::Index>(config.n);

    Cohort cohort;
    cohort.data.names = cohort_columns(false);
    cohort.data.values.resize(n, static_cast<Eigen::Index>(cohort.data.names.size()));
    cohort.truth.names = {"CT", "RT", "RC", "BO", "SF_EE", "SF_DP", "SF_PA"};
    cohort.truth.values.resize(n, 7);

    PortableRng rng(config.seed);
    Eigen::VectorXd zeta(k), eps(m);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index j = 0; j < k; ++j) zeta[j] = node_sd[j] * rng.normal();
        for (Eigen::Index j = 0; j < m; ++j) eps[j] = obs_sd[j] * rng.normal();
        const Eigen::VectorXd eta = reduced * zeta;
        const Eigen::VectorXd y = sys.lambda * eta + eps;

        cohort.truth.values.row(r).head(4) = eta.transpose();
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < ordinals.size(); ++c) {
            const double v = y[*model.observed_index(ordinals[c])];
            if (config.continuous) {
                cohort.data.values(r, col++) = v;
            } else {
                const auto& t = cuts[c];
                cohort.data.values(r, col++) =
                    1.0 + static_cast<double>(std::count_if(t.begin(), t.end(), [&](double cut) { return v > cut; }));
            }
        }
        for (std::size_t s = 0; s < scales.size(); ++s) {
            const double factor = y[*model.observed_index(scales[s].composite)];
            cohort.truth.values(r, 4 + static_cast<Eigen::Index>(s)) = factor;
            for (std::size_t j = 0; j < scales[s].items.size(); ++j) {
                const double loading = j == 0 ? 1.0 : config.item_loading;
                double item = config.target_means[s] + loading * factor + item_sd * rng.normal();
                if (!config.continuous) item = std::clamp(std::floor(item + 0.5), 0.0, 6.0);
                cohort.data.values(r, col++) = item;
            }
        }
    }
    return cohort;
}

CovMatrix sample_covariance(const Table& data, const std::vector<std::string>& columns) {
    if (data.rows() < 2) throw ValidationError("sample covariance needs at least 2 rows");
    const Table sel = data.select(columns);
    const Eigen::RowVectorXd mean = sel.values.colwise().mean();
    const Eigen::MatrixXd centered = sel.values.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
    for (Eigen::Index j = 0; j < cov.rows(); ++j) {
        if (!(cov(j, j) > 0.0)) {
            throw ValidationError("column '" + columns[static_cast<std::size_t>(j)] + "' is constant (zero variance)");
        }
    }
    return CovMatrix(columns, cov);
}

const ColumnStats* StandardizationStats::find(std::string_view column) const {
    for (const auto& c : columns) {
        if (c.column == column) return &c;
    }
    return nullptr;
}

const ColumnStats& StandardizationStats::at(std::string_view column) const {
    if (const auto* c = find(column)) return *c;
    throw ValidationError("standardization stats have no entry for '" + std::string(column) + "'");
}

std::string StandardizationStats::to_csv() const {
    std::string out = "column,mean,sd,min,max\n";
    for (const auto& c : columns) {
        out += fmt::format("{},{:.17g},{:.17g},{},{}\n", c.column, c.mean, c.sd,
                           c.min ? fmt::format("{:.17g}", *c.min) : "", c.max ? fmt::format("{:.17g}", *c.max) : "");
    }
    return out;
}

StandardizationStats StandardizationStats::from_csv(std::string_view text) {
    StandardizationStats stats;
    std::size_t start = 0;
    bool header = true;
    std::size_t line_no = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string line(text.substr(start, pos - start));
        start = pos + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t s = 0;
        while (true) {
            auto p = line.find(',', s);
            cells.push_back(line.substr(s, p == std::string::npos ? std::string::npos : p - s));
            if (p == std::string::npos) break;
            s = p + 1;
        }
        if (header) {
            if (cells.size() < 3 || cells[0] != "column" || cells[1] != "mean" || cells[2] != "sd") {
                throw ParseError("stats CSV header must start with column,mean,sd");
            }
            header = false;
            continue;
        }
        if (cells.size() < 3) throw ParseError(fmt::format("stats CSV line {}: expected at least 3 fields", line_no));
        auto num = [&](const std::string& cell) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                return v;
            } catch (const std::exception&) {
                throw ParseError(fmt::format("stats CSV line {}: '{}' is not a number", line_no, cell));
            }
        };
        ColumnStats c{cells[0], num(cells[1]), num(cells[2]), std::nullopt, std::nullopt};
        if (cells.size() >= 5 && !cells[3].empty() && !cells[4].empty()) {
            c.min = num(cells[3]);
            c.max = num(cells[4]);
        }
        stats.columns.push_back(std::move(c));
    }
    if (header) throw ParseError("stats CSV is empty");
    return stats;
}

StandardizationStats compute_stats(const Table& data, const std::vector<std::string>& columns) {
    if (data.rows() < 2) throw ValidationError("standardization needs at least 2 rows");
    StandardizationStats stats;
    for (const auto& name : columns) {
        const Eigen::VectorXd col = data.column(name);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1);
        stats.columns.push_back({name, mean, std::sqrt(var), col.minCoeff(), col.maxCoeff()});
    }
    return stats;
}

Standardized standardize(const Table& data, const std::vector<std::string>& columns,
                         const std::optional<StandardizationStats>& stats) {
    Standardized out;
    out.stats = stats ? *stats : compute_stats(data, columns);
    out.z.names = columns;
    out.z.values.resize(data.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& c = out.stats.at(columns[j]);
        if (!(c.sd > 0.0)) throw ValidationError("column '" + columns[j] + "' has zero standard deviation");
        out.z.values.col(static_cast<Eigen::Index>(j)) = (data.column(columns[j]).array() - c.mean) / c.sd;
    }
    return out;
}

}  // namespace burnsem
