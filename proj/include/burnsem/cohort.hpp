#pragma once

#include "burnsem/covariance.hpp"
#include "burnsem/model_spec.hpp"
#include "burnsem/table.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace burnsem {

// mt19937_64 output is fixed by the standard; the uniform and normal
// transforms below are written out here so a seed yields the same cohort
// with any standard library.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1), 53 random bits
    double normal();   // Marsaglia polar method

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

inline constexpr std::uint64_t kDefaultSeed = 42;

struct Subscale {
    std::string composite;  // SF_EE, SF_DP, SF_PA
    std::string factor;     // EE, DP, PA
    std::vector<std::string> items;
};

// EE1-EE9, DP1-DP5, PA1-PA8.
const std::vector<Subscale>& subscales();
const std::vector<std::string>& ordinal_columns();  // CT1..CT4, RT1, RT2, RC1
std::vector<std::string> item_columns();
std::vector<std::string> cohort_columns(bool with_composites);

// Ground-truth parameters for the identified variant used by the generator
// when none are supplied.
ParameterVector default_true_parameters();

struct CohortConfig {
    long long n = 2000;
    std::uint64_t seed = kDefaultSeed;
    std::optional<ParameterVector> true_parameters;  // identified variant; default_true_parameters() when empty
    std::map<std::string, std::vector<double>> thresholds;  // per ordinal column; equiprobable when absent
    std::array<double, 3> target_means = {2.969, 2.945, 3.043};  // item-scale mean of SF_EE, SF_DP, SF_PA
    double item_loading = 0.8;        // first item of each subscale is fixed at 1
    double item_residual_variance = 0.5;
    bool continuous = false;          // skip discretisation of ordinals and items

    void validate() const;
};

struct Cohort {
    Table data;   // CT1..RC1, EE1..PA8, then SF_* once scored
    Table truth;  // CT, RT, RC, BO, SF_EE, SF_DP, SF_PA: generator latents
};

// Draws CT, RT, RC, the BO disturbance, indicator noise and item noise in a
// fixed per-respondent order, so output is a pure function of the config.
Cohort generate_cohort(const CohortConfig& config);

// Cut points splitting N(0, variance) into `levels` equiprobable bins.
std::vector<double> equiprobable_thresholds(int levels, double variance);

// Unbiased (N - 1) covariance of the named columns, in the given order.
// Throws ValidationError naming any constant column.
CovMatrix sample_covariance(const Table& data, const std::vector<std::string>& columns);

struct ColumnStats {
    std::string column;
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> min;
    std::optional<double> max;
};

struct StandardizationStats {
    std::vector<ColumnStats> columns;

    const ColumnStats& at(std::string_view column) const;  // throws ValidationError
    const ColumnStats* find(std::string_view column) const;

    // column,mean,sd,min,max; the reader also accepts the first three only.
    std::string to_csv() const;
    static StandardizationStats from_csv(std::string_view text);
};

StandardizationStats compute_stats(const Table& data, const std::vector<std::string>& columns);

struct Standardized {
    Table z;
    StandardizationStats stats;
};

// z = (x - mean) / sd with sample (N - 1) standard deviations. With `stats`
// the given means and sds are applied (out-of-sample rows); otherwise they
// are computed and returned.
Standardized standardize(const Table& data, const std::vector<std::string>& columns,
                         const std::optional<StandardizationStats>& stats = std::nullopt);

}  // namespace burnsem
