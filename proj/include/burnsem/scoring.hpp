#pragma once

#include "burnsem/cohort.hpp"
#include "burnsem/model_spec.hpp"
#include "burnsem/optimizer.hpp"
#include "burnsem/table.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace burnsem {

// Single-factor measurement model: x = mu + lambda * f + e,
// var(f) = psi, cov(e) = diag(residuals).
struct FactorModel {
    std::vector<std::string> items;
    Eigen::VectorXd loadings;
    double factor_variance = 1.0;
    Eigen::VectorXd residuals;

    Eigen::MatrixXd implied_covariance() const;
};

// One-factor spec for a subscale; the first item carries the unit loading.
ModelSpec subscale_spec(const Subscale& s);

// Reads lambda, psi and residual variances of the single latent of `model`.
FactorModel factor_model_from(const Model& model, const ParameterVector& theta);

// Regression-method scores psi * lambda' * Sigma^-1 * (x - mu), one per row.
// `means` defaults to the column means of `items`. Throws NumericalError when
// the implied item covariance is singular.
Eigen::VectorXd regression_factor_scores(const Table& items, const FactorModel& fm,
                                         const std::optional<Eigen::VectorXd>& means = std::nullopt);

struct SubscaleFit {
    Subscale subscale;
    FactorModel factor;
    FitResult fit;
    double item_mean = 0.0;  // grand mean of the subscale's items
};

// Fits each subscale's one-factor model on the cohort items and appends
// SF_EE, SF_DP, SF_PA = item_mean + regression score.
std::vector<SubscaleFit> score_cohort(Table& data, const DescentConfig& config = {});

struct LatentScores {
    std::vector<std::string> names;
    std::vector<double> values;

    std::optional<double> find(std::string_view name) const;
    double at(std::string_view name) const;
};

// Each latent whose indicators are all observed ordinals scores as the plain
// mean of their standardized values. Latents with no ordinal indicators are
// skipped; a partially covered latent is an error.
LatentScores approx_latent_scores(const std::map<std::string, double>& z, const Model& model);

// Linear predictor of `target` from the paths whose source has a score.
double predict_bo(const LatentScores& scores, const Model& model, const ParameterVector& theta,
                  std::string_view target = "BO");

enum class LikertMode { paper, range06, identity };

struct LikertCoeffs {
    double a = 1.0;
    double b = 0.0;
    LikertMode mode = LikertMode::identity;
};

std::string_view to_string(LikertMode m);
LikertMode parse_likert_mode(std::string_view s);  // paper | range06 | identity

// paper:    a = 7 / (max - min), b = 1 - a * min
// range06:  a = 6 / (max - min), b = -a * min
// identity: a = 1, b = 0
LikertCoeffs likert_coeffs(double min, double max, LikertMode mode);
LikertCoeffs likert_coeffs(const std::vector<double>& scores, LikertMode mode);
double apply_transform(double score, const LikertCoeffs& c);

enum class Band { low, moderate, high };
enum class OverallRisk { low, intermediate, high };

std::string_view to_string(Band b);
std::string_view to_string(OverallRisk r);

// low [0, 2), moderate [2, 4), high [4, 6]
Band band_of(double score);

struct Interpretation {
    Band ee = Band::low;
    Band dp = Band::low;
    Band pa = Band::low;
    int risk_points = 0;  // 0..6
    OverallRisk overall = OverallRisk::low;
    std::string narrative;
};

// Scores on the 0-6 scale. EE and DP add 0/1/2 points for low/moderate/high,
// PA adds 2/1/0. 0-1 points is low risk, 2-4 intermediate, 5-6 high.
Interpretation interpret(double ee, double dp, double pa);

}  // namespace burnsem
