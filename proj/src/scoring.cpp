#include "burnsem/scoring.hpp"

#include "burnsem/covariance.hpp"
#include "burnsem/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace burnsem {

Eigen::MatrixXd FactorModel::implied_covariance() const {
    Eigen::MatrixXd sigma = factor_variance * loadings * loadings.transpose();
    sigma.diagonal() += residuals;
    return sigma;
}

ModelSpec subscale_spec(const Subscale& s) {
    ModelSpec spec;
    spec.name = "subscale-" + s.factor;
    spec.variables.push_back({s.factor, VariableKind::latent, {}});
    for (std::size_t i = 0; i < s.items.size(); ++i) {
        const auto& item = s.items[i];
        spec.variables.push_back({item, VariableKind::observed_indicator, {Scale::Type::likert_0_6, {}}});
        spec.loadings.push_back(
            {s.factor, item, i == 0 ? ParamStatus::fixed(1.0) : ParamStatus::free_from(kDefaultLoadingStart)});
        spec.observed_order.push_back(item);
    }
    spec.variances.push_back({s.factor, VarianceKind::exogenous_latent, ParamStatus::free_from(kDefaultVarianceStart)});
    for (const auto& item : s.items) {
        spec.variances.push_back({item, VarianceKind::indicator_residual, ParamStatus::free_from(kDefaultVarianceStart)});
    }
    return spec;
}

FactorModel factor_model_from(const Model& model, const ParameterVector& theta) {
    if (model.node_count() != 1) throw ValidationError("a factor model needs exactly one latent node");
    const SystemMatrices sys = model.unpack(theta);
    FactorModel fm;
    fm.items = model.observed();
    fm.loadings = sys.lambda.col(0);
    fm.factor_variance = sys.psi(0, 0);
    fm.residuals = sys.theta.diagonal();
    return fm;
}

Eigen::VectorXd regression_factor_scores(const Table& items, const FactorModel& fm,
                                         const std::optional<Eigen::VectorXd>& means) {
    const Table x = items.select(fm.items);
    const Eigen::Index m = static_cast<Eigen::Index>(fm.items.size());
    if (fm.loadings.size() != m || fm.residuals.size() != m) throw ValidationError("factor model dimension mismatch");
    const Eigen::VectorXd mu = means ? *means : Eigen::VectorXd(x.values.colwise().mean().transpose());
    if (mu.size() != m) throw ValidationError("item means have the wrong length");

    const Eigen::MatrixXd sigma = fm.implied_covariance();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1.0))) {
        throw NumericalError("singular item covariance for factor scoring");
    }
    const Eigen::VectorXd weights = fm.factor_variance * SpdFactor(sigma, "item covariance").solve(fm.loadings);
    return (x.values.rowwise() - mu.transpose()) * weights;
}

std::vector<SubscaleFit> score_cohort(Table& data, const DescentConfig& config) {
    std::vector<SubscaleFit> out;
    for (const auto& s : subscales()) {
        const Model model(subscale_spec(s));
        const CovMatrix sample = sample_covariance(data, s.items);
        FitResult result = fit(model, sample, config);
        FactorModel fm = factor_model_from(model, result.theta);
        const Table items = data.select(s.items);
        const double item_mean = items.values.mean();
        const Eigen::VectorXd scores = regression_factor_scores(data, fm);
        data.append(s.composite, (scores.array() + item_mean).matrix());
        out.push_back({s, std::move(fm), std::move(result), item_mean});
    }
    return out;
}

std::optional<double> LatentScores::find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return values[i];
    }
    return std::nullopt;
}

double LatentScores::at(std::string_view name) const {
    if (auto v = find(name)) return *v;
    throw ValidationError("no score for latent '" + std::string(name) + "'");
}

LatentScores approx_latent_scores(const std::map<std::string, double>& z, const Model& model) {
    LatentScores out;
    for (const auto& node : model.nodes()) {
        const auto* var = model.spec().find_variable(node);
        if (!var || var->kind != VariableKind::latent) continue;
        std::vector<std::string> indicators;
        for (const auto& l : model.spec().loadings) {
            if (l.latent != node) continue;
            const auto* ind = model.spec().find_variable(l.indicator);
            if (ind && ind->scale.type == Scale::Type::ordinal) indicators.push_back(l.indicator);
        }
        if (indicators.empty()) continue;
        double sum = 0.0;
        for (const auto& ind : indicators) {
            auto it = z.find(ind);
            if (it == z.end()) throw ValidationError("missing standardized value for " + ind);
            sum += it->second;
        }
        out.names.push_back(node);
        out.values.push_back(sum / static_cast<double>(indicators.size()));
    }
    return out;
}

double predict_bo(const LatentScores& scores, const Model& model, const ParameterVector& theta,
                  std::string_view target) {
    if (theta.size() != model.free_count()) throw ValidationError("parameter vector dimension mismatch");
    double bo = 0.0;
    for (const auto& e : model.entries()) {
        if (e.kind != EntryKind::path || e.second != target) continue;
        if (auto s = scores.find(e.first)) bo += (e.free_index ? theta[*e.free_index] : e.status.value) * *s;
    }
    return bo;
}

std::string_view to_string(LikertMode m) {
    switch (m) {
        case LikertMode::paper: return "paper";
        case LikertMode::range06: return "range06";
        case LikertMode::identity: return "identity";
    }
    return "?";
}

LikertMode parse_likert_mode(std::string_view s) {
    if (s == "paper") return LikertMode::paper;
    if (s == "range06") return LikertMode::range06;
    if (s == "identity") return LikertMode::identity;
    throw ValidationError("unknown transform mode '" + std::string(s) + "' (expected paper, range06 or identity)");
}

LikertCoeffs likert_coeffs(double min, double max, LikertMode mode) {
    if (mode == LikertMode::identity) return {1.0, 0.0, mode};
    if (!std::isfinite(min) || !std::isfinite(max) || !(max > min)) {
        throw ValidationError(fmt::format("degenerate score range [{}, {}] for the Likert transform", min, max));
    }
    const double span = mode == LikertMode::paper ? 7.0 : 6.0;
    const double a = span / (max - min);
    const double b = (mode == LikertMode::paper ? 1.0 : 0.0) - a * min;
    return {a, b, mode};
}

LikertCoeffs likert_coeffs(const std::vector<double>& scores, LikertMode mode) {
    if (mode == LikertMode::identity) return {1.0, 0.0, mode};
    if (scores.empty()) throw ValidationError("no scores for the Likert transform");
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    return likert_coeffs(*lo, *hi, mode);
}

double apply_transform(double score, const LikertCoeffs& c) { return c.a * score + c.b; }

std::string_view to_string(Band b) {
    switch (b) {
        case Band::low: return "low";
        case Band::moderate: return "moderate";
        case Band::high: return "high";
    }
    return "?";
}

std::string_view to_string(OverallRisk r) {
    switch (r) {
        case OverallRisk::low: return "low risk";
        case OverallRisk::intermediate: return "intermediate risk";
        case OverallRisk::high: return "high risk";
    }
    return "?";
}

Band band_of(double score) {
    if (!(score >= 0.0 && score <= 6.0)) throw ValidationError(fmt::format("score {} outside the 0-6 scale", score));
    if (score < 2.0) return Band::low;
    if (score < 4.0) return Band::moderate;
    return Band::high;
}

Interpretation interpret(double ee, double dp, double pa) {
    Interpretation r;
    r.ee = band_of(ee);
    r.dp = band_of(dp);
    r.pa = band_of(pa);
    r.risk_points = static_cast<int>(r.ee) + static_cast<int>(r.dp) + (2 - static_cast<int>(r.pa));
    r.overall = r.risk_points <= 1 ? OverallRisk::low : r.risk_points <= 4 ? OverallRisk::intermediate : OverallRisk::high;
    r.narrative = fmt::format("Emotional exhaustion {}, depersonalization {}, personal accomplishment {} "
                              "({} of 6 risk points): {} of burnout.",
                              to_string(r.ee), to_string(r.dp), to_string(r.pa), r.risk_points, to_string(r.overall));
    return r;
}

}  // namespace burnsem
