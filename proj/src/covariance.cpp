#include "burnsem/covariance.hpp"

#include "burnsem/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace burnsem {

CovMatrix::CovMatrix(std::vector<std::string> order, const Eigen::MatrixXd& values)
    : order_(std::move(order)), values_(0.5 * (values + values.transpose())) {
    if (values.rows() != values.cols()) throw ValidationError("covariance matrix is not square");
    if (static_cast<Eigen::Index>(order_.size()) != values.rows()) {
        throw ValidationError("covariance matrix has " + std::to_string(values.rows()) + " rows but " +
                              std::to_string(order_.size()) + " variable names");
    }
}

SpdFactor::SpdFactor(const Eigen::MatrixXd& m, const std::string& what) : llt_(m) {
    if (llt_.info() != Eigen::Success) throw NotPositiveDefinite(what + " is not positive definite");
    const auto& l = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double d = l(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(what + " is not positive definite");
        log_det_ += std::log(d);
    }
    log_det_ *= 2.0;
}

Eigen::MatrixXd SpdFactor::inverse() const {
    const auto n = llt_.matrixLLT().rows();
    return llt_.solve(Eigen::MatrixXd::Identity(n, n));
}

Eigen::MatrixXd reduced_form(const Eigen::MatrixXd& beta) {
    const auto k = beta.rows();
    const Eigen::MatrixXd i_minus_b = Eigen::MatrixXd::Identity(k, k) - beta;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(i_minus_b);
    if (!lu.isInvertible()) throw NumericalError("(I - B) is singular; the path graph must be acyclic");
    return lu.inverse();
}

namespace {

struct Expansion {
    Eigen::MatrixXd a;        // (I - B)^-1
    Eigen::MatrixXd g;        // Lambda A
    Eigen::MatrixXd h;        // Lambda C with C = A Psi A^T
    Eigen::MatrixXd sigma;
};

Expansion expand(const SystemMatrices& m) {
    Expansion e;
    e.a = reduced_form(m.beta);
    e.g = m.lambda * e.a;
    e.h = e.g * m.psi * e.a.transpose();
    e.sigma = e.g * m.psi * e.g.transpose() + m.theta;
    return e;
}

Eigen::MatrixXd derivative_from(const Model& model, const Expansion& e, Eigen::Index i) {
    const ModelEntry& entry = *model.free_parameters().at(static_cast<std::size_t>(i));
    const auto p = model.observed_count();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, p);
    switch (entry.kind) {
        case EntryKind::loading: {
            // dLambda = E_rc:  E C Lambda^T + (.)^T, row r of the first term is (Lambda C)(:, c)^T
            d.row(entry.row) = e.h.col(entry.col).transpose();
            break;
        }
        case EntryKind::path: {
            // dA = A E_ts A, so Lambda dA Psi A^T Lambda^T = G(:, t) H(:, s)^T
            d = e.g.col(entry.row) * e.h.col(entry.col).transpose();
            break;
        }
        case EntryKind::variance:
            return e.g.col(entry.row) * e.g.col(entry.row).transpose();
        case EntryKind::residual:
            d(entry.row, entry.row) = 1.0;
            return d;
    }
    return d + d.transpose();
}

Eigen::VectorXd trace_gradient(const Model& model, const ParameterVector& theta, const CovMatrix& sample,
                               bool paper_form) {
    const auto m = model.unpack(theta);
    const auto e = expand(m);
    const SpdFactor factor(e.sigma, "implied covariance");
    const Eigen::MatrixXd inv = factor.inverse();
    const Eigen::MatrixXd inv_s_inv = inv * sample.values() * inv;
    const Eigen::MatrixXd w = paper_form ? Eigen::MatrixXd(-(inv + inv_s_inv)) : Eigen::MatrixXd(inv - inv_s_inv);
    Eigen::VectorXd g(model.free_count());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        // tr(W D) for symmetric W
        g[i] = w.cwiseProduct(derivative_from(model, e, i)).sum();
    }
    return g;
}

void check_order(const Model& model, const CovMatrix& s) {
    if (s.order() != model.observed()) {
        throw ValidationError("sample covariance variable order does not match the model's observed_order");
    }
}

}  // namespace

CovMatrix implied_sigma(const Model& model, const SystemMatrices& m) {
    return CovMatrix(model.observed(), expand(m).sigma);
}

CovMatrix implied_sigma(const Model& model, const ParameterVector& theta) {
    return implied_sigma(model, model.unpack(theta));
}

double ml_discrepancy(const CovMatrix& sample, const CovMatrix& sigma) {
    if (sample.order() != sigma.order()) throw ValidationError("S and Sigma have different variable orders");
    const SpdFactor fs(sample.values(), "sample covariance");
    const SpdFactor fz(sigma.values(), "implied covariance");
    const double tr = fz.inverse().cwiseProduct(sample.values()).sum();
    return fz.log_det() + tr - fs.log_det() - static_cast<double>(sample.size());
}

double chi_square(double f_ml, long long n) {
    if (n < 2) throw ValidationError("chi-square needs N >= 2");
    return static_cast<double>(n - 1) * f_ml;
}

Eigen::MatrixXd sigma_derivative(const Model& model, const ParameterVector& theta, Eigen::Index i) {
    if (i < 0 || i >= model.free_count()) throw ValidationError("parameter index out of range");
    const auto m = model.unpack(theta);
    return derivative_from(model, expand(m), i);
}

std::vector<Eigen::MatrixXd> sigma_derivatives(const Model& model, const ParameterVector& theta) {
    const auto m = model.unpack(theta);
    const auto e = expand(m);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(model.free_count()));
    for (Eigen::Index i = 0; i < model.free_count(); ++i) out.push_back(derivative_from(model, e, i));
    return out;
}

Eigen::VectorXd analytic_gradient(const Model& model, const ParameterVector& theta, const CovMatrix& sample) {
    check_order(model, sample);
    return trace_gradient(model, theta, sample, false);
}

Eigen::VectorXd paper_gradient(const Model& model, const ParameterVector& theta, const CovMatrix& sample) {
    check_order(model, sample);
    return trace_gradient(model, theta, sample, true);
}

Eigen::VectorXd finite_difference_gradient(const Model& model, const ParameterVector& theta,
                                           const CovMatrix& sample) {
    check_order(model, sample);
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
        ParameterVector up = theta, down = theta;
        up[i] += h;
        down[i] -= h;
        const double fu = ml_discrepancy(sample, implied_sigma(model, up));
        const double fd = ml_discrepancy(sample, implied_sigma(model, down));
        g[i] = (fu - fd) / (2.0 * h);
    }
    return g;
}

double relative_deviation(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

GradientReport gradient_report(const Model& model, const ParameterVector& theta, const CovMatrix& sample) {
    GradientReport r;
    r.parameters = model.parameter_labels();
    r.analytic = analytic_gradient(model, theta, sample);
    r.paper_formula = paper_gradient(model, theta, sample);
    r.finite_difference = finite_difference_gradient(model, theta, sample);
    const auto n = theta.size();
    r.rel_dev_analytic_fd.resize(n);
    r.rel_dev_paper_fd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r.rel_dev_analytic_fd[i] = relative_deviation(r.analytic[i], r.finite_difference[i]);
        r.rel_dev_paper_fd[i] = relative_deviation(r.paper_formula[i], r.finite_difference[i]);
    }
    return r;
}

std::string GradientReport::to_csv() const {
    std::string out = "parameter,analytic,paper_formula,finite_difference,rel_dev_analytic_fd,rel_dev_paper_fd\n";
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", parameters[i], analytic[k],
                           paper_formula[k], finite_difference[k], rel_dev_analytic_fd[k], rel_dev_paper_fd[k]);
    }
    return out;
}

Discrepancy::Discrepancy(const Model& model, CovMatrix sample) : model_(&model), sample_(std::move(sample)) {
    check_order(model, sample_);
    sample_log_det_ = SpdFactor(sample_.values(), "sample covariance").log_det();
}

double Discrepancy::value(const ParameterVector& theta) const {
    const SpdFactor fz(implied_sigma(*model_, theta).values(), "implied covariance");
    const double tr = fz.inverse().cwiseProduct(sample_.values()).sum();
    return fz.log_det() + tr - sample_log_det_ - static_cast<double>(sample_.size());
}

Discrepancy::Evaluation Discrepancy::evaluate(const ParameterVector& theta) const {
    const auto m = model_->unpack(theta);
    const auto e = expand(m);
    const SpdFactor fz(e.sigma, "implied covariance");
    const Eigen::MatrixXd inv = fz.inverse();
    Evaluation out;
    out.value = fz.log_det() + inv.cwiseProduct(sample_.values()).sum() - sample_log_det_ -
                static_cast<double>(sample_.size());
    const Eigen::MatrixXd w = inv - inv * sample_.values() * inv;
    out.gradient.resize(model_->free_count());
    for (Eigen::Index i = 0; i < out.gradient.size(); ++i) {
        out.gradient[i] = w.cwiseProduct(derivative_from(*model_, e, i)).sum();
    }
    return out;
}

Eigen::VectorXd Discrepancy::paper_gradient(const ParameterVector& theta) const {
    return trace_gradient(*model_, theta, sample_, true);
}

}  // namespace burnsem
