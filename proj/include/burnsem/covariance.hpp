#pragma once

#include "burnsem/model_spec.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace burnsem {

// Symmetric covariance matrix over named variables. The constructor
// symmetrizes its input, so values() is always exactly symmetric.
class CovMatrix {
public:
    CovMatrix() = default;
    CovMatrix(std::vector<std::string> order, const Eigen::MatrixXd& values);

    const std::vector<std::string>& order() const { return order_; }
    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::Index size() const { return values_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

private:
    std::vector<std::string> order_;
    Eigen::MatrixXd values_;
};

// Cholesky factor of a symmetric positive-definite matrix. Throws
// NotPositiveDefinite; there is no pseudo-inverse fallback.
class SpdFactor {
public:
    explicit SpdFactor(const Eigen::MatrixXd& m, const std::string& what = "matrix");

    double log_det() const { return log_det_; }
    Eigen::MatrixXd inverse() const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double log_det_ = 0.0;
};

// (I - B)^-1; throws NumericalError when singular (a cyclic spec slipped
// past validation).
Eigen::MatrixXd reduced_form(const Eigen::MatrixXd& beta);

// Sigma = Lambda (I-B)^-1 Psi (I-B)^-T Lambda^T + Theta
CovMatrix implied_sigma(const Model& model, const SystemMatrices& m);
CovMatrix implied_sigma(const Model& model, const ParameterVector& theta);

// Wishart maximum-likelihood discrepancy
//   F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - m
double ml_discrepancy(const CovMatrix& sample, const CovMatrix& sigma);

// Chi-square statistic (N - 1) * F.
double chi_square(double f_ml, long long n);

// d Sigma / d theta_i by the product rule over the Sigma formula, with a
// one-hot derivative matrix for the parameter's cell.
Eigen::MatrixXd sigma_derivative(const Model& model, const ParameterVector& theta, Eigen::Index i);

// All derivatives at once; shares the (I-B)^-1 factorisation.
std::vector<Eigen::MatrixXd> sigma_derivatives(const Model& model, const ParameterVector& theta);

// tr[(Sigma^-1 - Sigma^-1 S Sigma^-1) dSigma/dtheta_i]: the derivative of
// ml_discrepancy. This is what the optimizer descends on.
Eigen::VectorXd analytic_gradient(const Model& model, const ParameterVector& theta, const CovMatrix& sample);

// -tr[(Sigma^-1 + Sigma^-1 S Sigma^-1) dSigma/dtheta_i], the literal trace
// formula with flipped sign and a +S term. Reported next to the other two
// routes; never used for descent (it is non-zero at Sigma = S).
Eigen::VectorXd paper_gradient(const Model& model, const ParameterVector& theta, const CovMatrix& sample);

// Central differences of ml_discrepancy o implied_sigma with
// h = 1e-6 * max(1, |theta_i|).
Eigen::VectorXd finite_difference_gradient(const Model& model, const ParameterVector& theta,
                                           const CovMatrix& sample);

// |a - b| / max(|a|, |b|, 1)
double relative_deviation(double a, double b);

struct GradientReport {
    std::vector<std::string> parameters;
    Eigen::VectorXd analytic;
    Eigen::VectorXd paper_formula;
    Eigen::VectorXd finite_difference;
    Eigen::VectorXd rel_dev_analytic_fd;
    Eigen::VectorXd rel_dev_paper_fd;

    std::string to_csv() const;
};

GradientReport gradient_report(const Model& model, const ParameterVector& theta, const CovMatrix& sample);

// Value and analytic gradient of the discrepancy for a fixed sample; caches
// the sample's log-determinant.
class Discrepancy {
public:
    Discrepancy(const Model& model, CovMatrix sample);

    struct Evaluation {
        double value = 0.0;
        Eigen::VectorXd gradient;
    };

    double value(const ParameterVector& theta) const;
    Evaluation evaluate(const ParameterVector& theta) const;
    Eigen::VectorXd paper_gradient(const ParameterVector& theta) const;

    const Model& model() const { return *model_; }
    const CovMatrix& sample() const { return sample_; }

private:
    const Model* model_;
    CovMatrix sample_;
    double sample_log_det_ = 0.0;
};

}  // namespace burnsem
