#pragma once

#include "burnsem/covariance.hpp"
#include "burnsem/error.hpp"
#include "burnsem/model_spec.hpp"

#include <optional>
#include <string>
#include <vector>

namespace burnsem {

struct DescentConfig {
    double eta = 1e-3;
    long max_iterations = 10000;
    double grad_tolerance = 1e-6;
    double variance_floor = 1e-4;
    bool step_halving = true;
    int max_halvings = 30;

    void validate() const;
};

struct IterationTrace {
    long t = 0;
    ParameterVector theta;
    double f_ml = 0.0;
    double gradient_norm = 0.0;        // L2 norm of the analytic gradient
    double paper_gradient_norm = 0.0;  // L2 norm of the literal trace formula
};

enum class FitStatus { converged, max_iterations, stalled };

struct FitResult {
    ParameterVector theta;
    std::vector<IterationTrace> traces;
    FitStatus status = FitStatus::max_iterations;

    const IterationTrace& last() const { return traces.back(); }
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, IterationTrace last_good)
        : NumericalError(what), last_good_(std::move(last_good)) {}
    const IterationTrace& last_good() const { return last_good_; }

private:
    IterationTrace last_good_;
};

// theta'_i = theta_i - eta * g_i, then variance parameters are projected up to
// the variance floor.
ParameterVector descent_step(const Model& model, const ParameterVector& theta, const Eigen::VectorXd& gradient,
                             const DescentConfig& config, double eta);
ParameterVector descent_step(const Model& model, const ParameterVector& theta, const Eigen::VectorXd& gradient,
                             const DescentConfig& config);

// Gradient descent on ml_discrepancy using the analytic gradient. Stops when
// the gradient norm reaches grad_tolerance or after max_iterations updates.
// With step_halving, a step that would raise F is retried at eta/2 (up to
// max_halvings times, eta restarts from config.eta each iteration); if no
// halving helps the run ends with FitStatus::stalled.
FitResult fit(const Model& model, const CovMatrix& sample, const DescentConfig& config = {},
              std::optional<ParameterVector> start = std::nullopt);

std::string_view to_string(FitStatus s);

// Iteration block: grouped parameters, cost, chi-square when n is known, both
// gradient norms and the fitted equations.
std::string report_iteration(const IterationTrace& trace, const Model& model,
                             std::optional<long long> n = std::nullopt);

// t,F_ML,grad_norm,<parameter labels...>
std::string trace_csv(const std::vector<IterationTrace>& traces, const Model& model);

}  // namespace burnsem
