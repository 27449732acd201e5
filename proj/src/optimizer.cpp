#include "burnsem/optimizer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace burnsem {

void DescentConfig::validate() const {
    if (!(eta > 0.0)) throw ValidationError("learning rate must be > 0");
    if (!(variance_floor > 0.0)) throw ValidationError("variance floor must be > 0");
    if (max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
    if (grad_tolerance < 0.0) throw ValidationError("gradient tolerance must be >= 0");
}

ParameterVector descent_step(const Model& model, const ParameterVector& theta, const Eigen::VectorXd& gradient,
                             const DescentConfig& config, double eta) {
    if (gradient.size() != theta.size() || theta.size() != model.free_count()) {
        throw ValidationError("gradient length does not match the free-parameter count");
    }
    if (!gradient.allFinite()) throw NumericalError("non-finite gradient entry");
    ParameterVector next = theta - eta * gradient;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
        if (model.is_variance_parameter(i)) next[i] = std::max(next[i], config.variance_floor);
    }
    return next;
}

ParameterVector descent_step(const Model& model, const ParameterVector& theta, const Eigen::VectorXd& gradient,
                             const DescentConfig& config) {
    return descent_step(model, theta, gradient, config, config.eta);
}

namespace {

IterationTrace make_trace(long t, const ParameterVector& theta, const Discrepancy::Evaluation& ev,
                          const Discrepancy& objective) {
    return {t, theta, ev.value, ev.gradient.norm(), objective.paper_gradient(theta).norm()};
}

}  // namespace

FitResult fit(const Model& model, const CovMatrix& sample, const DescentConfig& config,
              std::optional<ParameterVector> start) {
    config.validate();
    const Discrepancy objective(model, sample);
    ParameterVector theta = start ? *start : model.initial_parameters();
    if (theta.size() != model.free_count()) throw ValidationError("start vector has the wrong length");

    FitResult result;
    Discrepancy::Evaluation current = objective.evaluate(theta);
    if (!std::isfinite(current.value)) throw NumericalError("F_ML is not finite at the starting values");
    result.traces.push_back(make_trace(0, theta, current, objective));

    for (long t = 1;; ++t) {
        if (current.gradient.norm() <= config.grad_tolerance) {
            result.status = FitStatus::converged;
            break;
        }
        if (t > config.max_iterations) {
            result.status = FitStatus::max_iterations;
            break;
        }

        double eta = config.eta;
        std::optional<ParameterVector> accepted;
        for (int halvings = 0; halvings <= (config.step_halving ? config.max_halvings : 0); ++halvings) {
            ParameterVector candidate = descent_step(model, theta, current.gradient, config, eta);
            double value = std::numeric_limits<double>::infinity();
            bool pd = true;
            try {
                value = objective.value(candidate);
            } catch (const NotPositiveDefinite&) {
                pd = false;
            }
            if (!config.step_halving) {
                if (!pd) throw DivergenceError("implied covariance lost positive definiteness", result.last());
                if (!std::isfinite(value)) throw DivergenceError("F_ML became non-finite", result.last());
                accepted = std::move(candidate);
                break;
            }
            if (pd && value <= current.value) {
                accepted = std::move(candidate);
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            result.status = FitStatus::stalled;
            break;
        }
        theta = std::move(*accepted);
        current = objective.evaluate(theta);
        if (!std::isfinite(current.value) || !current.gradient.allFinite()) {
            throw DivergenceError("F_ML became non-finite", result.last());
        }
        result.traces.push_back(make_trace(t, theta, current, objective));
    }
    result.theta = theta;
    return result;
}

std::string_view to_string(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::stalled: return "stalled";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

double entry_value(const ModelEntry& e, const ParameterVector& theta) {
    return e.free_index ? theta[*e.free_index] : e.status.value;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct Group {
    std::vector<std::string> names;
    std::vector<double> values;

    void add(const std::string& n, double v) {
        names.push_back(n);
        values.push_back(v);
    }
};

std::string group_line(const std::string& title, const Group& g) {
    return fmt::format(" {} ({}): {:.4f}\n", title, fmt::join(g.names, ", "), fmt::join(g.values, ", "));
}

std::string term(double coef, const std::string& var, bool first) {
    if (first) return fmt::format("{:.4f}*{}", coef, var);
    return fmt::format(" {} {:.4f}*{}", coef < 0 ? '-' : '+', std::abs(coef), var);
}

}  // namespace

std::string report_iteration(const IterationTrace& trace, const Model& model, std::optional<long long> n) {
    const auto& entries = model.entries();
    const auto& theta = trace.theta;
    std::string out = fmt::format("--- Iteration {} ---\nEstimated parameters:\n", trace.t);

    // Paths grouped by target.
    for (const auto& node : model.nodes()) {
        Group g;
        for (const auto& e : entries) {
            if (e.kind == EntryKind::path && e.second == node) g.add(e.first, entry_value(e, theta));
        }
        if (!g.names.empty()) {
            out += fmt::format(" p ({} on {}): {:.4f}\n", node, fmt::join(g.names, ", "), fmt::join(g.values, ", "));
        }
    }
    // Measurement weights per latent.
    for (const auto& node : model.nodes()) {
        Group g;
        for (const auto& e : entries) {
            if (e.kind == EntryKind::loading && !e.implicit && e.first == node) g.add(e.second, entry_value(e, theta));
        }
        if (!g.names.empty()) out += group_line("w_" + lower(node), g);
    }
    Group latent_var, composite_var, residual_var, structural;
    for (const auto& e : entries) {
        if (e.kind == EntryKind::variance) {
            const auto* v = model.spec().find_variable(e.first);
            if (e.variance_kind == VarianceKind::structural_residual) {
                structural.add(e.first, entry_value(e, theta));
            } else if (v && v->kind == VariableKind::latent) {
                latent_var.add(e.first, entry_value(e, theta));
            } else {
                composite_var.add(e.first, entry_value(e, theta));
            }
        } else if (e.kind == EntryKind::residual && (e.status.free || e.status.value != 0.0)) {
            residual_var.add(e.first, entry_value(e, theta));
        }
    }
    if (!latent_var.names.empty()) out += group_line("Latent variances", latent_var);
    if (!composite_var.names.empty()) out += group_line("Observed variances", composite_var);
    if (!residual_var.names.empty()) out += group_line("Indicator residual variances", residual_var);
    for (std::size_t i = 0; i < structural.names.size(); ++i) {
        out += fmt::format(" Residual variance {}: {:.4f}\n", structural.names[i], structural.values[i]);
    }
    out += fmt::format(" Cost (F_ML): {:.4f}\n", trace.f_ml);
    if (n) out += fmt::format(" Chi-square ((N-1)*F_ML, N={}): {:.4f}\n", *n, chi_square(trace.f_ml, *n));
    out += fmt::format(" Gradient norm (analytic): {:.6e}\n", trace.gradient_norm);
    out += fmt::format(" Gradient norm (literal trace formula): {:.6e}\n", trace.paper_gradient_norm);

    out += "\nFitted equations:\n";
    for (const auto& node : model.nodes()) {
        std::string rhs;
        for (const auto& e : entries) {
            if (e.kind == EntryKind::path && e.second == node) rhs += term(entry_value(e, theta), e.first, rhs.empty());
        }
        if (!rhs.empty()) out += fmt::format(" Structural model {}: {} = {} + e_{}\n", node, node, rhs, node);
    }
    for (const auto& node : model.nodes()) {
        std::vector<std::string> eqs;
        for (const auto& e : entries) {
            if (e.kind == EntryKind::loading && !e.implicit && e.first == node) {
                eqs.push_back(fmt::format("{} = {} + e_{}", e.second, term(entry_value(e, theta), node, true), e.second));
            }
        }
        if (!eqs.empty()) out += fmt::format(" Measurement model {}: {}\n", node, fmt::join(eqs, ", "));
    }
    return out;
}

std::string trace_csv(const std::vector<IterationTrace>& traces, const Model& model) {
    std::string out = "t,F_ML,grad_norm";
    for (const auto& l : model.parameter_labels()) out += "," + l;
    out += "\n";
    for (const auto& tr : traces) {
        out += fmt::format("{},{:.17g},{:.17g}", tr.t, tr.f_ml, tr.gradient_norm);
        for (Eigen::Index i = 0; i < tr.theta.size(); ++i) out += fmt::format(",{:.17g}", tr.theta[i]);
        out += "\n";
    }
    return out;
}

}  // namespace burnsem
