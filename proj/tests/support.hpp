#pragma once

#include "burnsem/model_spec.hpp"

#include <filesystem>
#include <string>

namespace support {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(BURNSEM_FIXTURE_DIR) / name;
}

// One latent F measured by one observed X with a unit loading and no
// residual: Sigma = var(F), a 1 x 1 matrix with a single free parameter.
inline burnsem::ModelSpec one_by_one() {
    using namespace burnsem;
    ModelSpec spec;
    spec.name = "one-by-one";
    spec.variables = {{"F", VariableKind::latent, {}}, {"X", VariableKind::observed_indicator, {}}};
    spec.loadings = {{"F", "X", ParamStatus::fixed(1.0)}};
    spec.variances = {{"F", VarianceKind::exogenous_latent, ParamStatus::free_from(1.0)},
                      {"X", VarianceKind::indicator_residual, ParamStatus::fixed(0.0)}};
    spec.observed_order = {"X"};
    return spec;
}

// Scratch directory unique to the calling test.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("burnsem-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace support
