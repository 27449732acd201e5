#pragma once

#include "burnsem/cohort.hpp"
#include "burnsem/model_spec.hpp"
#include "burnsem/scoring.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace burnsem {

using Json = nlohmann::ordered_json;

// Parameter file: {"model", "spec", "parameters": [{"label", "value"}...], "fit"}.
std::string format_params(const Model& model, const ParameterVector& theta, const Json& fit_info = Json::object());

struct FittedModel {
    Model model;
    ParameterVector theta;
    Json fit_info;
};

// The embedded spec wins; a file without one falls back to the built-in
// named by "model". Every free parameter must be present.
FittedModel parse_params(std::string_view text);

// Raw codes in the fixed order CT1, CT2, CT3, CT4, RT1, RT2, RC1.
struct HypotheticalInput {
    std::array<long long, 7> codes{};
};

// "3,2,2,1,1,1,1"
HypotheticalInput parse_input_list(std::string_view text);

struct FieldError {
    std::string field;
    std::string message;
};

struct SubscalePrediction {
    std::string name;
    double cohort_mean = 0.0;
    double raw = 0.0;
    LikertCoeffs coeffs;
    double transformed = 0.0;
    Band band = Band::low;
};

struct BOPrediction {
    HypotheticalInput input;
    std::vector<double> standardized;
    LatentScores latent_scores;
    double bo_standardized = 0.0;
    std::vector<SubscalePrediction> subscales;
    Interpretation interpretation;
    LikertMode mode = LikertMode::range06;
    std::string model_name;
    std::string model_version;
};

// Immutable fitted model + cohort stats; predict() is safe to call
// concurrently.
class Predictor {
public:
    Predictor(Model model, ParameterVector theta, StandardizationStats stats, std::string version);

    static Predictor load(const std::filesystem::path& params, const std::filesystem::path& stats,
                          const std::optional<std::string>& expected_model = std::nullopt);

    const Model& model() const { return model_; }
    const ParameterVector& theta() const { return theta_; }
    const StandardizationStats& stats() const { return stats_; }
    const std::string& version() const { return version_; }

    // Range check against the ordinal levels of the model; empty when valid.
    std::vector<FieldError> check(const HypotheticalInput& input) const;

    // Throws ValidationError listing every bad field.
    BOPrediction predict(const HypotheticalInput& input, LikertMode mode = LikertMode::range06) const;

private:
    Model model_;
    ParameterVector theta_;
    StandardizationStats stats_;
    std::string version_;
};

// 64-bit FNV-1a, lowercase hex.
std::string fnv1a_hex(std::string_view data);

// Shared by the CLI and the HTTP service so both emit the same numbers.
Json to_json(const BOPrediction& p);
std::string format_prediction_report(const BOPrediction& p);

}  // namespace burnsem
