#include "burnsem/predictor.hpp"

#include "burnsem/error.hpp"
#include "burnsem/table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

namespace burnsem {

std::string format_params(const Model& model, const ParameterVector& theta, const Json& fit_info) {
    if (theta.size() != model.free_count()) throw ValidationError("parameter vector dimension mismatch");
    Json root;
    root["model"] = model.name();
    root["spec"] = Json::parse(serialize_model(model.spec()));
    Json params = Json::array();
    const auto labels = model.parameter_labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        params.push_back({{"label", labels[i]}, {"value", theta[static_cast<Eigen::Index>(i)]}});
    }
    root["parameters"] = std::move(params);
    root["fit"] = fit_info;
    return root.dump(2) + "\n";
}

FittedModel parse_params(std::string_view text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("parameter file: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("parameter file must hold a JSON object");
    try {
        std::optional<ModelSpec> spec;
        if (root.contains("spec")) {
            spec = parse_model(root["spec"].dump());
        } else if (root.contains("model")) {
            spec = builtin_model(root["model"].get<std::string>());
            if (!spec) throw ValidationError("parameter file names unknown model '" + root["model"].get<std::string>() + "'");
        } else {
            throw ValidationError("parameter file has neither 'spec' nor 'model'");
        }
        Model model(std::move(*spec));
        ParameterVector theta = model.initial_parameters();
        std::vector<bool> seen(static_cast<std::size_t>(model.free_count()), false);
        for (const auto& p : root.at("parameters")) {
            const auto label = p.at("label").get<std::string>();
            const auto idx = model.parameter_index(label);
            if (!idx) throw ValidationError("parameter file: unknown parameter '" + label + "'");
            const double v = p.at("value").get<double>();
            if (!std::isfinite(v)) throw ValidationError("parameter file: non-finite value for '" + label + "'");
            theta[*idx] = v;
            seen[static_cast<std::size_t>(*idx)] = true;
        }
        const auto labels = model.parameter_labels();
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (!seen[i]) throw ValidationError("parameter file: missing value for '" + labels[i] + "'");
        }
        Json info = root.contains("fit") ? root["fit"] : Json::object();
        return {std::move(model), std::move(theta), std::move(info)};
    } catch (const Json::exception& e) {
        throw ParseError(std::string("parameter file: ") + e.what());
    }
}

HypotheticalInput parse_input_list(std::string_view text) {
    HypotheticalInput in;
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(',', start);
        if (pos == std::string_view::npos) pos = text.size();
        auto cell = text.substr(start, pos - start);
        while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
        while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
        if (count >= in.codes.size()) throw ValidationError("expected 7 comma-separated codes (CT1,CT2,CT3,CT4,RT1,RT2,RC1)");
        long long v = 0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
            throw ValidationError(fmt::format("{} is not an integer code: '{}'", ordinal_columns()[count], cell));
        }
        in.codes[count++] = v;
        start = pos + 1;
    }
    if (count != in.codes.size()) throw ValidationError("expected 7 comma-separated codes (CT1,CT2,CT3,CT4,RT1,RT2,RC1)");
    return in;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

Predictor::Predictor(Model model, ParameterVector theta, StandardizationStats stats, std::string version)
    : model_(std::move(model)), theta_(std::move(theta)), stats_(std::move(stats)), version_(std::move(version)) {
    if (theta_.size() != model_.free_count()) throw ValidationError("parameter vector dimension mismatch");
    for (const auto& c : ordinal_columns()) {
        const auto& s = stats_.at(c);
        if (!(s.sd > 0.0)) throw ValidationError("stats: sd of " + c + " must be > 0");
        const auto* v = model_.spec().find_variable(c);
        if (!v || v->scale.type != Scale::Type::ordinal) throw ValidationError("model has no ordinal variable " + c);
    }
    for (const auto& s : subscales()) stats_.at(s.composite);
}

Predictor Predictor::load(const std::filesystem::path& params, const std::filesystem::path& stats,
                          const std::optional<std::string>& expected_model) {
    const std::string params_text = read_file(params);
    const std::string stats_text = read_file(stats);
    FittedModel fm = parse_params(params_text);
    if (expected_model && *expected_model != fm.model.name()) {
        throw ValidationError("parameter file holds model '" + fm.model.name() + "', not '" + *expected_model + "'");
    }
    return Predictor(std::move(fm.model), std::move(fm.theta), StandardizationStats::from_csv(stats_text),
                     fnv1a_hex(params_text + '\n' + stats_text));
}

std::vector<FieldError> Predictor::check(const HypotheticalInput& input) const {
    std::vector<FieldError> errors;
    const auto& cols = ordinal_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto levels = static_cast<long long>(model_.spec().find_variable(cols[i])->scale.levels.size());
        if (input.codes[i] < 1 || input.codes[i] > levels) {
            errors.push_back({cols[i], fmt::format("{} out of range 1..{}", cols[i], levels)});
        }
    }
    return errors;
}

namespace {

// Direction in which the composite moves with BO: sign of the BO -> SF
// loading, or of the SF -> BO path when the composite is a predictor.
double composite_sign(const Model& model, const ParameterVector& theta, const std::string& composite) {
    for (const auto& e : model.entries()) {
        const bool loading = e.kind == EntryKind::loading && e.first == "BO" && e.second == composite;
        const bool path = e.kind == EntryKind::path && e.first == composite && e.second == "BO";
        if (loading || path) {
            const double v = e.free_index ? theta[*e.free_index] : e.status.value;
            return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0;
        }
    }
    return 0.0;
}

}  // namespace

BOPrediction Predictor::predict(const HypotheticalInput& input, LikertMode mode) const {
    if (auto errors = check(input); !errors.empty()) {
        std::vector<std::string> msgs;
        for (const auto& e : errors) msgs.push_back(e.message);
        throw ValidationError(fmt::format("{}", fmt::join(msgs, "; ")));
    }
    BOPrediction p;
    p.input = input;
    p.mode = mode;
    p.model_name = model_.name();
    p.model_version = version_;

    std::map<std::string, double> z;
    const auto& cols = ordinal_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto& s = stats_.at(cols[i]);
        const double zi = (static_cast<double>(input.codes[i]) - s.mean) / s.sd;
        p.standardized.push_back(zi);
        z[cols[i]] = zi;
    }
    p.latent_scores = approx_latent_scores(z, model_);
    p.bo_standardized = predict_bo(p.latent_scores, model_, theta_);

    std::array<double, 3> clamped{};
    std::size_t k = 0;
    for (const auto& sub : subscales()) {
        const auto& s = stats_.at(sub.composite);
        SubscalePrediction sp;
        sp.name = sub.composite;
        sp.cohort_mean = s.mean;
        sp.raw = s.mean + composite_sign(model_, theta_, sub.composite) * p.bo_standardized * s.sd;
        if (mode == LikertMode::identity) {
            sp.coeffs = likert_coeffs(0.0, 0.0, mode);
        } else {
            if (!s.min || !s.max) throw ValidationError("stats lack min/max for " + sub.composite);
            sp.coeffs = likert_coeffs(*s.min, *s.max, mode);
        }
        sp.transformed = apply_transform(sp.raw, sp.coeffs);
        clamped[k] = std::clamp(sp.transformed, 0.0, 6.0);
        sp.band = band_of(clamped[k]);
        p.subscales.push_back(std::move(sp));
        ++k;
    }
    p.interpretation = interpret(clamped[0], clamped[1], clamped[2]);
    return p;
}

namespace {

std::string fixed4(double v) {
    std::string s = fmt::format("{:.4f}", v);
    if (s == "-0.0000") s = "0.0000";
    return s;
}

}  // namespace

Json to_json(const BOPrediction& p) {
    Json j;
    j["model"] = p.model_name;
    j["model_version"] = p.model_version;
    j["transform_mode"] = std::string(to_string(p.mode));
    const auto& cols = ordinal_columns();
    Json inputs = Json::object(), z = Json::object();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        inputs[cols[i]] = p.input.codes[i];
        z[cols[i]] = p.standardized[i];
    }
    j["inputs"] = std::move(inputs);
    j["standardized_inputs"] = std::move(z);
    Json latent = Json::object(), latent_display = Json::object();
    for (std::size_t i = 0; i < p.latent_scores.names.size(); ++i) {
        latent[p.latent_scores.names[i]] = p.latent_scores.values[i];
        latent_display[p.latent_scores.names[i]] = fixed4(p.latent_scores.values[i]);
    }
    j["latent_scores"] = std::move(latent);
    j["bo_standardized"] = p.bo_standardized;
    Json subs = Json::object(), subs_display = Json::object();
    for (const auto& s : p.subscales) {
        subs[s.name] = {{"cohort_mean", s.cohort_mean}, {"raw", s.raw},         {"a", s.coeffs.a},
                        {"b", s.coeffs.b},              {"transformed", s.transformed}, {"band", std::string(to_string(s.band))}};
        subs_display[s.name] = {{"raw", fixed4(s.raw)}, {"transformed", fixed4(s.transformed)},
                                {"a", fixed4(s.coeffs.a)}, {"b", fixed4(s.coeffs.b)}};
    }
    j["subscales"] = std::move(subs);
    j["risk_points"] = p.interpretation.risk_points;
    j["overall_risk"] = std::string(to_string(p.interpretation.overall));
    j["narrative"] = p.interpretation.narrative;
    j["display"] = {{"latent_scores", std::move(latent_display)},
                    {"bo_standardized", fixed4(p.bo_standardized)},
                    {"subscales", std::move(subs_display)}};
    return j;
}

std::string format_prediction_report(const BOPrediction& p) {
    const auto& cols = ordinal_columns();
    std::string out = fmt::format("Model: {} (version {})\n", p.model_name, p.model_version);
    out += fmt::format("--- Hypothetical individual ---\n {}\n {}\n", fmt::join(cols, " "), fmt::join(p.input.codes, " "));
    out += "--- Standardized inputs ---\n";
    for (std::size_t i = 0; i < cols.size(); ++i) out += fmt::format(" {}: {:.7f}\n", cols[i], p.standardized[i]);
    out += "--- Latent factor scores (indicator mean) ---\n";
    for (std::size_t i = 0; i < p.latent_scores.names.size(); ++i) {
        out += fmt::format(" {}: {}\n", p.latent_scores.names[i], fixed4(p.latent_scores.values[i]));
    }
    out += fmt::format("BO predicted (standardized) = {}\n", fixed4(p.bo_standardized));
    out += fmt::format("--- Subscale scores (transform: {}) ---\n", to_string(p.mode));
    for (const auto& s : p.subscales) {
        out += fmt::format(" {}: a = {}, b = {}; cohort mean {}, predicted {}, transformed {} ({})\n", s.name,
                           fixed4(s.coeffs.a), fixed4(s.coeffs.b), fixed4(s.cohort_mean), fixed4(s.raw),
                           fixed4(s.transformed), to_string(s.band));
    }
    out += "--- Interpretation ---\n " + p.interpretation.narrative + "\n";
    return out;
}

}  // namespace burnsem
