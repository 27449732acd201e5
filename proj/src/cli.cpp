#include "burnsem/cli.hpp"

#include "burnsem/cohort.hpp"
#include "burnsem/covariance.hpp"
#include "burnsem/error.hpp"
#include "burnsem/optimizer.hpp"
#include "burnsem/predictor.hpp"
#include "burnsem/scoring.hpp"
#include "burnsem/service.hpp"
#include "burnsem/table.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <memory>
#include <ostream>

namespace burnsem {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string model = "identified";
    long long n = 2000;
    std::optional<long long> n_override;
    std::uint64_t seed = kDefaultSeed;
    DescentConfig descent;
    std::string data, params, stats, input, out, manifest;
    std::string transform_mode = "range06";
    bool gradient_report = false;
    bool continuous = false;
    std::string host = "127.0.0.1";
    int port = 8080;
};

fs::path sibling(const fs::path& out, const std::string& suffix) {
    return out.parent_path() / (out.stem().string() + suffix);
}

ModelSpec resolve_model(const std::string& name) {
    if (auto spec = builtin_model(name)) return *spec;
    if (fs::exists(name)) return parse_model(read_file(name));
    throw ValidationError("unknown model '" + name + "' (expected paper-literal, identified or a spec file)");
}

void write_manifest(const fs::path& out, const std::vector<std::string>& args, const std::string& command,
                    const Json& inputs, const Json& outputs, const Json& overrides, const Json& extra = Json::object()) {
    Json m;
    m["command"] = command;
    m["argv"] = args;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["overrides"] = overrides;
    m["timestamp"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                             std::chrono::system_clock::now())));
    write_file(sibling(out, ".manifest.json"), m.dump(2) + "\n");
}

Json descent_json(const DescentConfig& c) {
    return {{"eta", c.eta}, {"max_iterations", c.max_iterations}, {"grad_tolerance", c.grad_tolerance}};
}

int cmd_simulate(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.out.empty()) throw ValidationError("--out is required");
    CohortConfig config;
    config.n = o.n;
    config.seed = o.seed;
    config.continuous = o.continuous;
    Cohort cohort = generate_cohort(config);
    score_cohort(cohort.data, o.descent);

    const fs::path cohort_path = o.out;
    const fs::path stats_path = sibling(cohort_path, ".stats.csv");
    const fs::path cov_path = sibling(cohort_path, ".cov.csv");
    const Model identified(builtin_identified_variant());
    std::vector<std::string> stat_columns = ordinal_columns();
    for (const auto& s : subscales()) stat_columns.push_back(s.composite);

    write_file(cohort_path, format_csv(cohort.data));
    write_file(stats_path, compute_stats(cohort.data, stat_columns).to_csv());
    write_file(cov_path, format_covariance_csv(sample_covariance(cohort.data, identified.observed())));
    write_manifest(cohort_path, args, "simulate", Json::object(),
                   {{"cohort", cohort_path.string()}, {"stats", stats_path.string()}, {"covariance", cov_path.string()}},
                   descent_json(o.descent), {{"n", o.n}, {"seed", o.seed}, {"continuous", o.continuous}});
    out << fmt::format("simulated {} respondents (seed {}) -> {}\n", o.n, o.seed, cohort_path.string());
    return kExitOk;
}

int cmd_fit(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const Model model(resolve_model(o.model));
    const std::string text = read_file(o.data);
    CovMatrix sample;
    std::optional<long long> n = o.n_override;
    if (text.rfind("variable,", 0) == 0) {
        const CovMatrix full = parse_covariance_csv(text);
        std::vector<Eigen::Index> idx;
        for (const auto& name : model.observed()) {
            auto it = std::find(full.order().begin(), full.order().end(), name);
            if (it == full.order().end()) throw ValidationError("covariance file lacks variable '" + name + "'");
            idx.push_back(it - full.order().begin());
        }
        Eigen::MatrixXd s(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < idx.size(); ++j) s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = full(idx[i], idx[j]);
            if (!(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) > 0.0)) {
                throw ValidationError("column '" + model.observed()[i] + "' is constant (zero variance)");
            }
        }
        sample = CovMatrix(model.observed(), s);
    } else {
        Table data = parse_csv(text);
        const bool needs_scores = std::any_of(subscales().begin(), subscales().end(),
                                              [&](const Subscale& s) { return !data.has(s.composite); });
        if (needs_scores) score_cohort(data, o.descent);
        sample = sample_covariance(data, model.observed());
        if (!n) n = data.rows();
    }

    if (const auto bad = model.unidentified_parameters(); !bad.empty()) {
        err << fmt::format("warning: structurally unidentified parameters (no effect on the implied covariance): {}\n",
                           fmt::join(bad, ", "));
    }

    const FitResult result = fit(model, sample, o.descent);
    const auto& last = result.last();
    const fs::path params_path = o.out.empty() ? fs::path("params.json") : fs::path(o.out);
    const fs::path trace_path = sibling(params_path, ".trace.csv");
    const fs::path report_path = sibling(params_path, ".report.txt");

    Json info = {{"status", std::string(to_string(result.status))},
                 {"iterations", last.t},
                 {"f_ml", last.f_ml},
                 {"gradient_norm", last.gradient_norm}};
    if (n) info["n"] = *n;
    info["descent"] = descent_json(o.descent);
    const std::string report = report_iteration(last, model, n) +
                               fmt::format("\nStatus: {} after {} iteration(s)\n", to_string(result.status), last.t);

    write_file(params_path, format_params(model, result.theta, info));
    write_file(trace_path, trace_csv(result.traces, model));
    write_file(report_path, report);
    Json outputs = {{"params", params_path.string()}, {"trace", trace_path.string()}, {"report", report_path.string()}};
    if (o.gradient_report) {
        const fs::path grad_path = sibling(params_path, ".gradient.csv");
        write_file(grad_path, gradient_report(model, result.theta, sample).to_csv());
        outputs["gradient_report"] = grad_path.string();
    }
    write_manifest(params_path, args, "fit", {{"data", o.data}}, outputs, descent_json(o.descent),
                   {{"model", model.name()}});
    out << report;
    return kExitOk;
}

int cmd_predict(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    const std::optional<std::string> expected =
        o.model.empty() ? std::nullopt : std::optional<std::string>(o.model);
    const Predictor predictor = Predictor::load(o.params, o.stats, expected);
    const BOPrediction p = predictor.predict(parse_input_list(o.input), parse_likert_mode(o.transform_mode));
    out << format_prediction_report(p);
    if (!o.out.empty()) {
        write_file(o.out, to_json(p).dump(2) + "\n");
        write_manifest(o.out, args, "predict", {{"params", o.params}, {"stats", o.stats}, {"input", o.input}},
                       {{"prediction", o.out}}, {{"transform_mode", o.transform_mode}},
                       {{"model", predictor.model().name()}});
    }
    return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
    std::shared_ptr<const Predictor> predictor;
    if (!o.params.empty() || !o.stats.empty()) {
        if (o.params.empty() || o.stats.empty()) throw ValidationError("serve needs both --params and --stats");
        const std::optional<std::string> expected =
            o.model.empty() ? std::nullopt : std::optional<std::string>(o.model);
        predictor = std::make_shared<const Predictor>(Predictor::load(o.params, o.stats, expected));
    }
    ApiService service(predictor);
    out << fmt::format("serving {} on http://{}:{}\n", predictor ? predictor->model().name() : "(no model)", o.host,
                       o.port)
        << std::flush;
    if (!service.listen(o.host, o.port)) throw IoError(fmt::format("cannot listen on {}:{}", o.host, o.port));
    return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
    Json m;
    try {
        m = Json::parse(read_file(o.manifest));
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    if (!m.contains("argv") || !m["argv"].is_array()) throw ParseError("manifest has no argv array");
    const auto replay_args = m["argv"].get<std::vector<std::string>>();
    if (!replay_args.empty() && replay_args.front() == "replay") throw ValidationError("manifest replays itself");
    return dispatch(replay_args, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Burnout structural equation model engine"};
    app.require_subcommand(1);
    Options o;
    std::string model_flag;

    auto add_descent = [&](CLI::App* sub) {
        sub->add_option("--eta", o.descent.eta, "Learning rate")->capture_default_str();
        sub->add_option("--max-iter", o.descent.max_iterations, "Iteration cap")->capture_default_str();
        sub->add_option("--tol", o.descent.grad_tolerance, "Gradient-norm tolerance")->capture_default_str();
    };

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort with scored composites");
    simulate->add_option("--n", o.n, "Respondents")->capture_default_str();
    simulate->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    simulate->add_option("--out", o.out, "Cohort CSV path")->required();
    simulate->add_flag("--continuous", o.continuous, "Keep ordinal and item continua undiscretized");
    simulate->add_option("--model", model_flag, "Ignored; the generator always uses the identified variant");
    add_descent(simulate);

    auto* fitc = app.add_subcommand("fit", "Estimate parameters by gradient descent on F_ML");
    fitc->add_option("--model", o.model, "paper-literal, identified or a spec file")->capture_default_str();
    fitc->add_option("--data", o.data, "Cohort CSV or covariance CSV")->required();
    fitc->add_option("--out", o.out, "Parameter file path (default params.json)");
    fitc->add_option("--n", o.n_override, "Sample size for the chi-square line (covariance input)");
    fitc->add_flag("--gradient-report", o.gradient_report, "Also write analytic/literal/FD gradient CSV");
    add_descent(fitc);

    auto* predict = app.add_subcommand("predict", "Predict BO for a hypothetical individual");
    predict->add_option("--params", o.params, "Parameter file")->required();
    predict->add_option("--stats", o.stats, "Standardization stats CSV")->required();
    predict->add_option("--input", o.input, "Codes CT1,CT2,CT3,CT4,RT1,RT2,RC1")->required();
    predict->add_option("--transform-mode", o.transform_mode, "paper | range06 | identity")
        ->check(CLI::IsMember({"paper", "range06", "identity"}))
        ->capture_default_str();
    predict->add_option("--model", model_flag, "Expected model name");
    predict->add_option("--out", o.out, "Also write the JSON report here");

    auto* serve = app.add_subcommand("serve", "Serve the prediction API");
    serve->add_option("--port", o.port, "TCP port")->capture_default_str();
    serve->add_option("--host", o.host, "Bind address")->capture_default_str();
    serve->add_option("--params", o.params, "Parameter file");
    serve->add_option("--stats", o.stats, "Standardization stats CSV");
    serve->add_option("--model", model_flag, "Expected model name");

    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("--manifest", o.manifest, "Manifest JSON")->required();

    std::vector<const char*> argv{"burnsem"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (fitc->parsed()) return cmd_fit(o, args, out, err);
    if (simulate->parsed()) return cmd_simulate(o, args, out);
    o.model = model_flag;
    if (predict->parsed()) return cmd_predict(o, args, out);
    if (serve->parsed()) return cmd_serve(o, out);
    return cmd_replay(o, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return kExitUnexpected;
    }
}

}  // namespace burnsem
