#include "burnsem/service.hpp"

#include "burnsem/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

namespace burnsem {

namespace {

Json entry_json(const Predictor& pr, const ModelEntry& e) {
    Json j;
    j["label"] = e.label;
    j["value"] = e.free_index ? pr.theta()[*e.free_index] : e.status.value;
    j["free"] = e.free_index.has_value();
    const bool identified = !e.free_index || pr.model().influences_sigma()[static_cast<std::size_t>(*e.free_index)];
    j["identified"] = identified;
    if (!identified) j["note"] = "structurally unidentified";
    return j;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

Json parameter_listing(const Predictor& pr) {
    const Model& model = pr.model();
    Json groups = Json::array();
    for (const auto& node : model.nodes()) {
        Json params = Json::array();
        for (const auto& e : model.entries()) {
            if (e.kind == EntryKind::path && e.second == node) params.push_back(entry_json(pr, e));
        }
        if (!params.empty()) groups.push_back({{"group", "p"}, {"target", node}, {"parameters", std::move(params)}});
    }
    for (const auto& node : model.nodes()) {
        Json params = Json::array();
        for (const auto& e : model.entries()) {
            if (e.kind == EntryKind::loading && !e.implicit && e.first == node) params.push_back(entry_json(pr, e));
        }
        if (!params.empty()) groups.push_back({{"group", "w_" + lower(node)}, {"latent", node}, {"parameters", std::move(params)}});
    }
    Json variances = Json::array();
    for (const auto& e : model.entries()) {
        if (e.kind == EntryKind::variance || e.kind == EntryKind::residual) variances.push_back(entry_json(pr, e));
    }
    groups.push_back({{"group", "variances"}, {"parameters", std::move(variances)}});

    Json root;
    root["model"] = model.name();
    root["model_version"] = pr.version();
    root["groups"] = std::move(groups);
    root["unidentified"] = model.unidentified_parameters();
    return root;
}

std::variant<PredictRequest, Json> parse_predict_request(const Predictor& pr, std::string_view body) {
    Json root;
    try {
        root = Json::parse(body);
    } catch (const Json::parse_error&) {
        return Json{{"body", "request body is not valid JSON"}};
    }
    if (!root.is_object()) return Json{{"body", "request body must be a JSON object"}};

    PredictRequest req;
    Json errors = Json::object();
    const auto& cols = ordinal_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        auto it = root.find(cols[i]);
        if (it == root.end()) {
            errors[cols[i]] = cols[i] + " is required";
        } else if (!it->is_number_integer()) {
            errors[cols[i]] = cols[i] + " must be an integer code";
        } else {
            req.input.codes[i] = it->get<long long>();
        }
    }
    if (auto it = root.find("transform_mode"); it != root.end()) {
        try {
            if (!it->is_string()) throw ValidationError("transform_mode must be a string");
            req.mode = parse_likert_mode(it->get<std::string>());
        } catch (const ValidationError& e) {
            errors["transform_mode"] = e.what();
        }
    }
    for (const auto& e : pr.check(req.input)) {
        if (!errors.contains(e.field)) errors[e.field] = e.message;
    }
    if (!errors.empty()) return errors;
    return req;
}

ApiService::ApiService(std::shared_ptr<const Predictor> predictor)
    : predictor_(std::move(predictor)), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    const auto json_reply = [](httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    const auto pr = predictor_;

    srv.Get("/health", [pr, json_reply](const httplib::Request&, httplib::Response& res) {
        if (pr) {
            json_reply(res, 200, Json{{"status", "ok"}, {"model", pr->model().name()}});
        } else {
            json_reply(res, 200, Json{{"status", "degraded"}});
        }
    });

    srv.Get("/model/params", [pr, json_reply](const httplib::Request&, httplib::Response& res) {
        if (!pr) return json_reply(res, 503, Json{{"error", "no model loaded"}});
        json_reply(res, 200, parameter_listing(*pr));
    });

    srv.Post("/predict", [pr, json_reply](const httplib::Request& req, httplib::Response& res) {
        if (!pr) return json_reply(res, 503, Json{{"error", "no model loaded"}});
        auto parsed = parse_predict_request(*pr, req.body);
        if (auto* errors = std::get_if<Json>(&parsed)) {
            const int status = errors->contains("body") ? 400 : 422;
            return json_reply(res, status, Json{{"errors", *errors}});
        }
        const auto& request = std::get<PredictRequest>(parsed);
        try {
            json_reply(res, 200, to_json(pr->predict(request.input, request.mode)));
        } catch (const ValidationError& e) {
            json_reply(res, 422, Json{{"errors", {{"model", e.what()}}}});
        } catch (const Error& e) {
            json_reply(res, 500, Json{{"error", e.what()}});
        }
    });

    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

ApiService::~ApiService() { stop(); }

bool ApiService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int ApiService::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool ApiService::listen_after_bind() { return server_->listen_after_bind(); }

void ApiService::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

void ApiService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace burnsem
