#pragma once

#include "burnsem/predictor.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <variant>

namespace httplib {
class Server;
}

namespace burnsem {

// Parameter listing grouped as in the iteration report (p, w_*, variances),
// each entry flagged free/fixed and identified/structurally unidentified.
Json parameter_listing(const Predictor& predictor);

// Parses a /predict body. Returns the input, or per-field messages keyed by
// field name ("CT1", "transform_mode", ...).
struct PredictRequest {
    HypotheticalInput input;
    LikertMode mode = LikertMode::range06;
};
std::variant<PredictRequest, Json> parse_predict_request(const Predictor& predictor, std::string_view body);

// GET /health, GET /model/params, POST /predict over HTTP/1.1 with
// permissive CORS. The predictor is loaded once and never mutated; a null
// predictor serves /health as degraded and 503 elsewhere.
class ApiService {
public:
    explicit ApiService(std::shared_ptr<const Predictor> predictor);
    ~ApiService();
    ApiService(const ApiService&) = delete;
    ApiService& operator=(const ApiService&) = delete;

    // Blocks until stop(). Returns false if the socket cannot be bound.
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port; call listen_after_bind() (blocking) next.
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    std::shared_ptr<const Predictor> predictor_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace burnsem
