#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "iplan/translator.hpp"

namespace httplib {
class Server;
}

namespace iplan {

inline constexpr int kApiVersion = 1;

struct ServiceConfig {
    std::string model_path;
    std::string listen_addr = "127.0.0.1:8080";
    std::optional<double> confidence_threshold;
    std::chrono::milliseconds provider_timeout{10'000};
    std::string api_token;  // empty: no token required

    /// MODEL_PATH, LISTEN_ADDR, API_TOKEN; fields not set keep their defaults.
    static ServiceConfig from_env();
};

/// Splits "host:port"; throws std::invalid_argument when the port is not in 1..65535.
std::pair<std::string, int> parse_listen_addr(const std::string& addr);

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

ApiResponse api_error(int status, const std::string& code, const std::string& message,
                      nlohmann::json extra = nlohmann::json::object());

nlohmann::json to_json(const Plan& plan);
nlohmann::json to_json(const Forecast& forecast);

/// Request handlers over one immutable model. Handlers are const and safe to
/// call concurrently.
class Service {
public:
    /// `model` may be null (every model endpoint then answers 503).
    Service(std::shared_ptr<const Model> model, std::shared_ptr<TranslationProvider> provider = nullptr,
            ServiceConfig config = {});

    ApiResponse parse(const std::string& body) const;
    ApiResponse recommend(const std::string& body) const;
    ApiResponse whatif(const std::string& body) const;
    ApiResponse stats() const;
    ApiResponse schema() const;

    /// Routing plus the API token check; unknown routes give 404.
    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                       const std::string& authorization = {}) const;

    void mount(httplib::Server& server) const;
    const Translator* translator() const noexcept { return translator_.get(); }

private:
    std::optional<ApiResponse> unavailable() const;
    /// State from {"state": {...}} or {"text": "..."}; sets `error` on failure.
    std::optional<EventState> request_state(const nlohmann::json& doc, ApiResponse& error,
                                            std::string& provider_used) const;

    std::shared_ptr<const Model> model_;
    ServiceConfig config_;
    std::unique_ptr<Translator> translator_;
};

/// Blocks serving `service` on `listen_addr` until the server stops.
void serve(const Service& service, const std::string& listen_addr);

}  // namespace iplan
