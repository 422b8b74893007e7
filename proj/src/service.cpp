#include "iplan/service.hpp"

#include <cstdlib>

#include <httplib.h>

namespace iplan {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

std::optional<nlohmann::json> parse_body(const std::string& body, ApiResponse& error) {
    try {
        auto doc = nlohmann::json::parse(body);
        if (!doc.is_object()) {
            error = api_error(400, "bad_request", "request body must be a JSON object");
            return std::nullopt;
        }
        return doc;
    } catch (const nlohmann::json::parse_error& e) {
        error = api_error(400, "bad_request", std::string("malformed JSON: ") + e.what());
        return std::nullopt;
    }
}

nlohmann::json actions_json(const std::vector<ActionId>& actions) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& a : actions) out.push_back(a.name);
    return out;
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
    ServiceConfig c;
    c.model_path = env_or("MODEL_PATH", c.model_path);
    c.listen_addr = env_or("LISTEN_ADDR", c.listen_addr);
    c.api_token = env_or("API_TOKEN", c.api_token);
    return c;
}

std::pair<std::string, int> parse_listen_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("listen address must be host:port, got '" + addr + "'");
    const auto host = addr.substr(0, colon);
    const auto port_text = addr.substr(colon + 1);
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(port_text, &used);
        if (used != port_text.size()) port = 0;
    } catch (const std::exception&) {
        port = 0;
    }
    if (port < 1 || port > 65535) throw std::invalid_argument("port must be in 1..65535, got '" + port_text + "'");
    return {host.empty() ? "0.0.0.0" : host, port};
}

ApiResponse api_error(int status, const std::string& code, const std::string& message, nlohmann::json extra) {
    nlohmann::json err{{"code", code}, {"message", message}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    return {status, {{"v", kApiVersion}, {"error", err}}};
}

nlohmann::json to_json(const Forecast& forecast) {
    return {{"expected_resolution_min", forecast.expected_resolution_min},
            {"next_event_probs", forecast.next_event_probs}};
}

nlohmann::json to_json(const Plan& plan) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : plan.steps) {
        steps.push_back({{"action", s.action.name},
                         {"expected_duration_min", s.expected_duration_min},
                         {"state_key_after", s.state_key_after},
                         {"node_after", s.node_after},
                         {"branch_probability", s.branch_probability}});
    }
    return {{"steps", steps},
            {"total_expected_min", plan.total_expected_min},
            {"match",
             {{"node", plan.match.node},
              {"distance", plan.match.distance},
              {"low_confidence", plan.match.low_confidence}}}};
}

Service::Service(std::shared_ptr<const Model> model, std::shared_ptr<TranslationProvider> provider,
                 ServiceConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
    if (model_) {
        ProviderLimits limits;
        limits.timeout = config_.provider_timeout;
        translator_ = std::make_unique<Translator>(model_->schema(), std::move(provider), limits);
    }
}

std::optional<ApiResponse> Service::unavailable() const {
    if (!model_) return api_error(503, "model_unavailable", "no model is loaded");
    if (!model_->solved()) return api_error(503, "model_unavailable", "the loaded model has not been solved");
    return std::nullopt;
}

std::optional<EventState> Service::request_state(const nlohmann::json& doc, ApiResponse& error,
                                                 std::string& provider_used) const {
    if (doc.contains("state")) {
        try {
            provider_used = "none";
            return state_from_json(doc["state"], model_->schema());
        } catch (const SchemaError& e) {
            error = api_error(422, "invalid_state", e.what(), {{"feature", e.feature()}});
            return std::nullopt;
        }
    }
    if (!doc.contains("text")) {
        error = api_error(400, "bad_request", "request needs a 'state' object or a 'text' string");
        return std::nullopt;
    }
    if (!doc["text"].is_string() || doc["text"].get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos) {
        error = api_error(400, "bad_request", "'text' must be a non-empty string");
        return std::nullopt;
    }
    const auto parsed = translator_->parse_event(doc["text"].get<std::string>());
    provider_used = parsed.provider_used;
    if (!parsed.state) {
        const int status = parsed.provider_timed_out ? 504 : 422;
        const std::string code = parsed.provider_timed_out ? "provider_timeout" : "unparseable_event";
        error = api_error(status, code, "could not fill required features from the text",
                          {{"missing", parsed.missing},
                           {"provider_used", parsed.provider_used},
                           {"fallback_reason", parsed.fallback_reason.value_or("")}});
        return std::nullopt;
    }
    return parsed.state;
}

ApiResponse Service::parse(const std::string& body) const {
    if (auto e = unavailable()) return *e;
    ApiResponse error;
    auto doc = parse_body(body, error);
    if (!doc) return error;
    if (!doc->contains("text") || !(*doc)["text"].is_string())
        return api_error(400, "bad_request", "request needs a 'text' string");
    const auto text = (*doc)["text"].get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return api_error(400, "bad_request", "'text' must be a non-empty string");
    const auto parsed = translator_->parse_event(text);
    if (!parsed.state) {
        const int status = parsed.provider_timed_out ? 504 : 422;
        const std::string code = parsed.provider_timed_out ? "provider_timeout" : "unparseable_event";
        return api_error(status, code, "could not fill required features from the text",
                         {{"missing", parsed.missing},
                          {"provider_used", parsed.provider_used},
                          {"fallback_reason", parsed.fallback_reason.value_or("")}});
    }
    nlohmann::json out{{"v", kApiVersion},
                       {"state", iplan::to_json(*parsed.state)},
                       {"provider_used", parsed.provider_used},
                       {"defaulted", parsed.defaulted}};
    if (parsed.fallback_reason) out["fallback_reason"] = *parsed.fallback_reason;
    return {200, out};
}

ApiResponse Service::recommend(const std::string& body) const {
    if (auto e = unavailable()) return *e;
    ApiResponse error;
    auto doc = parse_body(body, error);
    if (!doc) return error;
    std::string provider_used;
    auto state = request_state(*doc, error, provider_used);
    if (!state) return error;
    try {
        const auto plan = iplan::recommend(*model_, *state);
        const auto rendered = translator_->render_plan(plan);
        nlohmann::json out{{"v", kApiVersion},
                           {"plan", to_json(plan)},
                           {"forecast", to_json(plan.forecast)},
                           {"rendered_text", rendered.text},
                           {"provider_used", provider_used},
                           {"render_provider_used", rendered.provider_used},
                           {"match_confidence",
                            {{"distance", plan.match.distance},
                             {"threshold", model_->confidence_threshold()},
                             {"low_confidence", plan.match.low_confidence}}}};
        if (plan.match.low_confidence)
            out["warning"] = "low-confidence match: the nearest known situation is farther than usual";
        return {200, out};
    } catch (const NoResolutionPath& e) {
        return api_error(409, "no_resolution_path", e.what());
    }
}

ApiResponse Service::whatif(const std::string& body) const {
    if (auto e = unavailable()) return *e;
    ApiResponse error;
    auto doc = parse_body(body, error);
    if (!doc) return error;
    if (!doc->contains("action") || !(*doc)["action"].is_string())
        return api_error(400, "bad_request", "request needs an 'action' string");
    std::string provider_used;
    auto state = request_state(*doc, error, provider_used);
    if (!state) return error;
    try {
        const auto plan = iplan::what_if(*model_, *state, ActionId{(*doc)["action"].get<std::string>()});
        return {200,
                {{"v", kApiVersion},
                 {"plan", to_json(plan)},
                 {"forecast", to_json(plan.forecast)},
                 {"rendered_text", translator_->render_plan(plan).text}}};
    } catch (const ActionUnavailable& e) {
        return api_error(404, "action_unavailable", e.what(), {{"available", actions_json(e.available())}});
    } catch (const NoResolutionPath& e) {
        return api_error(409, "no_resolution_path", e.what());
    }
}

ApiResponse Service::stats() const {
    if (!model_) return api_error(503, "model_unavailable", "no model is loaded");
    const auto s = model_->stats();
    return {200,
            {{"v", kApiVersion},
             {"n_nodes", s.n_nodes},
             {"n_edges", s.n_edges},
             {"n_reports", s.n_reports},
             {"categories", s.categories},
             {"build_hash", s.build_hash}}};
}

ApiResponse Service::schema() const {
    if (!model_) return api_error(503, "model_unavailable", "no model is loaded");
    return {200, {{"v", kApiVersion}, {"schema", iplan::to_json(model_->schema())}}};
}

ApiResponse Service::handle(const std::string& method, const std::string& path, const std::string& body,
                            const std::string& authorization) const {
    if (!config_.api_token.empty() && authorization != "Bearer " + config_.api_token)
        return api_error(401, "unauthorized", "missing or invalid API token");
    try {
        if (method == "POST" && path == "/api/parse") return parse(body);
        if (method == "POST" && path == "/api/recommend") return recommend(body);
        if (method == "POST" && path == "/api/whatif") return whatif(body);
        if (method == "GET" && path == "/api/model/stats") return stats();
        if (method == "GET" && path == "/api/schema") return schema();
    } catch (const std::exception& e) {
        return api_error(500, "internal_error", e.what());
    }
    return api_error(404, "not_found", "no route for " + method + " " + path);
}

void Service::mount(httplib::Server& server) const {
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    for (const char* path : {"/api/parse", "/api/recommend", "/api/whatif"}) server.Post(path, dispatch);
    for (const char* path : {"/api/model/stats", "/api/schema"}) server.Get(path, dispatch);
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const auto r = res.status == 404 ? api_error(404, "not_found", "no route for " + req.method + " " + req.path)
                                         : api_error(res.status, "http_error", "request failed");
        res.set_content(r.body.dump(), "application/json");
    });
}

void serve(const Service& service, const std::string& listen_addr) {
    const auto [host, port] = parse_listen_addr(listen_addr);
    httplib::Server server;
    service.mount(server);
    if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + listen_addr);
}

}  // namespace iplan
