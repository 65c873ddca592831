#include "atc/agent/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "atc/errors.hpp"

namespace atc::agent {

using nlohmann::json;

namespace {

std::chrono::milliseconds to_ms(double seconds) {
    return std::chrono::milliseconds(static_cast<long long>(std::lround(seconds * 1000.0)));
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) raise(Errc::config_error, "http backend needs a base URL");
    if (cfg_.model.empty()) raise(Errc::config_error, "http backend needs a model name");
    id_ = fmt::format("http:{}@{}", cfg_.model, cfg_.base_url);
}

std::string HttpBackend::id() const { return id_; }

BackendRaw HttpBackend::complete(const BackendRequest& request) {
    json body;
    body["model"] = cfg_.model;
    body["temperature"] = request.temperature;
    body["messages"] = json::array();
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    if (!request.tools.empty()) {
        json tools = json::array();
        for (const auto& t : request.tools) tools.push_back(t.schema());
        body["tools"] = std::move(tools);
    }

    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(to_ms(cfg_.connect_timeout_s));
    client.set_read_timeout(to_ms(cfg_.read_timeout_s));
    client.set_write_timeout(to_ms(cfg_.read_timeout_s));

    httplib::Headers headers;
    std::string key = cfg_.api_key;
    if (key.empty() && !cfg_.api_key_env.empty()) {
        if (const char* env = std::getenv(cfg_.api_key_env.c_str())) key = env;
    }
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res) {
        raise(Errc::backend_error,
              fmt::format("POST {}{} failed: {}", cfg_.base_url, cfg_.path,
                          httplib::to_string(res.error())));
    }
    if (res->status < 200 || res->status >= 300) {
        raise(Errc::backend_error,
              fmt::format("POST {}{} returned status {}", cfg_.base_url, cfg_.path, res->status));
    }

    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        raise(Errc::backend_error, "response body is not valid JSON");
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("message")) {
        raise(Errc::backend_error, "response has no choices[0].message");
    }

    BackendRaw raw;
    raw.message = parsed["choices"][0]["message"];
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        const auto& usage = parsed["usage"];
        if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number()) {
            raw.prompt_tokens = usage["prompt_tokens"].get<std::size_t>();
        }
        if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number()) {
            raw.completion_tokens = usage["completion_tokens"].get<std::size_t>();
        }
    }
    return raw;
}

HttpBackendConfig parse_http_backend_spec(const std::string& spec) {
    const std::string prefix = "http:";
    if (spec.rfind(prefix, 0) != 0) {
        raise(Errc::config_error, fmt::format("not an http backend spec: \"{}\"", spec));
    }
    std::string rest = spec.substr(prefix.size());
    auto at = rest.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= rest.size()) {
        raise(Errc::config_error,
              fmt::format("http backend spec must look like http:<model>@<base_url>, got \"{}\"",
                          spec));
    }
    HttpBackendConfig cfg;
    cfg.model = rest.substr(0, at);
    std::string url = rest.substr(at + 1);
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        raise(Errc::config_error,
              fmt::format("http backend URL needs a scheme, got \"{}\"", url));
    }
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        cfg.base_url = url;
    } else {
        cfg.base_url = url.substr(0, slash);
        cfg.path = url.substr(slash);
    }
    return cfg;
}

} // namespace atc::agent
