#pragma once

#include <string>

#include "atc/agent/backend.hpp"

namespace atc::agent {

struct HttpBackendConfig {
    std::string base_url;                    // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key;                     // empty: fall back to api_key_env
    std::string api_key_env = "ATC_BACKEND_API_KEY";
    double connect_timeout_s = 10.0;
    double read_timeout_s = 120.0;
};

// Chat-completions client. Tool descriptors ride in the standard "tools"
// array; the first choice's message comes back verbatim so
// parse_backend_output sees the same wire shape the scripted backends fake.
// All transport and protocol failures raise BackendError, which
// complete_with_retries turns into backoff-and-retry.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    std::string id() const override;
    BackendRaw complete(const BackendRequest& request) override;

private:
    HttpBackendConfig cfg_;
    std::string id_;
};

// "http:<model>@<base_url>[<path>]", e.g. "http:gpt-4o@https://api.example.com"
// or "http:local@http://127.0.0.1:8080/v1/chat/completions".
// Throws ConfigError when the spec does not match that shape.
HttpBackendConfig parse_http_backend_spec(const std::string& spec);

} // namespace atc::agent
