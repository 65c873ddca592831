#include "atc/experience/embed.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "atc/errors.hpp"

namespace atc::experience {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvBasis = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(const std::string& text, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

} // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) raise(Errc::config_error, "embedding dimension must be positive");
}

std::string HashingEmbedder::id() const { return fmt::format("hashing:{}", dimension_); }

std::vector<float> HashingEmbedder::embed(const std::string& text) const {
    auto tokens = tokenize(text);
    if (tokens.empty()) raise(Errc::config_error, "cannot embed empty text");

    std::vector<double> acc(dimension_, 0.0);
    const std::uint64_t basis = kFnvBasis ^ seed_;
    for (std::size_t n = 1; n <= 3; ++n) {
        if (tokens.size() < n) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (std::size_t k = 1; k < n; ++k) {
                gram += ' ';
                gram += tokens[i + k];
            }
            std::uint64_t h = fnv1a64(gram, basis);
            double sign = (h >> 63) ? 1.0 : -1.0;
            acc[h % dimension_] += sign;
        }
    }

    double norm2 = 0.0;
    for (double v : acc) norm2 += v * v;
    if (norm2 < 1e-24) acc[0] = 1.0, norm2 = 1.0;
    double inv = 1.0 / std::sqrt(norm2);
    std::vector<float> out(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] * inv);
    return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg, SleepFn sleep)
    : cfg_(std::move(cfg)), sleep_(std::move(sleep)) {
    if (cfg_.base_url.empty()) raise(Errc::config_error, "remote embedder needs a base URL");
    if (cfg_.model.empty()) raise(Errc::config_error, "remote embedder needs a model name");
    if (cfg_.dimension == 0) raise(Errc::config_error, "embedding dimension must be positive");
    if (cfg_.attempts < 1) raise(Errc::config_error, "attempts must be at least 1");
    id_ = fmt::format("embed:{}@{}", cfg_.model, cfg_.base_url);
}

std::string RemoteEmbedder::id() const { return id_; }

std::vector<float> RemoteEmbedder::embed(const std::string& text) const {
    if (text.empty()) raise(Errc::config_error, "cannot embed empty text");

    auto once = [&]() {
        httplib::Client client(cfg_.base_url);
        auto ms = [](double s) {
            return std::chrono::milliseconds(static_cast<long long>(std::lround(s * 1000.0)));
        };
        client.set_connection_timeout(ms(cfg_.connect_timeout_s));
        client.set_read_timeout(ms(cfg_.read_timeout_s));
        client.set_write_timeout(ms(cfg_.read_timeout_s));

        httplib::Headers headers;
        std::string key = cfg_.api_key;
        if (key.empty() && !cfg_.api_key_env.empty()) {
            if (const char* env = std::getenv(cfg_.api_key_env.c_str())) key = env;
        }
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        json body = {{"model", cfg_.model}, {"input", text}};
        auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
        if (!res) {
            raise(Errc::backend_error, fmt::format("POST {}{} failed: {}", cfg_.base_url,
                                                   cfg_.path, httplib::to_string(res.error())));
        }
        if (res->status < 200 || res->status >= 300) {
            raise(Errc::backend_error, fmt::format("POST {}{} returned status {}", cfg_.base_url,
                                                   cfg_.path, res->status));
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() ||
            parsed["data"].empty() || !parsed["data"][0].contains("embedding")) {
            raise(Errc::backend_error, "response has no data[0].embedding");
        }
        std::vector<float> v = parsed["data"][0]["embedding"].get<std::vector<float>>();
        if (v.size() != cfg_.dimension) {
            raise(Errc::dimension_mismatch,
                  fmt::format("backend returned {} dimensions, configured {}", v.size(),
                              cfg_.dimension));
        }
        return v;
    };

    double delay_s = 0.5;
    for (int attempt = 1;; ++attempt) {
        try {
            return once();
        } catch (const AtcError& e) {
            if (e.code() != Errc::backend_error || attempt >= cfg_.attempts) throw;
            if (sleep_) sleep_(delay_s);
            delay_s *= 4.0;
        }
    }
}

} // namespace atc::experience
