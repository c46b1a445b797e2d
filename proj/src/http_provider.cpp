#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "narrative/error.hpp"
#include "narrative/llm_gateway.hpp"

namespace narrative::llm {

using nlohmann::json;

HttpProvider::HttpProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
    api_key_ = key;
}

json HttpProvider::post(const std::string& path, const json& body) {
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(cfg_.timeout_seconds, 0);
    cli.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + cfg_.base_url + path + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + path);
    if (res->status != 200)
        throw Error("HTTP " + std::to_string(res->status) + " from " + path + ": " + res->body.substr(0, 300));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed provider response: ") + e.what());
    }
}

std::string HttpProvider::complete(const ProviderRequest& req) {
    json body = {{"model", req.model},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_tokens},
                 {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})}};
    auto j = post("/v1/chat/completions", body);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw TransportError("provider response has no message content");
    }
}

std::vector<double> HttpProvider::embed(const std::string& text, const std::string& model) {
    auto j = post("/v1/embeddings", {{"model", model}, {"input", text}});
    try {
        return j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw TransportError("provider response has no embedding");
    }
}

}  // namespace narrative::llm
