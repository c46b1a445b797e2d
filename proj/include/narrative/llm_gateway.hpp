#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "narrative/templates.hpp"

namespace narrative::llm {

enum class Mode { Live, Record, Replay };

Mode parse_mode(std::string_view name);
std::string mode_name(Mode m);

struct CompletionRequest {
    std::string template_id;
    Variables variables;
    std::string model;  // empty: gateway default
    double temperature = 0.0;
    int max_tokens = 2048;
};

std::string sha256_hex(std::string_view data);

/// SHA-256 hex of the canonical JSON {model, prompt, temperature, template_id}.
std::string fingerprint(std::string_view template_id, std::string_view prompt, std::string_view model,
                        double temperature);

struct CassetteEntry {
    std::string fingerprint;
    std::string template_id;
    std::string model;
    double temperature = 0.0;
    std::string prompt;
    std::string response;

    bool operator==(const CassetteEntry&) const = default;
};

void to_json(nlohmann::json& j, const CassetteEntry& e);
void from_json(const nlohmann::json& j, CassetteEntry& e);

/// Content-addressed response store, one JSON record per line.
/// Concurrent lookups; insertions are serialised.
class Cassette {
public:
    Cassette() = default;
    static Cassette load(const std::filesystem::path& path);
    /// Loads if the file exists, otherwise returns an empty cassette.
    static Cassette load_or_empty(const std::filesystem::path& path);

    /// Sorted by fingerprint so that re-recording is byte-stable.
    void save(const std::filesystem::path& path) const;

    std::optional<std::string> lookup(const std::string& fp) const;
    void put(CassetteEntry e);
    std::size_t size() const;
    std::vector<CassetteEntry> entries() const;
    void merge(const Cassette& other);

    Cassette(const Cassette& o);
    Cassette& operator=(const Cassette& o);

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, CassetteEntry> entries_;
};

struct Embedding {
    std::vector<double> values;
    std::size_t dimension() const { return values.size(); }
};

/// Deterministic pseudo-embedding: each lowercased alphanumeric token is
/// FNV-1a hashed into one of `dim` buckets with a hash-derived sign, then
/// the vector is L2-normalised. Texts sharing vocabulary are cosine-close.
Embedding hash_embedding(std::string_view text, std::size_t dim = 256);
double cosine(const Embedding& a, const Embedding& b);

struct ProviderRequest {
    std::string template_id;
    std::string prompt;
    std::string model;
    double temperature = 0.0;
    int max_tokens = 2048;
};

/// Network boundary. Only implementations of this interface talk to a model.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string complete(const ProviderRequest& req) = 0;
    virtual std::vector<double> embed(const std::string& text, const std::string& model) = 0;
};

struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
};

/// OpenAI-compatible /v1/chat/completions and /v1/embeddings client.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig cfg);
    std::string complete(const ProviderRequest& req) override;
    std::vector<double> embed(const std::string& text, const std::string& model) override;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);
    HttpProviderConfig cfg_;
    std::string api_key_;
};

/// Answers from a callback. Used to author fixture cassettes and in tests.
class ScriptedProvider : public Provider {
public:
    using Responder = std::function<std::string(const ProviderRequest&)>;
    explicit ScriptedProvider(Responder r) : responder_(std::move(r)) {}

    std::string complete(const ProviderRequest& req) override { return responder_(req); }
    /// Falls back to the hash embedding.
    std::vector<double> embed(const std::string& text, const std::string& model) override;

private:
    Responder responder_;
};

enum class EmbeddingBackend { Hash, Provider };

struct GatewayConfig {
    Mode mode = Mode::Replay;
    std::string model = "gpt-4o-mini";
    std::string embedding_model = "text-embedding-3-small";
    EmbeddingBackend embedding_backend = EmbeddingBackend::Hash;
    std::size_t embedding_dim = 256;
    double temperature = 0.0;
    int max_tokens = 2048;
    int max_in_flight = 4;
    int max_attempts = 3;
    int retry_backoff_ms = 500;
    std::filesystem::path cassette_path;
    HttpProviderConfig http;
};

struct GatewayStats {
    std::size_t replay_hits = 0;
    std::size_t provider_calls = 0;
    std::size_t retries = 0;
};

class Gateway {
public:
    /// In replay mode no provider is constructed. In live/record mode the
    /// given provider is used, or an HttpProvider built from the config.
    explicit Gateway(GatewayConfig cfg, std::shared_ptr<Provider> provider = nullptr,
                     TemplateCatalog catalog = TemplateCatalog::builtin());

    std::string complete(const CompletionRequest& req);
    std::string complete(const std::string& template_id, const Variables& vars);

    /// Rendered prompt and fingerprint without calling anything.
    std::pair<std::string, std::string> resolve(const CompletionRequest& req) const;

    Embedding embed(std::string_view text);

    /// Writes the cassette in record mode; no-op otherwise.
    void save() const;

    Mode mode() const { return cfg_.mode; }
    const GatewayConfig& config() const { return cfg_; }
    const Cassette& cassette() const { return cassette_; }
    const TemplateCatalog& catalog() const { return catalog_; }
    GatewayStats stats() const;

private:
    std::string call_provider(const ProviderRequest& req);

    GatewayConfig cfg_;
    std::shared_ptr<Provider> provider_;
    TemplateCatalog catalog_;
    Cassette cassette_;
    std::counting_semaphore<1024> slots_;
    std::atomic<std::size_t> hits_{0}, calls_{0}, retries_{0};
};

}  // namespace narrative::llm
