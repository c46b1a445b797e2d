#include "narrative/llm_gateway.hpp"
#include "narrative/trace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::llm {

using nlohmann::json;

namespace {
constexpr const char* kEmbeddingTemplate = "embedding";

// Releases a semaphore slot on scope exit.
struct SlotGuard {
    std::counting_semaphore<1024>& s;
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : s(sem) { s.acquire(); }
    ~SlotGuard() { s.release(); }
};
}  // namespace

Mode parse_mode(std::string_view name) {
    auto n = text::to_lower(std::string(name));
    if (n == "live") return Mode::Live;
    if (n == "record") return Mode::Record;
    if (n == "replay") return Mode::Replay;
    throw ValidationError("unknown gateway mode '" + std::string(name) + "' (expected live, record or replay)");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Live: return "live";
        case Mode::Record: return "record";
        case Mode::Replay: return "replay";
    }
    return "replay";
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string fingerprint(std::string_view template_id, std::string_view prompt, std::string_view model,
                        double temperature) {
    json j = {{"template_id", template_id}, {"prompt", prompt}, {"model", model}, {"temperature", temperature}};
    return sha256_hex(j.dump());
}

void to_json(json& j, const CassetteEntry& e) {
    j = json{{"fingerprint", e.fingerprint}, {"template_id", e.template_id}, {"model", e.model},
             {"temperature", e.temperature}, {"prompt", e.prompt},           {"response", e.response}};
}

void from_json(const json& j, CassetteEntry& e) {
    j.at("fingerprint").get_to(e.fingerprint);
    e.template_id = j.value("template_id", "");
    e.model = j.value("model", "");
    e.temperature = j.value("temperature", 0.0);
    e.prompt = j.value("prompt", "");
    j.at("response").get_to(e.response);
}

// ---- Cassette -------------------------------------------------------------

Cassette::Cassette(const Cassette& o) {
    std::shared_lock lock(o.mu_);
    entries_ = o.entries_;
}

Cassette& Cassette::operator=(const Cassette& o) {
    if (this == &o) return *this;
    std::map<std::string, CassetteEntry> copy;
    {
        std::shared_lock lock(o.mu_);
        copy = o.entries_;
    }
    std::unique_lock lock(mu_);
    entries_ = std::move(copy);
    return *this;
}

Cassette Cassette::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cassette not found: " + path.string());
    Cassette c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto e = json::parse(line).get<CassetteEntry>();
            c.entries_[e.fingerprint] = std::move(e);
        } catch (const json::exception& ex) {
            throw ParseError(fmt::format("{}:{}: bad cassette record: {}", path.string(), lineno, ex.what()));
        }
    }
    return c;
}

Cassette Cassette::load_or_empty(const std::filesystem::path& path) {
    if (path.empty() || !std::filesystem::exists(path)) return {};
    return load(path);
}

void Cassette::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cassette " + path.string());
    std::shared_lock lock(mu_);
    for (const auto& [_, e] : entries_) out << json(e).dump() << '\n';
}

std::optional<std::string> Cassette::lookup(const std::string& fp) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(fp);
    if (it == entries_.end()) return std::nullopt;
    return it->second.response;
}

void Cassette::put(CassetteEntry e) {
    std::unique_lock lock(mu_);
    auto fp = e.fingerprint;
    entries_[fp] = std::move(e);
}

std::size_t Cassette::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

std::vector<CassetteEntry> Cassette::entries() const {
    std::shared_lock lock(mu_);
    std::vector<CassetteEntry> out;
    for (const auto& [_, e] : entries_) out.push_back(e);
    return out;
}

void Cassette::merge(const Cassette& other) {
    for (auto& e : other.entries()) put(std::move(e));
}

// ---- Embeddings -----------------------------------------------------------

Embedding hash_embedding(std::string_view input, std::size_t dim) {
    if (dim == 0) throw ValidationError("embedding dimension must be positive");
    if (text::trim(std::string(input)).empty()) throw ValidationError("cannot embed empty text");
    Embedding e;
    e.values.assign(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : token) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        std::size_t bucket = static_cast<std::size_t>(h % dim);
        double sign = ((h >> 63) & 1) ? -1.0 : 1.0;
        e.values[bucket] += sign;
        token.clear();
    };
    for (char ch : input) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80)
            token += static_cast<char>(std::tolower(c));
        else
            flush();
    }
    flush();
    double norm = 0;
    for (double v : e.values) norm += v * v;
    if (norm > 0) {
        norm = std::sqrt(norm);
        for (double& v : e.values) v /= norm;
    }
    return e;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dimension() != b.dimension())
        throw ValidationError(fmt::format("embedding dimensions differ ({} vs {})", a.dimension(), b.dimension()));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> ScriptedProvider::embed(const std::string& text, const std::string&) {
    return hash_embedding(text).values;
}

// ---- Gateway --------------------------------------------------------------

Gateway::Gateway(GatewayConfig cfg, std::shared_ptr<Provider> provider, TemplateCatalog catalog)
    : cfg_(std::move(cfg)),
      provider_(std::move(provider)),
      catalog_(std::move(catalog)),
      slots_(std::clamp(cfg_.max_in_flight, 1, 1024)) {
    if (cfg_.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
    if (cfg_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    if (cfg_.temperature < 0) throw ConfigError("temperature must be non-negative");
    if (cfg_.embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
    if (cfg_.mode == Mode::Replay) {
        provider_.reset();
        if (!cfg_.cassette_path.empty()) cassette_ = Cassette::load(cfg_.cassette_path);
    } else {
        if (cfg_.mode == Mode::Record) cassette_ = Cassette::load_or_empty(cfg_.cassette_path);
        if (!provider_) provider_ = std::make_shared<HttpProvider>(cfg_.http);
    }
}

std::pair<std::string, std::string> Gateway::resolve(const CompletionRequest& req) const {
    if (req.temperature < 0) throw ValidationError("temperature must be non-negative");
    if (req.max_tokens <= 0) throw ValidationError("max_tokens must be positive");
    auto prompt = catalog_.render(req.template_id, req.variables);
    const auto& model = req.model.empty() ? cfg_.model : req.model;
    return {prompt, fingerprint(req.template_id, prompt, model, req.temperature)};
}

std::string Gateway::call_provider(const ProviderRequest& req) {
    SlotGuard guard(slots_);
    for (int attempt = 1;; ++attempt) {
        try {
            calls_.fetch_add(1);
            return provider_->complete(req);
        } catch (const TransportError& e) {
            if (attempt >= cfg_.max_attempts)
                throw TransportError(fmt::format("{} (after {} attempts)", e.what(), attempt));
            retries_.fetch_add(1);
            spdlog::warn("provider call failed ({}), retry {}/{}", e.what(), attempt, cfg_.max_attempts - 1);
            if (cfg_.retry_backoff_ms > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_backoff_ms * attempt));
        }
    }
}

std::string Gateway::complete(const CompletionRequest& req) {
    auto [prompt, fp] = resolve(req);
    if (active_trace) active_trace->add(fp);
    const auto& model = req.model.empty() ? cfg_.model : req.model;
    if (cfg_.mode == Mode::Replay) {
        auto hit = cassette_.lookup(fp);
        if (!hit) throw CacheMissError(fp);
        hits_.fetch_add(1);
        return *hit;
    }
    auto response = call_provider({req.template_id, prompt, model, req.temperature, req.max_tokens});
    if (cfg_.mode == Mode::Record)
        cassette_.put({fp, req.template_id, model, req.temperature, prompt, response});
    return response;
}

std::string Gateway::complete(const std::string& template_id, const Variables& vars) {
    CompletionRequest req;
    req.template_id = template_id;
    req.variables = vars;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    return complete(req);
}

Embedding Gateway::embed(std::string_view input) {
    if (text::trim(std::string(input)).empty()) throw ValidationError("cannot embed empty text");
    if (cfg_.embedding_backend == EmbeddingBackend::Hash) return hash_embedding(input, cfg_.embedding_dim);

    std::string t(input);
    auto fp = fingerprint(kEmbeddingTemplate, t, cfg_.embedding_model, 0.0);
    auto decode = [](const std::string& s) {
        Embedding e;
        e.values = json::parse(s).get<std::vector<double>>();
        return e;
    };
    if (cfg_.mode == Mode::Replay) {
        auto hit = cassette_.lookup(fp);
        if (!hit) throw CacheMissError(fp);
        hits_.fetch_add(1);
        return decode(*hit);
    }
    std::vector<double> values;
    {
        SlotGuard guard(slots_);
        calls_.fetch_add(1);
        values = provider_->embed(t, cfg_.embedding_model);
    }
    if (values.empty()) throw TransportError("provider returned an empty embedding");
    if (cfg_.mode == Mode::Record)
        cassette_.put({fp, kEmbeddingTemplate, cfg_.embedding_model, 0.0, t, json(values).dump()});
    return Embedding{std::move(values)};
}

void Gateway::save() const {
    if (cfg_.mode != Mode::Record) return;
    if (cfg_.cassette_path.empty()) throw ConfigError("record mode needs a cassette path");
    cassette_.save(cfg_.cassette_path);
}

GatewayStats Gateway::stats() const { return {hits_.load(), calls_.load(), retries_.load()}; }

}  // namespace narrative::llm
