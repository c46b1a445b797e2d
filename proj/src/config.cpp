#include "narrative/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "narrative/error.hpp"

namespace narrative {

using json = nlohmann::json;

namespace {

const std::set<std::string> kKeys = {"chunk_size", "window", "penalty", "max_gleanings", "resolution_schedule",
                                     "max_levels", "min_mentions", "report_context_words", "entity_types",
                                     "budgets", "k", "max_chunks", "level", "workers", "seed", "models",
                                     "provider", "cassette", "lexicon", "extraction_lexicon", "preprocess",
                                     "columns"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.empty() || path.is_absolute() || base.empty()) return path;
    return base / path;
}

json columns_json(const ingest::ColumnMapping& c) {
    return {{"sequence", c.sequence}, {"episode", c.episode}, {"episode_title", c.episode_title},
            {"start_time", c.start_time}, {"end_time", c.end_time}, {"text", c.text}, {"speaker", c.speaker}};
}

}  // namespace

std::filesystem::path data_dir() { return std::filesystem::path(NARRATIVE_SOURCE_DIR) / "data"; }

Config Config::defaults() {
    Config c;
    c.lexicon = data_dir() / "sentiment" / "lexicon.tsv";
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto c = defaults();
    apply_json(j, c, path.parent_path());
    return c;
}

void apply_json(const json& j, Config& c, const std::filesystem::path& base) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, _] : j.items())
        if (!kKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
    try {
        if (j.contains("chunk_size")) c.chunk_size = j["chunk_size"];
        if (j.contains("window")) c.window = j["window"];
        if (j.contains("penalty")) {
            if (j["penalty"].is_null())
                c.penalty.reset();
            else
                c.penalty = j["penalty"].get<double>();
        }
        if (j.contains("max_gleanings")) c.build.max_gleanings = j["max_gleanings"];
        if (j.contains("resolution_schedule")) {
            c.build.resolution_schedule = j["resolution_schedule"].get<std::vector<double>>();
            if (!j.contains("max_levels")) c.build.max_levels = static_cast<int>(c.build.resolution_schedule.size());
        }
        if (j.contains("max_levels")) c.build.max_levels = j["max_levels"];
        if (j.contains("min_mentions")) c.build.min_mentions = j["min_mentions"];
        if (j.contains("report_context_words")) c.build.report_context_words = j["report_context_words"];
        if (j.contains("entity_types")) c.build.entity_types = j["entity_types"].get<std::vector<std::string>>();
        if (j.contains("budgets")) {
            const auto& b = j["budgets"];
            c.local.budget = b.value("local", c.local.budget);
            c.global.budget = b.value("global", c.global.budget);
        }
        if (j.contains("k")) c.local.k = j["k"];
        if (j.contains("max_chunks")) c.local.max_chunks = j["max_chunks"];
        if (j.contains("level")) c.global.level = j["level"];
        if (j.contains("workers")) c.workers = j["workers"];
        if (j.contains("seed")) c.seed = j["seed"];
        if (j.contains("models")) {
            c.model = j["models"].value("completion", c.model);
            c.embedding_model = j["models"].value("embedding", c.embedding_model);
        }
        if (j.contains("provider")) {
            c.provider_url = j["provider"].value("base_url", c.provider_url);
            c.api_key_env = j["provider"].value("api_key_env", c.api_key_env);
        }
        if (j.contains("cassette")) c.cassette = resolve(base, j["cassette"]);
        if (j.contains("lexicon")) c.lexicon = resolve(base, j["lexicon"]);
        if (j.contains("extraction_lexicon")) c.extraction_lexicon = resolve(base, j["extraction_lexicon"]);
        if (j.contains("preprocess")) c.preprocess = j["preprocess"].get<ingest::PreprocessConfig>();
        if (j.contains("columns")) c.columns = j["columns"].get<ingest::ColumnMapping>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.build.seed = c.seed;
    c.validate();
}

void Config::validate() const {
    if (chunk_size <= 0) throw ConfigError("chunk_size must be positive");
    if (window < 1) throw ConfigError("window must be at least 1");
    if (penalty && *penalty < 0) throw ConfigError("penalty must be non-negative");
    if (build.max_gleanings < 0) throw ConfigError("max_gleanings must be non-negative");
    if (build.resolution_schedule.empty()) throw ConfigError("resolution_schedule is empty");
    for (double r : build.resolution_schedule)
        if (!(r > 0)) throw ConfigError("resolution_schedule entries must be positive");
    if (build.max_levels < 1 || build.max_levels > static_cast<int>(build.resolution_schedule.size()))
        throw ConfigError("max_levels must be between 1 and the resolution_schedule length");
    if (local.k < 1) throw ConfigError("k must be positive");
    if (local.budget < 1 || global.budget < 1) throw ConfigError("budgets must be positive");
    if (global.level < 0) throw ConfigError("level must be non-negative");
    if (workers < 1) throw ConfigError("workers must be positive");
}

std::string Config::hash() const { return llm::sha256_hex(json(*this).dump()); }

llm::GatewayConfig Config::gateway(llm::Mode mode) const {
    llm::GatewayConfig g;
    g.mode = mode;
    g.model = model;
    g.embedding_model = embedding_model;
    g.max_in_flight = workers;
    g.cassette_path = cassette;
    g.http.base_url = provider_url;
    g.http.api_key_env = api_key_env;
    return g;
}

void to_json(json& j, const Config& c) {
    j = json{{"chunk_size", c.chunk_size},
             {"window", c.window},
             {"penalty", c.penalty ? json(*c.penalty) : json(nullptr)},
             {"max_gleanings", c.build.max_gleanings},
             {"resolution_schedule", c.build.resolution_schedule},
             {"max_levels", c.build.max_levels},
             {"min_mentions", c.build.min_mentions},
             {"report_context_words", c.build.report_context_words},
             {"entity_types", c.build.entity_types},
             {"budgets", {{"local", c.local.budget}, {"global", c.global.budget}}},
             {"k", c.local.k},
             {"max_chunks", c.local.max_chunks},
             {"level", c.global.level},
             {"workers", c.workers},
             {"seed", c.seed},
             {"models", {{"completion", c.model}, {"embedding", c.embedding_model}}},
             {"provider", {{"base_url", c.provider_url}, {"api_key_env", c.api_key_env}}},
             {"cassette", c.cassette.generic_string()},
             {"lexicon", c.lexicon.generic_string()},
             {"extraction_lexicon", c.extraction_lexicon.generic_string()},
             {"preprocess", c.preprocess},
             {"columns", columns_json(c.columns)}};
}

}  // namespace narrative
